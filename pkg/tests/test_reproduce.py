import math

import pytest

from dunkkit.cases import BUILTIN_NAMES, builtin, sigma_table
from dunkkit.reproduce import (TABLE_IDS, Expected, Options, ReproduceError, eval_expr, load_expected,
                               max_threads, parallel_map, reproduce, rows_to_csv)


def test_eval_expr():
    assert eval_expr("4/5*(3+2*sqrt(2))") == pytest.approx(0.8 * (3 + 2 * math.sqrt(2)))
    assert eval_expr("-1e-3") == -1e-3
    for bad in ("__import__('os')", "sin(1)", "x"):
        with pytest.raises(ReproduceError):
            eval_expr(bad)


def test_expected_table_covers_every_id():
    exp = load_expected()
    assert {k[0] for k in exp} == set(TABLE_IDS)
    assert all(e.tol >= 0 and e.mode in ("rel", "abs") for e in exp.values())


def test_expected_check():
    assert Expected(2.0, 0.01, "rel").check(2.01)
    assert not Expected(2.0, 0.01, "rel").check(2.03)
    assert Expected(0.0, 1e-5, "abs").check(5e-6)
    assert not Expected(1.0, 1.0, "abs").check(math.nan)


@pytest.mark.parametrize("tid", ["table1", "table2-subset", "table5", "table10"])
def test_fast_tables_pass(tid):
    rows = reproduce(tid)
    assert rows and all(r.passed is not False for r in rows)


def test_sweep_table_small():
    o = Options(levels=1, n_steps=400, Bs=(1e-1,))
    rows = reproduce("sart1-errors", o)
    by_q = {r.quantity: r for r in rows}
    assert by_q["bi"].passed
    assert by_q["E1_UB"].passed
    text = rows_to_csv(rows)
    assert text.splitlines()[0] == "table,row,quantity,computed,expected,tol,mode,pass"


def test_unknown_table():
    with pytest.raises(ReproduceError):
        reproduce("table42")


def test_threads(monkeypatch):
    monkeypatch.setenv("DUNKKIT_THREADS", "3")
    assert max_threads() == 3
    assert parallel_map(lambda x: x * x, [3, 1, 2]) == [9, 1, 4]
    monkeypatch.setenv("DUNKKIT_THREADS", "0")
    with pytest.raises(ReproduceError):
        max_threads()
    monkeypatch.setenv("DUNKKIT_THREADS", "many")
    with pytest.raises(ReproduceError):
        max_threads()


@pytest.mark.parametrize("name", [n for n in BUILTIN_NAMES if "<" not in n] + ["gear-1.6-32"])
def test_builtin_cases_mesh(name):
    case = builtin(name)
    m = case.mesh()
    m.validate()
    assert m.area == pytest.approx(case.domain.volume, rel=1e-12)
    sig = sigma_table(case, m)
    mean = sum(sig[int(r)] * a for r, a in zip(m.regions, m.areas)) / m.area
    assert mean == pytest.approx(1.0)


def test_builtin_unknown():
    with pytest.raises(KeyError):
        builtin("nope")
    with pytest.raises(KeyError):
        builtin("gear-x-y")
