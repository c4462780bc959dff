import csv
import io
import json
import subprocess
import sys

import pytest

from dunkkit.cli import run


def out_of(capsys, argv):
    code = run(argv)
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def test_geometry_json(capsys):
    code, out, _ = out_of(capsys, ["geometry", "--builtin", "rect", "--levels", "1"])
    assert code == 0
    info = json.loads(out)
    assert info["volume"] == pytest.approx(0.2475)
    assert info["features"]["in_radius"] == pytest.approx(0.125, abs=1e-9)
    assert info["mesh"]["area_mismatch"] < 1e-12


def test_geometry_writes_mesh(capsys, tmp_path):
    path = tmp_path / "mesh.json"
    code, out, _ = out_of(capsys, ["geometry", "--builtin", "sart1", "--levels", "1", "--out", str(path)])
    assert code == 0
    assert "triangles" in json.loads(path.read_text())


def test_phi_rect(capsys):
    code, out, _ = out_of(capsys, ["phi", "--builtin", "rect", "--levels", "0"])
    assert code == 0
    info = json.loads(out)
    assert info["phi"] == pytest.approx(2 / 3, abs=1e-10)
    assert info["e_phi"] < 1e-10


def test_phi_geometry_file_and_sigma(capsys, tmp_path):
    p = tmp_path / "d.json"
    p.write_text(json.dumps({"kind": "polygon", "vertices": [[0, 0], [0.25, 0], [0, 1]]}))
    code, out, _ = out_of(capsys, ["phi", "--geometry", str(p), "--levels", "1"])
    assert code == 0
    assert json.loads(out)["phi"] == pytest.approx(9.13624485734989, rel=1e-9)


def test_phi_closed_form_kind(capsys, tmp_path):
    p = tmp_path / "d.json"
    p.write_text(json.dumps({"kind": "sphere", "radius": 2.0}))
    code, out, _ = out_of(capsys, ["phi", "--geometry", str(p)])
    assert json.loads(out)["phi"] == pytest.approx(0.6)


def test_spectrum_csv(capsys):
    code, out, _ = out_of(capsys, ["spectrum", "--builtin", "sart1", "--levels", "1", "--B", "0.01,0.1"])
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [float(r["B"]) for r in rows] == [0.01, 0.1]
    for r in rows:
        assert float(r["lambda1"]) < float(r["lambda1_first"])


def test_transient_json(capsys):
    code, out, _ = out_of(capsys, ["transient", "--builtin", "sart1", "--levels", "1", "--B", "0.1",
                                   "--steps", "20", "--format", "json"])
    rows = json.loads(out)
    assert len(rows) == 21 and rows[0]["u_avg"] == pytest.approx(1.0, abs=1e-14)


def test_estimate_and_bounds(capsys, tmp_path):
    code, out, _ = out_of(capsys, ["estimate", "--builtin", "sart1", "--levels", "1", "--B", "0.01",
                                   "--steps", "200"])
    row = next(csv.DictReader(io.StringIO(out)))
    assert float(row["E1"]) <= float(row["E1_UB"])
    path = tmp_path / "b.csv"
    code, _, _ = out_of(capsys, ["bounds", "--builtin", "sart1", "--levels", "1", "--B", "0.01,0.02",
                                 "--steps", "50", "--out", str(path)])
    assert code == 0
    rows = list(csv.DictReader(path.open()))
    assert len(rows) == 51
    assert all(float(r["u_LB"]) <= float(r["u_star_avg"]) + 1e-12 for r in rows)


def test_reproduce_table10(capsys):
    code, out, err = out_of(capsys, ["reproduce", "table10", "--strict"])
    assert code == 0
    assert "12/12 rows pass" in err
    assert out.splitlines()[0].startswith("table,row,quantity")


@pytest.mark.parametrize("argv", [
    ["reproduce", "table99"],
    ["transient", "--builtin", "sart1", "--B", "0.1,0.2"],
    ["phi", "--builtin", "nonsense"],
    ["phi", "--builtin", "gear-1.6-31"],
    ["transient", "--B", "-1"],
    ["transient", "--t0", "2"],
    ["transient", "--steps", "1"],
    ["phi", "--geometry", "/nonexistent/file.json"],
    ["estimate", "--builtin", "sart1", "--B", "0", "--levels", "0"],
])
def test_errors_exit_2(capsys, argv):
    code, out, err = out_of(capsys, argv)
    assert code == 2
    assert err.startswith("dunkkit: error:")


def test_bad_arguments_rejected_by_parser(capsys):
    with pytest.raises(SystemExit) as exc:
        run(["transient", "--sigma", "0:abc"])
    assert exc.value.code == 2


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "dunkkit.cli", "reproduce", "table1", "--strict"],
                       capture_output=True, text=True, timeout=120)
    assert r.returncode == 0, r.stderr
    assert "3/3 rows pass" in r.stderr
