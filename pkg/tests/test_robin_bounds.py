import io
import math
import warnings

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from dunkkit.lumped import LumpedCoefficients
from dunkkit.robin_bounds import (BoundsError, RobinField, bounds_run, envelope, exponential_gap, gap_G,
                                  one_sided_lb, time_averaged)


@pytest.mark.parametrize("r", [0.01, 0.1, 0.5, 0.9])
def test_gap_is_maximum_of_exponential_difference(r):
    res = minimize_scalar(lambda s: -(math.exp(-(1 - r) * s) - math.exp(-s)), bounds=(0.0, 50.0),
                          method="bounded", options={"xatol": 1e-12})
    assert exponential_gap(r) == pytest.approx(-res.fun, rel=1e-7)


def test_gap_limits_and_validation():
    assert exponential_gap(0.5) == pytest.approx(0.25)
    # for small r the gap behaves like r / e
    assert exponential_gap(1e-4) == pytest.approx(1e-4 / math.e, rel=1e-3)
    for r in (0.0, 1.0, -0.1):
        with pytest.raises(BoundsError):
            exponential_gap(r)
    assert gap_G(0.5, 0.1) == pytest.approx(0.175)


def test_time_averaged():
    sched = [(0.0, 1.0), (1.0, 3.0)]
    assert time_averaged(sched, 2.0) == pytest.approx(2.0)
    assert time_averaged(sched, 2.0, cutoff=1.0) == pytest.approx(3.0)
    with pytest.raises(BoundsError):
        time_averaged(sched, 1.0, cutoff=1.0)


def test_field_statistics(sart1_mesh):
    nb = len(sart1_mesh.boundary)
    vals = np.where(np.arange(nb) % 2 == 0, 0.01, 0.03)
    f = RobinField.on_mesh(sart1_mesh, vals)
    assert f.B_inf == 0.01 and f.B_sup == 0.03
    assert f.B_inf < f.B_bar < f.B_sup
    assert f.r == pytest.approx(2 / 3)
    assert f.mean(f.eta) == pytest.approx(1.0)
    assert not f.time_dependent
    with pytest.raises(BoundsError):
        RobinField.on_mesh(sart1_mesh, -vals)
    with pytest.raises(BoundsError):
        RobinField.on_mesh(sart1_mesh, vals, schedule=[(1.0, vals)])


def test_schedule_extremes(sart1_mesh):
    f = RobinField.on_mesh(sart1_mesh, 0.02, schedule=[(0.0, 0.02), (5.0, 0.05), (9.0, 0.01)])
    assert f.time_dependent
    assert (f.B_inf, f.B_sup) == (0.01, 0.05)
    with pytest.raises(BoundsError):
        one_sided_lb(f.B_bar, 1.0, [0.0], field=f)


def test_envelope_checks():
    c = LumpedCoefficients(4.0, 2 / 3, 0.0, 0.0, 0.01)
    t = np.linspace(0, 10, 5)
    env = envelope(c, 0.02, t)
    assert np.all(env["u_LB"] <= env["u_MID"]) and np.all(env["u_MID"] <= env["u_UB"])
    with pytest.raises(BoundsError):
        envelope(c, 0.005, t)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        envelope(c.at(0.0), 0.02, t)
    assert any(issubclass(x.category, RuntimeWarning) for x in w)


def test_uniform_field_collapses(sart1_mesh, sart1_forms, sart1_sens):
    f = RobinField.on_mesh(sart1_mesh, 0.02)
    b = bounds_run(sart1_forms, f, sart1_sens.phi, 2.0, 200)
    assert np.allclose(b.u_LB, b.u_LBprime)
    assert np.all(b.u_LB <= b.u_star_avg + 1e-12)
    assert np.all(b.u_star_avg <= b.u_UB)
    buf = io.StringIO()
    b.to_csv(buf)
    assert buf.getvalue().splitlines()[0] == ",".join(b.COLUMNS)


def test_switching_field_runs(sart1_mesh, sart1_forms, sart1_sens):
    nb = len(sart1_mesh.boundary)
    rng = np.random.default_rng(3)
    f = RobinField.on_mesh(sart1_mesh, rng.uniform(0.01, 0.03, nb),
                           schedule=[(0.0, rng.uniform(0.01, 0.03, nb)), (2.0, rng.uniform(0.01, 0.03, nb))])
    b = bounds_run(sart1_forms, f, sart1_sens.phi, 2.0, 200)
    assert b.u_LBprime is None
    assert np.all(b.u_LB <= b.u_star_avg + 1e-12) and np.all(b.u_star_avg <= b.u_UB)
    assert np.isnan(list(b.rows())[0][2])
    with pytest.raises(BoundsError):
        bounds_run(sart1_forms, RobinField.on_mesh(sart1_mesh, 0.0), sart1_sens.phi)
