"""Bounds on the domain mean for a non-uniform heat-transfer coefficient.

A coefficient that varies along the boundary (and possibly switches in
time) is bracketed by the uniform problems at its infimum and supremum; the
boundary mean gives a sharper one-sided lower bound when the coefficient is
steady.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .assembly import Forms
from .lumped import LumpedCoefficients, first_order_error_estimates
from .mesh import Mesh
from .transient import QoISeries, step_heat


class BoundsError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RobinField:
    """Per-boundary-edge coefficient values; neumann edges are ignored.

    ``schedule`` optionally lists ``(t_start, values)`` pairs (diffusion time)
    for a coefficient that changes in time; ``values`` is then the first
    entry.
    """

    values: np.ndarray
    lengths: np.ndarray = field(repr=False)
    active: np.ndarray = field(repr=False)
    schedule: tuple[tuple[float, np.ndarray], ...] | None = field(default=None, repr=False)

    @classmethod
    def on_mesh(cls, mesh: Mesh, values, schedule: Sequence[tuple[float, Sequence[float]]] | None = None
                ) -> "RobinField":
        vals = np.broadcast_to(np.asarray(values, dtype=float), (len(mesh.boundary),)).copy()
        sched = None
        if schedule is not None:
            sched = tuple((float(t0), np.broadcast_to(np.asarray(v, dtype=float), vals.shape).copy())
                          for t0, v in schedule)
            if sched[0][0] != 0.0:
                raise BoundsError("schedule must start at t = 0")
            vals = sched[0][1]
        f = cls(vals, mesh.boundary_lengths.copy(), mesh.robin_mask.copy(), sched)
        for v in f._all_values():
            if np.any(v[f.active] < 0):
                raise BoundsError("heat-transfer coefficient must be nonnegative")
        return f

    def _all_values(self):
        if self.schedule is None:
            return [self.values]
        return [v for _, v in self.schedule]

    @property
    def time_dependent(self) -> bool:
        return self.schedule is not None and len(self.schedule) > 1

    @property
    def B_inf(self) -> float:
        return float(min(v[self.active].min() for v in self._all_values()))

    @property
    def B_sup(self) -> float:
        return float(max(v[self.active].max() for v in self._all_values()))

    def mean(self, values: np.ndarray | None = None) -> float:
        v = self.values if values is None else values
        L = self.lengths[self.active]
        return float(np.dot(v[self.active], L) / L.sum())

    @property
    def B_bar(self) -> float:
        """Boundary mean of the (initial) coefficient."""
        return self.mean()

    @property
    def eta(self) -> np.ndarray:
        return self.values / self.B_bar

    @property
    def r(self) -> float:
        return (self.B_sup - self.B_inf) / self.B_sup

    @property
    def r_prime(self) -> float:
        return (self.B_bar - self.B_inf) / self.B_bar


def exponential_gap(r: float) -> float:
    """max_t (exp(-a t) - exp(-b t)) for r = (b - a)/b, in units where the
    maximum is attained at b t = log(1/(1-r)) / r."""
    if not 0 < r < 1:
        raise BoundsError("r must lie in (0, 1)")
    return (1.0 - r) ** ((1.0 - r) / r) - (1.0 - r) ** (1.0 / r)


def gap_G(r: float, E_asymp_at_Binf: float) -> float:
    """A priori half-width of the two-sided bound."""
    return 0.5 * (exponential_gap(r) + E_asymp_at_Binf)


def envelope(c_inf: LumpedCoefficients, B_sup: float, t) -> dict[str, np.ndarray]:
    """Lower, upper and midpoint bounds in diffusion time ``t``.

    ``c_inf`` carries phi and gamma evaluated at the coefficient infimum.
    """
    t = np.asarray(t, dtype=float)
    B_inf = c_inf.B
    if B_sup < B_inf:
        raise BoundsError("B_sup must not be smaller than B_inf")
    if B_inf == 0:
        warnings.warn("zero infimum: the upper bound degenerates to 1 + E", RuntimeWarning, stacklevel=2)
    g = c_inf.gamma
    e = first_order_error_estimates(c_inf)["E_asymp"]
    lb = np.exp(-B_sup * g * t)
    ub = np.exp(-B_inf * g * t) + e
    return {"u_LB": lb, "u_UB": ub, "u_MID": 0.5 * (lb + ub)}


def one_sided_lb(B_bar: float, gamma: float, t, field: RobinField | None = None) -> np.ndarray:
    """Lower bound from the boundary-mean coefficient (steady coefficient only)."""
    if field is not None and field.time_dependent:
        raise BoundsError("one-sided bound needs a steady coefficient; use envelope()")
    return np.exp(-B_bar * gamma * np.asarray(t, dtype=float))


def gap_G_prime(r_prime: float, E_asymp_at_Binf: float) -> float:
    return gap_G(r_prime, E_asymp_at_Binf)


def time_averaged(schedule: Sequence[tuple[float, float]], t_end: float, cutoff: float = 0.0) -> float:
    """Mean of a piecewise-constant scalar schedule over (cutoff, t_end)."""
    if not t_end > cutoff:
        raise BoundsError("t_end must exceed the cutoff")
    starts = [s for s, _ in schedule] + [t_end]
    total = 0.0
    for (s0, val), s1 in zip(schedule, starts[1:]):
        a, b = max(s0, cutoff), min(s1, t_end)
        if b > a:
            total += val * (b - a)
    return total / (t_end - cutoff)


@dataclass(frozen=True, eq=False)
class BoundsSeries:
    T: np.ndarray
    t: np.ndarray
    u_LB: np.ndarray
    u_LBprime: np.ndarray | None
    u_MID: np.ndarray
    u_UB: np.ndarray
    u_star_avg: np.ndarray
    run: QoISeries = field(repr=False)

    COLUMNS = ("T", "u_LB", "u_LBprime", "u_MID", "u_UB", "u_star_avg")

    def rows(self):
        lbp = self.u_LBprime if self.u_LBprime is not None else np.full_like(self.T, np.nan)
        yield from zip(self.T, self.u_LB, lbp, self.u_MID, self.u_UB, self.u_star_avg)

    def to_csv(self, path_or_file) -> None:
        own = isinstance(path_or_file, str)
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh)
            w.writerow(self.COLUMNS)
            for row in self.rows():
                w.writerow([f"{float(x):.10e}" for x in row])
        finally:
            if own:
                fh.close()


def bounds_run(forms: Forms, field: RobinField, phi: float, T_final: float = 2.0, n_steps: int = 400
               ) -> BoundsSeries:
    """Simulate the non-uniform problem and evaluate every bound on its grid.

    Slow time is measured with the boundary-mean coefficient.
    """
    g = forms.gamma
    B_ref = field.B_bar
    if B_ref <= 0:
        raise BoundsError("coefficient vanishes identically")
    sched = None
    if field.schedule is not None:
        sched = [(t0 * B_ref * g, v / B_ref) for t0, v in field.schedule]
    run = step_heat(forms, B_ref, T_final, n_steps, edge_weight=field.eta, schedule=sched)
    t = run.t
    c_inf = LumpedCoefficients(g, phi, 0.0, 0.0, field.B_inf)
    env = envelope(c_inf, field.B_sup, t)
    lbp = None if field.time_dependent else one_sided_lb(B_ref, g, t)
    return BoundsSeries(run.T, t, env["u_LB"], lbp, env["u_MID"], env["u_UB"], run.u_avg, run)
