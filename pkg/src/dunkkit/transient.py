"""Transient Robin heat equation in slow time and the eigen-expansion oracle.

In slow time ``T = B gamma t`` the semi-discrete system reads

    B gamma M dU/dT + (A0 + B A1(eta)) U = 0,   U(0) = 1,

where ``eta`` is an optional per-edge weight of the heat-transfer
coefficient.  The first step is implicit Euler and later steps use BDF2.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse.linalg import splu

from .assembly import Forms
from .mesh import prolong
from .spectral import robin_operator


@dataclass(frozen=True, eq=False)
class QoISeries:
    T: np.ndarray
    u_avg: np.ndarray
    u_boundary_avg: np.ndarray
    B: float
    gamma: float
    energy: np.ndarray | None = field(default=None, repr=False)
    final_field: np.ndarray | None = field(default=None, repr=False)
    forms: Forms | None = field(default=None, repr=False)
    u_min: np.ndarray | None = field(default=None, repr=False)

    @property
    def u_delta(self) -> np.ndarray:
        return (self.u_avg - self.u_boundary_avg) / self.u_avg

    @property
    def t(self) -> np.ndarray:
        """Diffusion-scaled time ``T / (B gamma)``."""
        return self.T / (self.B * self.gamma)

    def rows(self):
        for row in zip(self.T, self.u_avg, self.u_boundary_avg, self.u_delta):
            yield [float(x) for x in row]

    def to_csv(self, path_or_file) -> None:
        own = isinstance(path_or_file, str)
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh)
            w.writerow(["T", "u_avg", "u_boundary_avg", "u_delta"])
            for row in self.rows():
                w.writerow([f"{x:.10e}" for x in row])
        finally:
            if own:
                fh.close()


def step_heat(forms: Forms, B: float, T_final: float = 2.0, n_steps: int = 400,
              edge_weight: np.ndarray | None = None,
              schedule: Sequence[tuple[float, np.ndarray]] | None = None,
              store_energy: bool = False, store_min: bool = False) -> QoISeries:
    """Integrate from ``U = 1`` to slow time ``T_final`` with uniform steps.

    ``B`` sets the slow-time scale; the heat-transfer coefficient on a robin
    edge is ``B * edge_weight``.  ``schedule`` holds ``(T_start, edge_weight)``
    pairs for a coefficient that switches in time (the first entry must start
    at 0); the system is refactorized at each switch.
    """
    if B < 0:
        raise ValueError("B must be nonnegative")
    if n_steps < 2:
        raise ValueError("need at least two steps")
    if T_final <= 0:
        raise ValueError("T_final must be positive")
    n = forms.mesh.n_dofs
    T = np.linspace(0.0, T_final, n_steps + 1)
    if B == 0:
        one = np.ones_like(T)
        return QoISeries(T, one, one.copy(), 0.0, forms.gamma, final_field=np.ones(n), forms=forms)

    if schedule is None:
        schedule = [(0.0, edge_weight)]
    starts = [s for s, _ in schedule]
    if starts[0] != 0.0 or any(b <= a for a, b in zip(starts, starts[1:])):
        raise ValueError("schedule must start at T = 0 and increase")

    M = forms.M
    tau = (T_final / n_steps) / (B * forms.gamma)    # physical step
    cache: dict[tuple[int, int], object] = {}

    def factor(seg: int, bdf2: bool):
        key = (seg, int(bdf2))
        if key not in cache:
            K = robin_operator(forms, B, schedule[seg][1])
            lhs = (1.5 if bdf2 else 1.0) * M + tau * K
            cache[key] = (splu(lhs.tocsc()), K)
        return cache[key]

    u_avg = np.empty(n_steps + 1)
    u_bnd = np.empty(n_steps + 1)
    energy = np.empty(n_steps + 1) if store_energy else None
    u_min = np.empty(n_steps + 1) if store_min else None
    prev = None
    u = np.ones(n)

    def record(i, v):
        u_avg[i] = forms.domain_mean(v)
        u_bnd[i] = forms.boundary_mean(v)
        if energy is not None:
            energy[i] = v @ (forms.A0 @ v)
        if u_min is not None:
            u_min[i] = v.min()

    record(0, u)
    seg = 0
    for i in range(1, n_steps + 1):
        t_mid = T[i - 1] + 0.5 * (T[i] - T[i - 1])
        while seg + 1 < len(schedule) and schedule[seg + 1][0] <= t_mid:
            seg += 1
        if prev is None:
            lu, _ = factor(seg, False)
            new = lu.solve(M @ u)
        else:
            lu, _ = factor(seg, True)
            new = lu.solve(M @ (2.0 * u - 0.5 * prev))
        prev, u = u, new
        record(i, u)
    return QoISeries(T, u_avg, u_bnd, B, forms.gamma, energy, u, forms, u_min)


def sov_qoi(lams: np.ndarray, psis: np.ndarray, forms: Forms, B: float, T: np.ndarray) -> QoISeries:
    """Truncated eigen-expansion of the domain and boundary means."""
    if B <= 0:
        raise ValueError("slow time needs B > 0")
    T = np.asarray(T, dtype=float)
    bg = B * forms.gamma
    w = forms.volume * forms.domain_mean(psis) ** 2
    decay = np.exp(-np.outer(T, lams) / bg)
    u_avg = decay @ w
    u_bnd = decay @ (w * lams / bg)
    return QoISeries(T, u_avg, u_bnd, B, forms.gamma)


def mode_identity_residual(lams: np.ndarray, psis: np.ndarray, forms: Forms, B: float) -> np.ndarray:
    """H(psi_k) - M(psi_k) lambda_k / (B gamma) for each mode."""
    return forms.boundary_mean(psis) - forms.domain_mean(psis) * lams / (B * forms.gamma)


def discretization_error_indicator(coarse: QoISeries, fine: QoISeries) -> dict[str, float]:
    """Change between two nested space/time resolutions.

    ``h1`` is the H1 norm of the difference of final fields (the coarse
    field interpolated exactly onto the fine mesh), ``qoi`` the largest
    change of the domain mean at the coarse time levels.
    """
    if coarse.forms is None or fine.forms is None:
        raise ValueError("indicator needs series produced by step_heat")
    if not math.isclose(coarse.T[-1], fine.T[-1]):
        raise ValueError("runs end at different times")
    ratio = (len(fine.T) - 1) // (len(coarse.T) - 1)
    if ratio < 1 or (len(coarse.T) - 1) * ratio != len(fine.T) - 1:
        raise ValueError("fine time grid must refine the coarse one")
    try:
        uc = prolong(coarse.forms.mesh, fine.forms.mesh, coarse.final_field)
    except ValueError as exc:
        raise ValueError(f"mismatched meshes: {exc}") from exc
    e = fine.final_field - uc
    f = fine.forms
    h1 = math.sqrt(max(0.0, e @ (f.A0 @ e) + e @ (f.M @ e)))
    qoi = float(np.max(np.abs(fine.u_avg[::ratio] - coarse.u_avg)))
    return {"h1": h1, "qoi": qoi, "total": h1 + qoi}
