"""Lumped (spatially uniform) temperature models and their error estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sensitivity import SensitivityResult
from .transient import QoISeries

E = math.e


@dataclass(frozen=True)
class LumpedCoefficients:
    gamma: float
    phi: float
    chi: float
    upsilon: float
    B: float
    T0: float = 0.2

    @classmethod
    def from_sensitivity(cls, s: SensitivityResult, B: float, T0: float = 0.2) -> "LumpedCoefficients":
        return cls(s.gamma, s.phi, s.chi, s.upsilon, B, T0)

    @property
    def bi(self) -> float:
        return self.B / self.gamma

    @property
    def bi_prime(self) -> float:
        return self.phi * self.bi

    @property
    def lcond(self) -> float:
        return self.phi / self.gamma

    @property
    def gamma_chi(self) -> float:
        return self.gamma * self.chi

    @property
    def gamma2_upsilon(self) -> float:
        return self.gamma**2 * self.upsilon

    def at(self, B: float) -> "LumpedCoefficients":
        return LumpedCoefficients(self.gamma, self.phi, self.chi, self.upsilon, B, self.T0)


def lumped_models(c: LumpedCoefficients, T) -> dict[str, np.ndarray | float]:
    """First-order, Pade second-order and relative-difference lumped models."""
    T = np.asarray(T, dtype=float)
    if np.any(T < 0):
        raise ValueError("slow time must be nonnegative")
    bp = c.bi_prime
    return {
        "U1": np.exp(-T),
        "U2P": np.exp(-T / (1.0 + bp)),
        "UDelta2P": bp / (1.0 + bp),
    }


def first_order_error_estimates(c: LumpedCoefficients) -> dict[str, float]:
    bp = c.bi_prime
    if bp < 0:
        raise ValueError("Bi' must be nonnegative")
    return {"E_asymp": bp / E, "T_max": 1.0 + bp / 2.0, "E_UB": 0.5 * math.sqrt(bp)}


def _second_order_gap(c: LumpedCoefficients) -> float:
    return abs(c.gamma_chi - c.gamma2_upsilon - c.phi**2)


def second_order_error_estimate(c: LumpedCoefficients) -> float:
    return (_second_order_gap(c) / E + c.gamma2_upsilon) * c.bi**2


def delta_error_estimate(c: LumpedCoefficients, T0: float | None = None) -> dict[str, float]:
    T0 = c.T0 if T0 is None else T0
    if not 0 < T0 <= 1:
        raise ValueError("cut-off T0 must lie in (0, 1]")
    C0 = c.gamma2_upsilon / (E * c.phi)
    C1 = _second_order_gap(c) / c.phi
    return {"C0": C0, "C1": C1, "bound": (C0 / T0 + C1) * c.bi}


def measured_errors(q: QoISeries, c: LumpedCoefficients, T0: float | None = None) -> dict[str, float]:
    """Grid maxima of the lumped-model errors against a computed series."""
    T0 = c.T0 if T0 is None else T0
    if T0 >= q.T[-1]:
        raise ValueError("T0 must be smaller than the final time")
    models = lumped_models(c, q.T)
    e1 = float(np.max(q.u_avg - models["U1"]))
    e2 = float(np.max(np.abs(q.u_avg - models["U2P"])))
    mask = q.T >= T0 - 1e-12 * q.T[-1]
    ud = models["UDelta2P"]
    ed = float(np.max(np.abs(q.u_delta[mask] - ud)) / ud) if ud > 0 else math.nan
    return {"E1": e1, "E2P": e2, "EDelta_rel": ed}


def from_dimensional(h: float, ell: float, k_inf: float, mean_rho_c: float) -> dict[str, float]:
    """Robin number and diffusion time from dimensional data."""
    for name, v in (("h", h), ("ell", ell), ("k_inf", k_inf), ("mean_rho_c", mean_rho_c)):
        if not v > 0:
            raise ValueError(f"{name} must be positive")
    return {"B": h * ell / k_inf, "t_diff": ell**2 * mean_rho_c / k_inf}


SWEEP_COLUMNS = ["B", "bi", "bi_prime", "E1", "E1_asymp", "E1_ratio", "E1_UB",
                 "E2P", "E2P_asymp", "EDelta_rel", "EDelta_bound"]


def sweep_row(q: QoISeries, c: LumpedCoefficients) -> dict[str, float]:
    """One row of the error-sweep table for the run ``q`` at ``c.B``."""
    meas = measured_errors(q, c)
    first = first_order_error_estimates(c)
    return {
        "B": c.B, "bi": c.bi, "bi_prime": c.bi_prime,
        "E1": meas["E1"], "E1_asymp": first["E_asymp"],
        "E1_ratio": first["E_asymp"] / meas["E1"] if meas["E1"] > 0 else math.nan,
        "E1_UB": first["E_UB"],
        "E2P": meas["E2P"], "E2P_asymp": second_order_error_estimate(c),
        "EDelta_rel": meas["EDelta_rel"], "EDelta_bound": delta_error_estimate(c)["bound"],
    }
