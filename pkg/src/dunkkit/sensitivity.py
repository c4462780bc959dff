"""Eigenfunction sensitivity at B = 0 and the functionals phi, chi, Upsilon.

The sensitivity ``psi`` solves a pure-Neumann problem whose data are the
uniform boundary flux balanced by a uniform sigma-weighted source; the
sigma-mean constraint is imposed with one Lagrange multiplier.  ``phi``
(energy), ``chi`` (boundary mass) and ``upsilon`` (sigma mass) of ``psi``
then drive every second-order lumped model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .assembly import Forms, MaterialField, assemble
from .geometry import DomainSpec
from .mesh import Mesh, refine


class SensitivityError(RuntimeError):
    pass


class NotInCatalog(KeyError):
    pass


@dataclass(frozen=True, eq=False)
class SensitivityResult:
    psi: np.ndarray = field(repr=False)
    multiplier: float
    phi: float
    chi: float
    upsilon: float
    gamma: float
    volume: float
    e_phi: float | None = None

    @property
    def gamma_chi(self) -> float:
        return self.gamma * self.chi

    @property
    def gamma2_upsilon(self) -> float:
        return self.gamma**2 * self.upsilon

    @property
    def lcond(self) -> float:
        """Conduction length in units of the extrinsic length: phi / gamma."""
        return self.phi / self.gamma

    def with_error(self, e_phi: float) -> "SensitivityResult":
        return SensitivityResult(self.psi, self.multiplier, self.phi, self.chi, self.upsilon,
                                 self.gamma, self.volume, e_phi)

    def to_json(self) -> dict:
        return {"phi": self.phi, "chi": self.chi, "upsilon": self.upsilon, "gamma": self.gamma,
                "gamma_chi": self.gamma_chi, "gamma2_upsilon": self.gamma2_upsilon,
                "e_phi": self.e_phi, "lcond": self.lcond}


def solve_sensitivity(mesh_or_forms: Mesh | Forms, mat: MaterialField | None = None) -> SensitivityResult:
    """Solve the bordered system for the sensitivity and evaluate its functionals.

    Sigma is rescaled to unit volume mean if it is not already; kappa is used
    as given.
    """
    forms = _forms(mesh_or_forms, mat)
    n = forms.mesh.n_dofs
    c = forms.mass_ones
    vol = forms.volume
    K = sp.bmat([[forms.A0, sp.csr_matrix(c[:, None])], [sp.csr_matrix(c[None, :]), None]], format="csc")
    rhs = np.zeros(n + 1)
    rhs[:n] = -forms.boundary_ones / math.sqrt(vol)
    try:
        sol = splu(K).solve(rhs)
    except RuntimeError as exc:
        raise SensitivityError(f"bordered system is singular ({exc}); is the mesh connected?") from exc
    if not np.all(np.isfinite(sol)):
        raise SensitivityError("bordered solve produced non-finite values")
    psi, p = sol[:n], float(sol[n])
    return SensitivityResult(
        psi=psi, multiplier=p,
        phi=float(psi @ (forms.A0 @ psi)),
        chi=float(psi @ (forms.A1 @ psi)),
        upsilon=float(psi @ (forms.M @ psi)),
        gamma=forms.gamma, volume=vol,
    )


def _forms(mesh_or_forms: Mesh | Forms, mat: MaterialField | None) -> Forms:
    if isinstance(mesh_or_forms, Forms):
        forms = mesh_or_forms
        if abs(forms.material.sigma_mean(forms.mesh) - 1.0) > 1e-12:
            forms = assemble(forms.mesh, forms.material.normalize(forms.mesh, kappa=False))
        return forms
    mesh = mesh_or_forms
    mat = mat or MaterialField.uniform()
    if abs(mat.sigma_mean(mesh) - 1.0) > 1e-12:
        mat = mat.normalize(mesh, kappa=False)
    return assemble(mesh, mat)


def max_principle_J(forms: Forms, w: np.ndarray) -> float:
    """Dual functional -a0(w, w) - 2 |Omega|^(-1/2) int_boundary w on the sigma-mean-zero part of w."""
    w = np.asarray(w, dtype=float)
    w = w - forms.domain_mean(w)
    return float(-(w @ (forms.A0 @ w)) - 2.0 * (forms.boundary_ones @ w) / math.sqrt(forms.volume))


def error_estimate_phi(phis: Sequence[float]) -> float:
    """Extrapolation error estimate for the finest of nested-mesh values.

    With ``rho = (phi_h - phi_h/2) / (phi_h/2 - phi_h/4)`` the estimate is
    ``|phi_h/2 - phi_h/4| / |rho - 1|``; when ``rho <= 1.1`` convergence is
    not established and the last difference itself is returned.
    """
    if len(phis) < 3:
        raise ValueError("error estimate needs at least three refinement levels")
    f0, f1, f2 = (float(x) for x in phis[-3:])
    d1, d2 = f0 - f1, f1 - f2
    if d2 == 0.0:
        return 0.0
    rho = d1 / d2
    if rho <= 1.1:
        return abs(d2)
    return abs(d2) / abs(rho - 1.0)


def phi_convergence(mesh: Mesh, mat: MaterialField | None = None, levels: int = 3
                    ) -> tuple[SensitivityResult, list[SensitivityResult]]:
    """Solve on ``levels`` nested meshes; the finest result carries ``e_phi``."""
    if levels < 3:
        raise ValueError("need at least three levels")
    results = []
    m = mesh
    for k in range(levels):
        if k:
            m = refine(m)
        results.append(solve_sensitivity(m, mat))
    e = error_estimate_phi([r.phi for r in results])
    return results[-1].with_error(e), results


# ---------------------------------------------------------------------------
# closed forms


_SQRT2 = math.sqrt(2.0)
_CATALOG = {
    "interval": (1.0 / 3.0, 1.0 / 9.0, 1.0 / 45.0),
    "disk": (1.0 / 2.0, 1.0 / 4.0, 1.0 / 12.0),
    "sphere": (3.0 / 5.0, 9.0 / 25.0, 27.0 / 175.0),
    "equilateral_triangle": (1.0, 9.0 / 5.0, 3.0 / 5.0),
}
_WHICH = ("phi", "gamma_chi", "gamma2_upsilon")


def closed_form(d: DomainSpec, which: str = "phi") -> float:
    """Exact value of phi, gamma*chi or gamma^2*Upsilon for catalog domains."""
    if which not in _WHICH:
        raise ValueError(f"which must be one of {_WHICH}")
    return closed_form_all(d)[which]


def closed_form_all(d: DomainSpec) -> dict[str, float]:
    shape = d.shape
    if shape in _CATALOG:
        vals = _CATALOG[shape]
    elif shape == "right_triangle":
        W = d.params["W"]
        if W == 1.0:
            c = 3.0 + 2.0 * _SQRT2
            vals = (4.0 / 3.0, 0.8 * c, 4.0 / 15.0 * c)
        else:
            t = triangle_functionals_exact(W)
            vals = (t["phi"], t["gamma_chi"], t["gamma2_upsilon"])
    elif shape == "rectangle":
        t = tensorize_interval(tensorize_interval(None, d.params["width"]), d.params["height"])
        vals = (t["phi"], t["gamma_chi"], t["gamma2_upsilon"])
    elif d.kind == "tensorized":
        base = d.params["base"]
        b = closed_form_all(base)
        g = base.gamma
        t = tensorize(b["phi"], b["gamma_chi"] / g, b["gamma2_upsilon"] / g**2, g, d.params["length"])
        vals = (t["phi"], t["gamma_chi"], t["gamma2_upsilon"])
    else:
        raise NotInCatalog(f"{shape!r} is not in the closed-form catalog")
    return dict(zip(_WHICH, vals))


def interval_functionals(length: float) -> dict[str, float]:
    """phi, chi, Upsilon, gamma of an interval of the given length."""
    g = 2.0 / length
    return {"phi": 1.0 / 3.0, "chi": length / 18.0, "upsilon": length**2 / 180.0, "gamma": g}


def tensorize(phi2d: float, chi2d: float | None, upsilon2d: float | None, gamma2d: float | None,
              length: float) -> dict[str, float]:
    """Functionals of ``base x (0, length)`` from those of the base (uniform materials).

    Only ``phi2d`` is needed for phi; chi and Upsilon also need the base's
    dimensional chi, Upsilon and gamma, since those do not scale alike.
    """
    one = interval_functionals(length)
    out = {"phi": phi2d + one["phi"]}
    if chi2d is not None and upsilon2d is not None and gamma2d is not None:
        ups = upsilon2d + one["upsilon"]
        chi = chi2d + one["chi"] + one["gamma"] * upsilon2d + gamma2d * one["upsilon"]
        g = gamma2d + one["gamma"]
        out.update(chi=chi, upsilon=ups, gamma=g, gamma_chi=g * chi, gamma2_upsilon=g * g * ups)
    return out


def tensorize_interval(base: dict[str, float] | None, length: float) -> dict[str, float]:
    """Chain helper: ``None`` starts from a single interval of ``length``."""
    if base is None:
        one = interval_functionals(length)
        return {**one, "gamma_chi": one["gamma"] * one["chi"], "gamma2_upsilon": one["gamma"] ** 2 * one["upsilon"]}
    return tensorize(base["phi"], base["chi"], base["upsilon"], base["gamma"], length)


# exact polynomial integration for the right triangle (0,0), (W,0), (0,1)


def _poly_mul(p: dict, q: dict) -> dict:
    out: dict = {}
    for (i, j), a in p.items():
        for (k, l), b in q.items():
            out[(i + k, j + l)] = out.get((i + k, j + l), 0.0) + a * b
    return out


def _tri_integral(p: dict, W: float) -> float:
    f = math.factorial
    return math.fsum(c * W ** (i + 1) * f(i) * f(j) / f(i + j + 2) for (i, j), c in p.items())


def _tri_boundary_integral(p: dict, W: float) -> float:
    f = math.factorial
    bottom = math.fsum(c * W ** (i + 1) / (i + 1) for (i, j), c in p.items() if j == 0)
    left = math.fsum(c / (j + 1) for (i, j), c in p.items() if i == 0)
    hyp = math.sqrt(1.0 + W * W) * math.fsum(c * W**i * f(i) * f(j) / f(i + j + 1) for (i, j), c in p.items())
    return bottom + left + hyp


def triangle_sensitivity_coefficients(W: float) -> dict[tuple[int, int], float]:
    """Monomial coefficients of the (quadratic) sensitivity on the right triangle."""
    if not W > 0:
        raise ValueError("W must be positive")
    b1 = math.sqrt(2.0 / W)
    b2 = -math.sqrt(1.0 / (2.0 * W)) * (1.0 + W + math.sqrt(1.0 + W * W)) / W
    p = {(1, 0): b1, (0, 1): b1, (2, 0): b2, (0, 2): b2}
    p[(0, 0)] = -_tri_integral(p, W) / (W / 2.0)
    return p


def triangle_functionals_exact(W: float) -> dict[str, float]:
    p = triangle_sensitivity_coefficients(W)
    px = {(i - 1, j): i * c for (i, j), c in p.items() if i > 0}
    py = {(i, j - 1): j * c for (i, j), c in p.items() if j > 0}
    phi = _tri_integral(_poly_mul(px, px), W) + _tri_integral(_poly_mul(py, py), W)
    p2 = _poly_mul(p, p)
    chi = _tri_boundary_integral(p2, W)
    ups = _tri_integral(p2, W)
    g = (1.0 + W + math.sqrt(1.0 + W * W)) / (W / 2.0)
    return {"phi": phi, "chi": chi, "upsilon": ups, "gamma": g,
            "gamma_chi": g * chi, "gamma2_upsilon": g * g * ups}


def triangle_phi_exact(W: float) -> float:
    return triangle_functionals_exact(W)["phi"]


def triangle_small_angle_limit(W0: float = 0.02, levels: int = 8) -> dict[str, float]:
    """Leading coefficients of phi ~ c W^-2 and gamma*chi, gamma^2*Upsilon ~ c W^-4.

    The scaled functionals are smooth in W, so polynomial (Neville)
    extrapolation of samples at W0 / 2^k to W = 0 is accurate to rounding.
    """
    if levels < 2:
        raise ValueError("need at least two samples")
    Ws = W0 / 2.0 ** np.arange(levels)

    def scaled(W):
        t = triangle_functionals_exact(W)
        return [W**2 * t["phi"], W**4 * t["gamma_chi"], W**4 * t["gamma2_upsilon"]]

    P = np.array([scaled(w) for w in Ws])
    for m in range(1, levels):
        P[:levels - m] = ((Ws[m:, None] * P[:levels - m] - Ws[:levels - m, None] * P[1:levels - m + 1])
                          / (Ws[m:, None] - Ws[:levels - m, None]))
    return dict(zip(_WHICH, (float(x) for x in P[0])))


# ---------------------------------------------------------------------------
# bounds


def phi_upper_bound_sigma(phi_uniform: float, mu: float, sigma_variance: float, gamma: float) -> float:
    """Upper bound on phi(sigma) from phi(1), the Neumann gap mu and var(sigma)."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    delta = math.sqrt(gamma**2 / mu * sigma_variance)
    return (math.sqrt(phi_uniform) + delta) ** 2


def mu_payne_weinberger_lb(diameter: float) -> float:
    """pi^2 / diameter^2, a lower bound on mu for convex domains."""
    if diameter <= 0:
        raise ValueError("diameter must be positive")
    return math.pi**2 / diameter**2


def phi_lower_bound_F(d: DomainSpec, sigma_min: float = 1.0, kappa_max: float = 1.0,
                      in_radius: float | None = None) -> float:
    """Inscribed-ball lower bound on phi (2D and 3D)."""
    r = d.in_radius if in_radius is None else in_radius
    feat2 = r * d.gamma
    coef = sigma_min**2 / kappa_max
    if d.dim == 2:
        return coef * math.pi / 8.0 * r**2 / d.volume * feat2**2
    if d.dim == 3:
        return coef * 4.0 * math.pi / 45.0 * r**3 / d.volume * feat2**2
    raise ValueError("lower bound defined for 2D and 3D domains")
