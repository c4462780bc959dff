"""P2 finite-element forms with piecewise-constant material data.

Integrals use a 6-point degree-4 rule on triangles and 3-point Gauss on
edges, which integrate every assembled product exactly on straight-sided
meshes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh

# degree-4 symmetric rule on the reference triangle (weights sum to 1)
_A, _WA = 0.44594849091596488632, 0.22338158967801146570
_B, _WB = 0.09157621350977074346, 0.10995174365532186764
TRI_POINTS = np.array([
    [_A, _A], [1 - 2 * _A, _A], [_A, 1 - 2 * _A],
    [_B, _B], [1 - 2 * _B, _B], [_B, 1 - 2 * _B],
])
TRI_WEIGHTS = 0.5 * np.array([_WA] * 3 + [_WB] * 3)

_G = np.sqrt(3.0 / 5.0)
EDGE_POINTS = 0.5 * (1.0 + np.array([-_G, 0.0, _G]))
EDGE_WEIGHTS = np.array([5.0, 8.0, 5.0]) / 18.0


def p2_basis(xi, eta) -> np.ndarray:
    """Quadratic Lagrange basis on the reference triangle, last axis = 6."""
    l0 = 1.0 - xi - eta
    l1, l2 = xi, eta
    return np.stack([l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
                     4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0], axis=-1)


def p2_grad(xi, eta) -> np.ndarray:
    """Reference gradients, shape (..., 6, 2)."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    l0 = 1.0 - xi - eta
    l1, l2 = xi, eta
    d0 = np.array([-1.0, -1.0])
    d1 = np.array([1.0, 0.0])
    d2 = np.array([0.0, 1.0])
    e = lambda s: np.asarray(s)[..., None]
    return np.stack([
        e(4 * l0 - 1) * d0, e(4 * l1 - 1) * d1, e(4 * l2 - 1) * d2,
        4 * (e(l0) * d1 + e(l1) * d0), 4 * (e(l1) * d2 + e(l2) * d1), 4 * (e(l2) * d0 + e(l0) * d2),
    ], axis=-2)


def p2_edge_basis(s) -> np.ndarray:
    """1D quadratic basis on [0, 1] ordered (start, end, midpoint)."""
    s = np.asarray(s, dtype=float)
    return np.stack([(1 - s) * (1 - 2 * s), s * (2 * s - 1), 4 * s * (1 - s)], axis=-1)


_PHI = p2_basis(TRI_POINTS[:, 0], TRI_POINTS[:, 1])          # (q, 6)
_DPHI = p2_grad(TRI_POINTS[:, 0], TRI_POINTS[:, 1])          # (q, 6, 2)
MASS_REF = np.einsum("q,qi,qj->ij", TRI_WEIGHTS, _PHI, _PHI)
# STIFF_REF[a, b, i, j] = sum_q w dphi_i/dx_a dphi_j/dx_b
STIFF_REF = np.einsum("q,qia,qjb->abij", TRI_WEIGHTS, _DPHI, _DPHI)
_EPHI = p2_edge_basis(EDGE_POINTS)
EDGE_MASS_REF = np.einsum("q,qi,qj->ij", EDGE_WEIGHTS, _EPHI, _EPHI)


class MaterialError(ValueError):
    pass


@dataclass(frozen=True)
class MaterialField:
    """Piecewise-constant heat capacity ``sigma`` and conductivity ``kappa``."""

    sigma_by_region: Mapping[int, float] = field(default_factory=lambda: {0: 1.0})
    kappa_by_region: Mapping[int, float] = field(default_factory=lambda: {0: 1.0})
    normalized: bool = False

    def __post_init__(self):
        for name, vals in (("sigma", self.sigma_by_region), ("kappa", self.kappa_by_region)):
            for r, val in vals.items():
                if not val > 0:
                    raise MaterialError(f"{name} must be positive (region {r}: {val})")

    @classmethod
    def uniform(cls) -> "MaterialField":
        return cls({0: 1.0}, {0: 1.0}, True)

    def sigma(self, regions: np.ndarray) -> np.ndarray:
        return _lookup(self.sigma_by_region, regions, "sigma")

    def kappa(self, regions: np.ndarray) -> np.ndarray:
        return _lookup(self.kappa_by_region, regions, "kappa")

    def sigma_mean(self, mesh: Mesh) -> float:
        return float(np.dot(self.sigma(mesh.regions), mesh.areas) / mesh.area)

    def sigma_variance(self, mesh: Mesh) -> float:
        """Volume mean of (sigma - 1)**2."""
        s = self.sigma(mesh.regions)
        return float(np.dot((s - 1.0) ** 2, mesh.areas) / mesh.area)

    def normalize(self, mesh: Mesh, kappa: bool = True) -> "MaterialField":
        """Scale sigma to volume mean one and (optionally) kappa to minimum one."""
        present = np.unique(mesh.regions)
        smean = self.sigma_mean(mesh)
        kmin = min(self.kappa_by_region[int(r)] for r in present) if kappa else 1.0
        return MaterialField({r: v / smean for r, v in self.sigma_by_region.items()},
                             {r: v / kmin for r, v in self.kappa_by_region.items()}, True)

    def scaled_kappa(self, c: float) -> "MaterialField":
        return MaterialField(dict(self.sigma_by_region),
                             {r: c * v for r, v in self.kappa_by_region.items()}, False)


def _lookup(table: Mapping[int, float], regions: np.ndarray, name: str) -> np.ndarray:
    present = np.unique(regions)
    missing = [int(r) for r in present if int(r) not in table]
    if missing:
        raise MaterialError(f"no {name} value for region(s) {missing}")
    lut = np.zeros(int(present.max()) + 1)
    for r in present:
        lut[r] = table[int(r)]
    return lut[regions]


def _scatter(dofs: np.ndarray, local: np.ndarray, n: int) -> sp.csr_matrix:
    k = dofs.shape[1]
    rows = np.repeat(dofs, k, axis=1).ravel()
    cols = np.tile(dofs, (1, k)).ravel()
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def _geometry(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    p = mesh.vertices[mesh.triangles]
    J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)   # columns are edge vectors
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    inv = np.empty_like(J)
    inv[:, 0, 0] = J[:, 1, 1] / det
    inv[:, 1, 1] = J[:, 0, 0] / det
    inv[:, 0, 1] = -J[:, 0, 1] / det
    inv[:, 1, 0] = -J[:, 1, 0] / det
    return det, inv


def mass_matrix(mesh: Mesh, weight: np.ndarray | None = None) -> sp.csr_matrix:
    det, _ = _geometry(mesh)
    w = det if weight is None else det * weight
    return _scatter(mesh.dofs, w[:, None, None] * MASS_REF, mesh.n_dofs)


def stiffness_matrix(mesh: Mesh, weight: np.ndarray | None = None) -> sp.csr_matrix:
    det, inv = _geometry(mesh)
    # grad_x phi = inv^T grad_ref phi, so the metric is C = inv inv^T
    C = np.einsum("tak,tbk->tab", inv, inv)
    w = det if weight is None else det * weight
    local = w[:, None, None] * np.einsum("tab,abij->tij", C, STIFF_REF)
    return _scatter(mesh.dofs, local, mesh.n_dofs)


def boundary_mass_matrix(mesh: Mesh, edge_weight: np.ndarray | None = None,
                         robin_only: bool = True) -> sp.csr_matrix:
    """Boundary mass over robin edges, optionally weighted per edge."""
    L = mesh.boundary_lengths.copy()
    if edge_weight is not None:
        L = L * np.asarray(edge_weight, dtype=float)
    if robin_only:
        L = np.where(mesh.robin_mask, L, 0.0)
    return _scatter(mesh.boundary_dofs, L[:, None, None] * EDGE_MASS_REF, mesh.n_dofs)


@dataclass(frozen=True, eq=False)
class Forms:
    """Assembled matrices and the measures they imply."""

    mesh: Mesh
    material: MaterialField
    M: sp.csr_matrix
    A0: sp.csr_matrix
    A1: sp.csr_matrix

    @cached_property
    def ones(self) -> np.ndarray:
        return np.ones(self.mesh.n_dofs)

    @cached_property
    def mass_ones(self) -> np.ndarray:
        """Row vector of v -> int sigma v."""
        return self.M @ self.ones

    @cached_property
    def boundary_ones(self) -> np.ndarray:
        """Row vector of v -> int over robin boundary of v."""
        return self.A1 @ self.ones

    @property
    def volume(self) -> float:
        return self.mesh.area

    @property
    def boundary(self) -> float:
        return self.mesh.robin_length

    @property
    def gamma(self) -> float:
        return self.boundary / self.volume

    def a1_weighted(self, edge_weight: np.ndarray) -> sp.csr_matrix:
        return boundary_mass_matrix(self.mesh, edge_weight)

    # linear functionals
    def domain_mean(self, v: np.ndarray) -> np.ndarray:
        """sigma-weighted domain mean M(v); ``v`` may hold columns."""
        return (self.mass_ones @ v) / self.volume

    def boundary_mean(self, v: np.ndarray) -> np.ndarray:
        return (self.boundary_ones @ v) / self.boundary

    def solvability(self, v: np.ndarray) -> np.ndarray:
        """L(v) = gamma int sigma v - int_boundary v."""
        return self.gamma * (self.mass_ones @ v) - self.boundary_ones @ v


def assemble(mesh: Mesh, mat: MaterialField | None = None) -> Forms:
    mat = mat or MaterialField.uniform()
    sigma = mat.sigma(mesh.regions)
    kappa = mat.kappa(mesh.regions)
    return Forms(mesh, mat, mass_matrix(mesh, sigma), stiffness_matrix(mesh, kappa),
                 boundary_mass_matrix(mesh))


def functionals(forms: Forms) -> dict[str, np.ndarray]:
    """Coefficient rows of M(v), H(v) and L(v)."""
    return {
        "M": forms.mass_ones / forms.volume,
        "H": forms.boundary_ones / forms.boundary,
        "L": forms.gamma * forms.mass_ones - forms.boundary_ones,
    }


def evaluate(mesh: Mesh, u: np.ndarray, pts: np.ndarray, tri: np.ndarray) -> np.ndarray:
    """Evaluate a P2 field at points known to lie in triangles ``tri``."""
    p = mesh.vertices[mesh.triangles[tri]]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    r = pts - p[:, 0]
    xi = (r[:, 0] * d2[:, 1] - r[:, 1] * d2[:, 0]) / det
    eta = (d1[:, 0] * r[:, 1] - d1[:, 1] * r[:, 0]) / det
    return np.einsum("ti,ti->t", p2_basis(xi, eta), u[mesh.dofs[tri]])
