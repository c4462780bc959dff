"""Robin and Neumann eigenvalue computations by inverse iteration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .assembly import Forms, mass_matrix


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class SpectralResult:
    lambda1: float
    psi1: np.ndarray = field(repr=False)
    B: float
    iterations: int = 0
    mu: float | None = None


def robin_operator(forms: Forms, B: float, edge_weight: np.ndarray | None = None) -> sp.csr_matrix:
    A1 = forms.A1 if edge_weight is None else forms.a1_weighted(edge_weight)
    return (forms.A0 + B * A1).tocsr()


def first_eigenpair(forms: Forms, B: float, tol: float = 1e-12, maxiter: int = 500,
                    edge_weight: np.ndarray | None = None) -> SpectralResult:
    """Smallest eigenpair of (A0 + B A1) psi = lambda M psi.

    ``psi`` is normalized to unit sigma-mass and made positive on average.
    """
    if B < 0:
        raise ValueError("B must be nonnegative")
    n = forms.mesh.n_dofs
    if B == 0:
        return SpectralResult(0.0, np.full(n, 1.0 / math.sqrt(forms.volume)), 0.0)
    K = robin_operator(forms, B, edge_weight)
    M = forms.M
    lu = splu(K.tocsc())
    x = np.ones(n)
    x /= math.sqrt(x @ (M @ x))
    lam = x @ (K @ x)
    floor = _rounding_floor(K, x)
    for it in range(1, maxiter + 1):
        y = lu.solve(M @ x)
        y /= math.sqrt(y @ (M @ y))
        new = float(y @ (K @ y))
        x = y
        if abs(new - lam) <= max(tol * abs(new), floor):
            lam = new
            break
        lam = new
    else:
        res = np.linalg.norm(K @ x - lam * (M @ x))
        raise ConvergenceError(f"inverse iteration did not converge in {maxiter} steps (residual {res:.3e})")
    if forms.mass_ones @ x < 0:
        x = -x
    return SpectralResult(lam, x, B, it)


def _rounding_floor(K: sp.spmatrix, x: np.ndarray) -> float:
    """Size of the rounding noise in the quadratic form x^T K x."""
    ax = np.abs(x)
    return 64.0 * np.finfo(float).eps * float(ax @ (abs(K) @ ax))


def second_neumann_eigenvalue(forms: Forms, tol: float = 1e-12, maxiter: int = 500, seed: int = 0) -> float:
    """Smallest nonzero eigenvalue of a0 over the unit-weight mass.

    Inverse iteration on (A0 + M1, M1) with the constant mode projected out,
    where M1 is the unweighted (sigma = 1) mass matrix.
    """
    mesh = forms.mesh
    M1 = mass_matrix(mesh)
    K = (forms.A0 + M1).tocsc()
    lu = splu(K)
    ones_m = M1 @ np.ones(mesh.n_dofs)
    vol = ones_m.sum()

    def project(v):
        return v - (ones_m @ v) / vol

    rng = np.random.default_rng(seed)
    x = project(rng.standard_normal(mesh.n_dofs))
    x /= math.sqrt(x @ (M1 @ x))
    nu = x @ (K @ x)
    floor = _rounding_floor(K, x)
    for _ in range(maxiter):
        y = project(lu.solve(M1 @ x))
        y /= math.sqrt(y @ (M1 @ y))
        new = float(y @ (K @ y))
        x = y
        if abs(new - nu) <= max(tol * abs(new), floor):
            return new - 1.0
        nu = new
    raise ConvergenceError(f"Neumann iteration did not converge in {maxiter} steps")


def eigenpairs(forms: Forms, B: float, k: int = 30, tol: float = 1e-10, maxiter: int = 500,
               edge_weight: np.ndarray | None = None, oversample: int | None = None,
               seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Lowest ``k`` Robin eigenpairs by block inverse iteration with Rayleigh-Ritz.

    Returns eigenvalues (ascending) and sigma-orthonormal eigenvectors as
    columns, each signed so that its sigma-mean is nonnegative.
    """
    n = forms.mesh.n_dofs
    p = min(n, k + (oversample if oversample is not None else max(10, k // 2)))
    if k > n:
        raise ValueError("more eigenpairs requested than degrees of freedom")
    K = robin_operator(forms, B, edge_weight)
    M = forms.M
    shift = 0.0 if B > 0 else 1.0
    lu = splu((K + shift * M).tocsc())
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    X[:, 0] = 1.0
    prev = None
    for _ in range(maxiter):
        Y = lu.solve(M @ X)
        Q, _ = np.linalg.qr(Y)
        Kr = Q.T @ (K @ Q)
        Mr = Q.T @ (M @ Q)
        theta, V = sla.eigh(0.5 * (Kr + Kr.T), 0.5 * (Mr + Mr.T))
        X = Q @ V
        if prev is not None and np.all(np.abs(theta[:k] - prev) <= tol * np.maximum(np.abs(theta[:k]), 1e-300) + 1e-300):
            break
        prev = theta[:k].copy()
    else:
        raise ConvergenceError(f"block iteration did not converge in {maxiter} steps")
    lam = theta[:k]
    psi = X[:, :k]
    signs = np.where(forms.mass_ones @ psi < 0, -1.0, 1.0)
    return lam, psi * signs


def lambda_approximants(B: float, gamma: float, phi: float) -> dict[str, float]:
    """First-order, second-order and [1/1] Pade approximations of lambda_1(B)."""
    if B < 0 or phi <= 0:
        raise ValueError("need B >= 0 and phi > 0")
    return {
        "lambda1_first": B * gamma,
        "lambda1_second": B * gamma - phi * B * B,
        "lambda1_pade": B * gamma / (1.0 + phi * B / gamma),
    }


def amplitude(forms: Forms, psi: np.ndarray) -> np.ndarray:
    """|Omega| M(psi)^2, the weight of each mode in the domain mean."""
    return forms.volume * forms.domain_mean(psi) ** 2
