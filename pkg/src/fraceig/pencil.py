"""Truncated weighted eigenproblem ``d^s (-Lap)^s u = lambda m u``.

In the eigenbasis the problem reads ``D c = lambda M c`` with
``D = diag((d mu_k)^s)``.  Row 0 of ``D`` vanishes, so for ``lambda != 0``
the constant-mode coefficient is slaved to the others through
``(M c)_0 = 0``.  Eliminating it leaves the symmetric pencil
``Dt ct = lambda Mt ct`` with ``Dt > 0``, which is congruent to the single
symmetric matrix ``B = Dt^{-1/2} Mt Dt^{-1/2}``; the eigenvalues of the
original problem are the reciprocals of the nonzero eigenvalues of ``B``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import Basis, synthesize
from .environment import GalerkinSystem
from .errors import NoPositivePrincipalEigenvalue, NoSecondEigenvalue, NotInClassM, ValidationError

# eigenvalues of B below this fraction of its spectral radius count as zero
ZERO_RHO = 1e-13


@dataclass(frozen=True, eq=False)
class ReducedPencil:
    dtilde: np.ndarray
    mtilde: np.ndarray
    d: float
    s: float
    system: GalerkinSystem


@dataclass(frozen=True, eq=False)
class SpectrumSlice:
    lambda1: float
    lambda_minus1: float | None
    coeffs1: np.ndarray | None = None
    coeffs_minus1: np.ndarray | None = None
    rho_spectrum: np.ndarray | None = None
    d: float = 1.0
    s: float = 1.0


def _check_params(d, s):
    if not (np.isfinite(d) and d > 0):
        raise ValidationError(f"motility d must be positive, got {d}")
    if not (0 < s <= 1):
        raise ValidationError(f"fractional order s must lie in (0, 1], got {s}")


def reduced_weight_matrix(system: GalerkinSystem) -> np.ndarray:
    """Schur complement of the constant mode: ``M[1:,1:] - M[1:,0] M[0,1:] / M00``."""
    M = system.weight_matrix
    m00 = M[0, 0]
    if not m00 < 0:
        raise NotInClassM(f"constant-mode entry M00 = {m00:.6g} must be negative")
    col = M[1:, 0]
    Mt = M[1:, 1:] - np.outer(col, col) / m00
    return 0.5 * (Mt + Mt.T)


def build_reduced_pencil(system: GalerkinSystem, d: float, s: float) -> ReducedPencil:
    _check_params(d, s)
    mtilde = reduced_weight_matrix(system)
    dtilde = (d * system.mu[1:]) ** s
    if not np.all(dtilde > 0):
        raise ValidationError("Laplacian eigenvalues beyond the constant mode must be positive")
    return ReducedPencil(dtilde, mtilde, float(d), float(s), system)


def eigendecompose_symmetric(A) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in decreasing order and orthonormal eigenvectors (columns).

    Each eigenvector is signed so that its first non-negligible entry is
    positive.  Backed by LAPACK's symmetric divide-and-conquer driver.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError("expected a square matrix")
    scale = np.abs(A).max() if A.size else 0.0
    if A.size and np.abs(A - A.T).max() > 1e-12 * max(scale, np.finfo(float).tiny):
        raise ValidationError("matrix is not symmetric")
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    w, V = w[::-1], V[:, ::-1]
    if V.size:
        big = np.abs(V) > 1e-10 * np.abs(V).max(axis=0)
        first = np.argmax(big, axis=0)
        signs = np.sign(V[first, np.arange(V.shape[1])])
        V = V * np.where(signs == 0, 1.0, signs)
    return w, V


def _full_coeffs(system: GalerkinSystem, ct: np.ndarray, target: float) -> np.ndarray:
    """Prepend the slaved constant coefficient and scale to ``c^T M c = target``."""
    M = system.weight_matrix
    c0 = -(M[0, 1:] @ ct) / M[0, 0]
    c = np.concatenate([[c0], ct])
    q = c @ M @ c
    return c / np.sqrt(q / target)


def solve_spectrum(pencil: ReducedPencil, *, vectors: bool = True, require_minus1: bool = True,
                   keep_spectrum: bool = False) -> SpectrumSlice:
    """Principal positive eigenvalue and the negative one closest to zero.

    ``lambda1 = 1 / max(rho > 0)`` and ``lambda_minus1 = 1 / min(rho < 0)``
    over the spectrum ``rho`` of ``B``.  Eigenvectors are normalized to
    ``int m psi^2 = +1`` (resp. ``-1``); ``psi_1`` is signed to have positive
    integral over ``{m > 0}`` (positive mean for hand-built systems).
    """
    sq = np.sqrt(pencil.dtilde)
    B = pencil.mtilde / sq[:, None] / sq[None, :]
    if vectors:
        rho, Y = eigendecompose_symmetric(B)
    else:
        rho = np.linalg.eigvalsh(0.5 * (B + B.T))[::-1]
    cut = ZERO_RHO * max(np.abs(rho).max(), np.finfo(float).tiny)
    if not rho[0] > cut:
        raise NoPositivePrincipalEigenvalue(
            "no positive eigenvalue in the truncated pencil; the favorable region may be under-resolved"
        )
    has_neg = rho[-1] < -cut
    if require_minus1 and not has_neg:
        raise NoSecondEigenvalue("the truncated pencil has no negative eigenvalue")
    lam1 = 1.0 / rho[0]
    lam_m1 = 1.0 / rho[-1] if has_neg else None
    c1 = cm1 = None
    if vectors:
        system = pencil.system
        c1 = _full_coeffs(system, Y[:, 0] / sq, 1.0)
        ref = system.positive_moments @ c1 if system.positive_moments is not None else c1[0]
        if ref < 0:
            c1 = -c1
        if has_neg:
            cm1 = _full_coeffs(system, Y[:, -1] / sq, -1.0)
            if cm1[np.argmax(np.abs(cm1))] < 0:
                cm1 = -cm1
    return SpectrumSlice(lam1, lam_m1, c1, cm1, rho.copy() if keep_spectrum else None,
                         pencil.d, pencil.s)


def solve(system: GalerkinSystem, d: float = 1.0, s: float = 1.0, **kwargs) -> SpectrumSlice:
    """Shorthand for ``solve_spectrum(build_reduced_pencil(system, d, s))``."""
    return solve_spectrum(build_reduced_pencil(system, d, s), **kwargs)


def lambda1_limit_s0(system: GalerkinSystem) -> float:
    """``lambda_1(m, d, 0+)`` of the truncated problem.

    As ``s -> 0+`` every ``(d mu_k)^s`` tends to 1, so ``B`` tends to the
    reduced weight matrix itself; the limit does not depend on ``d``.
    """
    Mt = reduced_weight_matrix(system)
    rho_max = np.linalg.eigvalsh(Mt)[-1]
    if not rho_max > ZERO_RHO * np.abs(Mt).max():
        raise NoPositivePrincipalEigenvalue("reduced weight matrix has no positive eigenvalue")
    return float(1.0 / rho_max)


def reconstruct_function(coeffs, basis: Basis, grid) -> np.ndarray:
    """Values of ``sum_j coeffs[j] phi_j`` at the grid nodes."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (basis.size,):
        raise ValidationError(f"expected {basis.size} coefficients, got shape {coeffs.shape}")
    return synthesize(basis, grid, coeffs)


def rayleigh_numerator(system: GalerkinSystem, coeffs, d: float, s: float) -> float:
    """``<d^s (-Lap)^s u, u> = sum_k (d mu_k)^s c_k^2``."""
    c = np.asarray(coeffs, dtype=float)
    return float(np.sum((d * system.mu[1:]) ** s * c[1:] ** 2))
