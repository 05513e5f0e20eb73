"""Linearisation, eigenvalue classification, center/stable splitting and the
Lyapunov matrix equation.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg as sla

from .errors import DecouplingError, SpectralError, UnstableSpectrumError
from .poly import PolySystem

__all__ = [
    "Verdict",
    "SpectrumClass",
    "BlockSplit",
    "LyapunovSolution",
    "linearize",
    "default_tol",
    "classify",
    "block_diagonalize",
    "solve_lyapunov",
]

#: Largest acceptable condition number of the block-diagonalising transform.
MAX_TRANSFORM_COND = 1e10


class Verdict(str, Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class SpectrumClass:
    n_neg: int
    n_zero: int
    n_pos: int
    eigenvalues: tuple[complex, ...]
    verdict: Verdict


@dataclass(frozen=True)
class BlockSplit:
    """Real coordinate change ``z = T x`` with ``T A T^-1 = diag(A1, A2)``.

    ``A1`` (``k x k``) carries the eigenvalues on the imaginary axis and
    ``A2`` the strictly stable ones.
    """

    T: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    k: int

    @property
    def T_inv(self) -> np.ndarray:
        return np.linalg.inv(self.T)

    @property
    def n(self) -> int:
        return self.T.shape[0]

    def block_matrix(self) -> np.ndarray:
        return sla.block_diag(self.A1, self.A2)


@dataclass(frozen=True)
class LyapunovSolution:
    P: np.ndarray
    residual: float


def linearize(sys: PolySystem) -> np.ndarray:
    """Jacobian of ``f`` at the origin, read off the degree-one coefficients."""
    n = sys.n
    A = np.zeros((n, n))
    for i, fi in enumerate(sys.f):
        for j in range(n):
            e = [0] * n
            e[j] = 1
            A[i, j] = fi.coeff(e)
    return A


def default_tol(A: np.ndarray) -> float:
    """Zero-real-part threshold: ``1e-9 * ||A||_F`` (floored for ``A = 0``)."""
    return max(1e-9 * np.linalg.norm(A, "fro"), 1e-12)


def _eigvals(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise SpectralError("matrix has non-finite entries")
    try:
        return np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise SpectralError(f"eigensolver failed: {exc}") from exc


def classify(A: np.ndarray, tol: float | None = None) -> SpectrumClass:
    """Lyapunov's first method applied to a linearisation matrix.

    Eigenvalues with ``Re > tol`` are counted as positive, ``|Re| <= tol``
    as zero and the rest as negative.  Any positive eigenvalue makes the
    verdict ``Unstable``; otherwise a zero-class eigenvalue leaves it
    ``Inconclusive``.
    """
    A = np.asarray(A, dtype=float)
    if tol is None:
        tol = default_tol(A)
    if tol <= 0:
        raise ValueError("tol must be positive")
    eig = _eigvals(A)
    re = eig.real
    n_pos = int(np.sum(re > tol))
    n_zero = int(np.sum(np.abs(re) <= tol))
    n_neg = len(eig) - n_pos - n_zero
    if n_pos:
        verdict = Verdict.UNSTABLE
    elif n_zero:
        verdict = Verdict.INCONCLUSIVE
    else:
        verdict = Verdict.STABLE
    return SpectrumClass(n_neg, n_zero, n_pos, tuple(complex(v) for v in eig), verdict)


def _already_split(A: np.ndarray, k: int, tol: float) -> bool:
    if np.any(A[:k, k:]) or np.any(A[k:, :k]):
        return False
    lead = _eigvals(A[:k, :k]) if k else np.array([])
    trail = _eigvals(A[k:, k:]) if k < A.shape[0] else np.array([])
    return bool(np.all(np.abs(lead.real) <= tol) and np.all(trail.real < -tol))


def block_diagonalize(A: np.ndarray, tol: float | None = None) -> BlockSplit:
    """Split ``A`` into its imaginary-axis and stable parts.

    An ordered real Schur form moves the imaginary-axis eigenvalues to the
    leading block; the remaining upper-right coupling is removed with a
    Sylvester solve.  If ``A`` is already block diagonal in the required
    order, ``T`` is the identity.

    Raises
    ------
    UnstableSpectrumError
        If any eigenvalue has positive real part.
    DecouplingError
        If the decoupling transform is too ill-conditioned to trust.
    """
    A = np.asarray(A, dtype=float)
    if tol is None:
        tol = default_tol(A)
    spec = classify(A, tol)
    if spec.n_pos:
        raise UnstableSpectrumError(
            f"UnstableSpectrum: {spec.n_pos} eigenvalue(s) with positive real part"
        )
    n, k = A.shape[0], spec.n_zero
    if k == 0:
        return BlockSplit(np.eye(n), np.zeros((0, 0)), A.copy(), 0)
    if _already_split(A, k, tol):
        return BlockSplit(np.eye(n), A[:k, :k].copy(), A[k:, k:].copy(), k)

    S, Z, sdim = sla.schur(A, output="real", sort=lambda re, im: abs(re) <= tol)
    if sdim != k:
        raise DecouplingError(
            f"ordered Schur form grouped {sdim} eigenvalues, expected {k}; "
            "eigenvalues lie too close to the tolerance boundary"
        )
    S11, S12, S22 = S[:k, :k], S[:k, k:], S[k:, k:]
    # S11 X - X S22 = -S12
    X = sla.solve_sylvester(S11, -S22, -S12)
    Y = np.eye(n)
    Y[:k, k:] = X
    T_inv = Z @ Y
    cond = np.linalg.cond(T_inv)
    if not np.isfinite(cond) or cond > MAX_TRANSFORM_COND:
        raise DecouplingError(f"decoupling transform is ill-conditioned (cond ~ {cond:.3e})")
    T = np.linalg.solve(Y, Z.T)
    D = T @ A @ T_inv
    return BlockSplit(T, D[:k, :k].copy(), D[k:, k:].copy(), k)


def solve_lyapunov(A2: np.ndarray, Q: np.ndarray | None = None) -> LyapunovSolution:
    """Solve ``A2^T P + P A2 = -Q`` for Hurwitz ``A2``.

    ``Q`` defaults to the identity.  The solution is symmetrised and checked
    for positive definiteness.
    """
    A2 = np.atleast_2d(np.asarray(A2, dtype=float))
    m = A2.shape[0]
    Q = np.eye(m) if Q is None else np.atleast_2d(np.asarray(Q, dtype=float))
    if Q.shape != (m, m):
        raise ValueError(f"Q must be {m}x{m}, got {Q.shape}")
    if not np.allclose(Q, Q.T, atol=1e-12):
        raise ValueError("Q must be symmetric")
    if np.linalg.eigvalsh(Q).min() <= 0:
        raise ValueError("Q must be positive definite")
    eig = _eigvals(A2)
    if np.any(eig.real >= 0):
        raise SpectralError("A2 is not Hurwitz; the Lyapunov equation has no SPD solution")
    try:
        P = sla.solve_continuous_lyapunov(A2.T, -Q)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SpectralError(f"Lyapunov solve failed: {exc}") from exc
    P = 0.5 * (P + P.T)
    if np.linalg.eigvalsh(P).min() <= 0:
        raise SpectralError("computed P is not positive definite")
    residual = float(np.linalg.norm(A2.T @ P + P @ A2 + Q, "fro"))
    return LyapunovSolution(P, residual)
