"""Semidefinite feasibility: backend adapter, solution record and an
independent residual check.

The default backend hands the problem to ``cvxpy`` (Clarabel interior point).
Whatever a backend reports, a solution is only labelled ``Feasible`` after
:func:`verify_solution` has recomputed every equality residual and every
block's smallest eigenvalue from scratch.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, NamedTuple, Protocol, Sequence

import numpy as np
import scipy.sparse as sp

from .soscomp import SdpProblem

__all__ = [
    "FEAS_TOL",
    "PSD_TOL",
    "Status",
    "SdpSolution",
    "Residuals",
    "Backend",
    "CvxpyBackend",
    "solve",
    "verify_solution",
]

logger = logging.getLogger(__name__)

FEAS_TOL = 1e-7
PSD_TOL = 1e-8


class Status(str, Enum):
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class SdpSolution:
    status: Status
    psd_values: tuple[np.ndarray, ...]
    free_values: np.ndarray
    max_eq_residual: float = float("inf")
    min_psd_eig: float = float("-inf")
    diagnostic: str = ""
    backend_status: str = ""

    def to_json(self) -> dict:
        def num(x):
            return x if np.isfinite(x) else None

        return {
            "status": self.status.value,
            "free_values": [float(v) for v in self.free_values],
            "psd_values": [np.asarray(Q).tolist() for Q in self.psd_values],
            "max_eq_residual": num(self.max_eq_residual),
            "min_psd_eig": num(self.min_psd_eig),
            "diagnostic": self.diagnostic,
            "backend_status": self.backend_status,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, data: Mapping) -> SdpSolution:
        def num(x, default):
            return default if x is None else float(x)

        return cls(
            Status(data["status"]),
            tuple(np.array(Q, dtype=float).reshape(len(Q), len(Q)) for Q in data["psd_values"]),
            np.array(data["free_values"], dtype=float),
            num(data.get("max_eq_residual"), float("inf")),
            num(data.get("min_psd_eig"), float("-inf")),
            data.get("diagnostic", ""),
            data.get("backend_status", ""),
        )


class Residuals(NamedTuple):
    max_eq_residual: float
    min_psd_eig: float


def verify_solution(prob: SdpProblem, sol: SdpSolution) -> Residuals:
    """Recompute constraint residuals directly from the rows of ``prob``.

    This walks the constraint list term by term and reads block entries by
    ``(block, i, j)``; it shares no matrices with the backend.
    """
    if len(sol.free_values) != prob.free_vars:
        raise ValueError(
            f"solution has {len(sol.free_values)} free values, problem declares {prob.free_vars}"
        )
    if len(sol.psd_values) != len(prob.psd_blocks):
        raise ValueError("number of PSD values does not match the problem")
    lookup: list[float] = [float(v) for v in sol.free_values]
    for b, Q in zip(prob.psd_blocks, sol.psd_values):
        Q = np.asarray(Q, dtype=float)
        if Q.shape != (b.dim, b.dim):
            raise ValueError(f"block {b.role}: expected {b.dim}x{b.dim}, got {Q.shape}")
        for i in range(b.dim):
            for j in range(i, b.dim):
                lookup.append(float(Q[i, j]))

    worst = 0.0
    for row in prob.eq:
        acc = 0.0
        for vid, c in row.terms:
            acc += c * lookup[vid]
        worst = max(worst, abs(acc - row.rhs))

    min_eig = float("inf")
    for Q in sol.psd_values:
        Q = np.asarray(Q, dtype=float)
        if Q.size:
            sym = 0.5 * (Q + Q.T)
            min_eig = min(min_eig, float(np.linalg.eigvalsh(sym)[0]))
    return Residuals(float(worst), min_eig)


# -- backends ---------------------------------------------------------------------

@dataclass
class BackendResult:
    status: str  # "solved" | "infeasible" | "unknown"
    free_values: np.ndarray
    psd_values: list[np.ndarray]
    info: str = ""


class Backend(Protocol):
    def run(self, prob: SdpProblem, max_iter: int) -> BackendResult: ...


def constraint_matrix(prob: SdpProblem) -> tuple[sp.csr_matrix, np.ndarray]:
    rows, cols, vals = [], [], []
    for r, row in enumerate(prob.eq):
        for vid, c in row.terms:
            rows.append(r)
            cols.append(vid)
            vals.append(c)
    A = sp.csr_matrix((vals, (rows, cols)), shape=(len(prob.eq), prob.n_vars))
    b = np.array([row.rhs for row in prob.eq], dtype=float)
    return A, b


def _unpack(prob: SdpProblem, y: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    free = y[: prob.free_vars].copy()
    blocks = []
    for b, off in zip(prob.psd_blocks, prob.block_offsets()):
        iu = np.triu_indices(b.dim)
        Q = np.zeros((b.dim, b.dim))
        Q[iu] = y[off : off + b.n_entries]
        Q = Q + np.triu(Q, 1).T
        blocks.append(Q)
    return free, blocks


def _pack(prob: SdpProblem, free: np.ndarray, blocks: Sequence[np.ndarray]) -> np.ndarray:
    parts = [np.asarray(free, dtype=float)]
    for b, Q in zip(prob.psd_blocks, blocks):
        parts.append(np.asarray(Q)[np.triu_indices(b.dim)])
    return np.concatenate(parts) if parts else np.zeros(0)


@dataclass
class CvxpyBackend:
    """Solve through cvxpy with a conic solver (Clarabel by default)."""

    solver: str = "CLARABEL"
    solver_opts: dict = field(default_factory=dict)

    def run(self, prob: SdpProblem, max_iter: int) -> BackendResult:
        import cvxpy as cp

        A, b = constraint_matrix(prob)
        pieces, constraints, mats = [], [], []
        x = None
        if prob.free_vars:
            x = cp.Variable(prob.free_vars)
            pieces.append(x)
        for blk in prob.psd_blocks:
            X = cp.Variable((blk.dim, blk.dim), symmetric=True)
            constraints.append(X >> 0)
            mats.append(X)
            # pick the upper triangle (row-major) out of the column-major vec
            iu, ju = np.triu_indices(blk.dim)
            sel = sp.csr_matrix(
                (np.ones(len(iu)), (np.arange(len(iu)), ju * blk.dim + iu)),
                shape=(len(iu), blk.dim * blk.dim),
            )
            pieces.append(sel @ cp.vec(X, order="F"))
        allvars = cp.hstack(pieces) if len(pieces) > 1 else pieces[0]
        if A.shape[0]:
            constraints.append(A @ allvars == b)
        problem = cp.Problem(cp.Minimize(0), constraints)

        opts = dict(self.solver_opts)
        iter_key = {"CLARABEL": "max_iter", "CVXOPT": "max_iters", "SCS": "max_iters"}.get(self.solver)
        if iter_key:
            opts.setdefault(iter_key, max_iter)
        if self.solver == "CLARABEL":
            opts.setdefault("tol_feas", 1e-10)
            opts.setdefault("tol_gap_abs", 1e-10)
            opts.setdefault("tol_gap_rel", 1e-10)
        try:
            with warnings.catch_warnings():
                # inaccurate solutions are caught by verify_solution instead
                warnings.filterwarnings("ignore", message="Solution may be inaccurate")
                problem.solve(solver=self.solver, **opts)
        except cp.error.SolverError as exc:
            return BackendResult("unknown", np.zeros(prob.free_vars), [], f"solver error: {exc}")

        status = problem.status
        if status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            free = np.asarray(x.value, dtype=float) if x is not None else np.zeros(0)
            blocks = [np.asarray(X.value, dtype=float) for X in mats]
            return BackendResult("solved", free, blocks, status)
        if status == cp.INFEASIBLE:
            return BackendResult("infeasible", np.zeros(prob.free_vars), [], status)
        return BackendResult("unknown", np.zeros(prob.free_vars), [], status)


def _polish(prob: SdpProblem, free: np.ndarray, blocks: list[np.ndarray], rounds: int = 3):
    """Minimum-norm correction onto the equality constraints."""
    A, b = constraint_matrix(prob)
    if not A.shape[0]:
        return free, blocks
    y = _pack(prob, free, blocks)
    Ad = A.toarray()
    for _ in range(rounds):
        r = b - Ad @ y
        if np.max(np.abs(r)) < 1e-14:
            break
        delta, *_ = np.linalg.lstsq(Ad, r, rcond=None)
        y = y + delta
    return _unpack(prob, y)


def solve(
    prob: SdpProblem,
    feas_tol: float = FEAS_TOL,
    psd_tol: float = PSD_TOL,
    max_iter: int = 200,
    backend: Backend | None = None,
    polish: bool = True,
) -> SdpSolution:
    """Find a feasible point of ``prob`` or report why not.

    ``Feasible`` is returned only when the independently recomputed residuals
    meet ``feas_tol`` (equalities) and ``psd_tol`` (block eigenvalues).  A
    backend that claims success without meeting them yields ``Unknown``.
    """
    prob.check()
    backend = backend or CvxpyBackend()
    res = backend.run(prob, max_iter)
    empty = tuple(np.zeros((b.dim, b.dim)) for b in prob.psd_blocks)

    if res.status == "infeasible":
        return SdpSolution(Status.INFEASIBLE, empty, np.zeros(prob.free_vars),
                           diagnostic="backend reported primal infeasibility",
                           backend_status=res.info)
    if res.status != "solved":
        return SdpSolution(Status.UNKNOWN, empty, np.zeros(prob.free_vars),
                           diagnostic=f"backend could not decide: {res.info}",
                           backend_status=res.info)

    free, blocks = res.free_values, res.psd_values
    if polish:
        free, blocks = _polish(prob, free, blocks)
    sol = SdpSolution(Status.UNKNOWN, tuple(blocks), free, backend_status=res.info)
    check = verify_solution(prob, sol)
    ok = check.max_eq_residual <= feas_tol and check.min_psd_eig >= -psd_tol
    diag = "" if ok else (
        f"backend returned {res.info} but residuals fail: "
        f"eq {check.max_eq_residual:.3e} (tol {feas_tol:.1e}), "
        f"min eig {check.min_psd_eig:.3e} (tol {-psd_tol:.1e})"
    )
    if not ok:
        logger.info(diag)
    return replace(
        sol,
        status=Status.FEASIBLE if ok else Status.UNKNOWN,
        max_eq_residual=check.max_eq_residual,
        min_psd_eig=check.min_psd_eig,
        diagnostic=diag,
    )
