"""End-to-end local stability certification.

The pipeline is: classify the linearisation; if that is inconclusive, split
the system into center and stable coordinates, compile a partially quadratic
(or full) SOS search, solve it, map the Lyapunov function back to the
original coordinates and validate it numerically.  A ``StableSOS`` verdict
is only issued when the SDP residuals and the numerical validation both pass.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Sequence

import numpy as np
from scipy.stats import norm, qmc

from .poly import Poly, PolySystem, linear_substitute
from .sdp import FEAS_TOL, PSD_TOL, Backend, SdpSolution, Status, solve
from .soscomp import (
    DEFAULT_EPSILON,
    DEFAULT_P_SHIFT,
    DEFAULT_RADIUS,
    SdpProblem,
    assemble_v,
    compile_full,
    compile_partial,
)
from .spectral import Verdict, classify, default_tol, linearize
from .transform import SplitSystem, split_system

__all__ = [
    "CertVerdict",
    "Form",
    "Trajectory",
    "ValidationReport",
    "Certificate",
    "halton_ball",
    "integrate",
    "validate_lf",
    "certify",
    "split_system",
]

logger = logging.getLogger(__name__)

BLOWUP_NORM = 1e6
MONOTONE_RTOL = 1e-9


class CertVerdict(str, Enum):
    STABLE_FIRST_METHOD = "StableFirstMethod"
    UNSTABLE_FIRST_METHOD = "UnstableFirstMethod"
    STABLE_SOS = "StableSOS"
    NOT_CERTIFIED = "NotCertified"


class Form(str, Enum):
    FULL = "Full"
    PARTIAL = "Partial"
    NONE = "None"


# -- trajectories -------------------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    divergent: bool = False

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, i):
        return self.states[i]


def integrate(
    sys: PolySystem,
    x0: Sequence[float],
    t_end: float,
    h: float = 1e-2,
    blowup: float = BLOWUP_NORM,
) -> Trajectory:
    """Classical fixed-step RK4 from ``x0`` over ``[0, t_end]``.

    The last step is shortened so the trajectory ends exactly at ``t_end``.
    If the state norm exceeds ``blowup`` the trajectory is cut there and
    flagged divergent.
    """
    if h <= 0 or t_end <= 0:
        raise ValueError("step and horizon must be positive")
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (sys.n,):
        raise ValueError(f"initial state must have length {sys.n}")
    f = sys.evaluator()
    n_steps = int(np.ceil(t_end / h - 1e-9))
    times, states = [0.0], [x.copy()]
    t = 0.0
    for step in range(n_steps):
        dt = h if step < n_steps - 1 else t_end - step * h
        k1 = f(x)
        k2 = f(x + 0.5 * dt * k1)
        k3 = f(x + 0.5 * dt * k2)
        k4 = f(x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = (step + 1) * h if step < n_steps - 1 else t_end
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > blowup:
            return Trajectory(np.array(times), np.array(states), divergent=True)
        times.append(t)
        states.append(x.copy())
    return Trajectory(np.array(times), np.array(states))


# -- validation ---------------------------------------------------------------------

def halton_ball(n: int, count: int, R: float) -> np.ndarray:
    """Deterministic low-discrepancy points in the open ball of radius ``R``."""
    sampler = qmc.Halton(d=n + 1, scramble=False)
    sampler.fast_forward(1)  # the first Halton point is the zero vector
    out: list[np.ndarray] = []
    have = 0
    while have < count:
        u = np.clip(sampler.random(count - have + 8), 1e-12, 1 - 1e-12)
        g = norm.ppf(u[:, :n])
        gn = np.linalg.norm(g, axis=1)
        # directions through u = 1/2 in every coordinate are undefined
        keep = gn > 1e-12
        pts = g[keep] / gn[keep, None] * (R * u[keep, n] ** (1.0 / n))[:, None]
        out.append(pts)
        have += len(pts)
    return np.concatenate(out)[:count]


@dataclass(frozen=True)
class TrajectoryCheck:
    x0: tuple[float, ...]
    monotone: bool
    divergent: bool


@dataclass(frozen=True)
class ValidationReport:
    R: float
    n_samples: int
    exclusion_radius: float
    min_V_off_origin: float
    max_Vdot_off_origin: float
    trajectory_checks: tuple[TrajectoryCheck, ...] = ()

    @property
    def passed(self) -> bool:
        return self.min_V_off_origin > 0 and self.max_Vdot_off_origin < 0

    @property
    def trajectories_ok(self) -> bool:
        return all(c.monotone and not c.divergent for c in self.trajectory_checks)

    def to_json(self) -> dict:
        return {
            "R": self.R,
            "n_samples": self.n_samples,
            "exclusion_radius": self.exclusion_radius,
            "min_V_off_origin": _num(self.min_V_off_origin),
            "max_Vdot_off_origin": _num(self.max_Vdot_off_origin),
            "passed": self.passed,
            "trajectory_checks": [
                {"x0": list(c.x0), "monotone": c.monotone, "divergent": c.divergent}
                for c in self.trajectory_checks
            ],
        }


def _num(x: float | None) -> float | None:
    # JSON has no inf/nan
    return None if x is None or not np.isfinite(x) else float(x)


def lie_derivative(V: Poly, sys: PolySystem, X: np.ndarray) -> np.ndarray:
    """``grad(V) . f`` evaluated at the rows of ``X``."""
    F = sys.eval_many(X)
    return sum(g.eval_many(X) * F[:, i] for i, g in enumerate(V.gradient()))


def validate_lf(
    V: Poly,
    sys: PolySystem,
    R: float,
    n_samples: int = 20_000,
    exclusion_radius: float | None = None,
    n_trajectories: int = 8,
    t_end: float = 10.0,
    h: float = 1e-2,
) -> ValidationReport:
    """Sample ``V`` and its derivative along ``f`` over the ball ``B_R``.

    Points closer to the origin than ``exclusion_radius`` (default
    ``R * 1e-3``) are skipped since both conditions vanish there.  In
    addition ``n_trajectories`` RK4 trajectories started on the sphere of
    radius ``R / 2`` are checked for a non-increasing ``V``.
    """
    if V.n != sys.n:
        raise ValueError("V and the system must have the same dimension")
    if exclusion_radius is None:
        exclusion_radius = R * 1e-3
    if not 0 < exclusion_radius < R:
        raise ValueError("need 0 < exclusion_radius < R")
    X = halton_ball(sys.n, n_samples, R)
    X = X[np.linalg.norm(X, axis=1) >= exclusion_radius]
    v = V.eval_many(X)
    vdot = lie_derivative(V, sys, X)

    checks = []
    starts = halton_ball(sys.n, n_trajectories, 1.0)
    starts = starts / np.linalg.norm(starts, axis=1, keepdims=True) * (R / 2)
    for x0 in starts:
        traj = integrate(sys, x0, t_end, h)
        vals = V.eval_many(traj.states)
        steps = np.diff(vals)
        slack = MONOTONE_RTOL * (1.0 + np.abs(vals[:-1]))
        checks.append(TrajectoryCheck(tuple(float(c) for c in x0),
                                      bool(np.all(steps <= slack)), traj.divergent))

    return ValidationReport(
        R=R,
        n_samples=int(len(X)),
        exclusion_radius=exclusion_radius,
        min_V_off_origin=float(v.min()) if len(v) else float("nan"),
        max_Vdot_off_origin=float(vdot.max()) if len(vdot) else float("nan"),
        trajectory_checks=tuple(checks),
    )


# -- the pipeline -------------------------------------------------------------------

@dataclass(frozen=True)
class Certificate:
    verdict: CertVerdict
    form: Form
    V: Poly | None = None
    gram_witnesses: dict[str, np.ndarray] = field(default_factory=dict)
    params: dict[str, Any] = field(default_factory=dict)
    validation: ValidationReport | None = None
    max_eq_residual: float | None = None
    min_psd_eig: float | None = None
    eigenvalues: tuple[complex, ...] = ()
    k: int = 0
    diagnostics: tuple[str, ...] = ()
    #: ``V`` in the coordinates the SDP was solved in, and ``z = T x``
    V_split: Poly | None = None
    T: np.ndarray | None = None

    @property
    def is_stable(self) -> bool:
        return self.verdict in (CertVerdict.STABLE_FIRST_METHOD, CertVerdict.STABLE_SOS)

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "form": self.form.value,
            "V": None if self.V is None else {"n": self.V.n, "terms": self.V.to_json()},
            "params": {k: float(v) if isinstance(v, np.floating) else v for k, v in self.params.items()},
            "k": self.k,
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "validation": None if self.validation is None else self.validation.to_json(),
            "sdp": {"max_eq_residual": _num(self.max_eq_residual),
                    "min_psd_eig": _num(self.min_psd_eig)},
            "gram_witnesses": {r: np.asarray(Q).tolist() for r, Q in self.gram_witnesses.items()},
            "diagnostics": list(self.diagnostics),
            "T": None if self.T is None else np.asarray(self.T).tolist(),
        }

    def dumps(self, **kw) -> str:
        return json.dumps(self.to_json(), **kw)


def _attempt(
    form: Form,
    sys: PolySystem,
    split: SplitSystem,
    d: int,
    R: float,
    eps: float,
    feas_tol: float,
    psd_tol: float,
    backend: Backend | None,
    p_shift: float,
) -> tuple[SdpProblem, SdpSolution, Poly | None, Poly | None]:
    if form is Form.PARTIAL:
        prob = compile_partial(split, d, R, eps, p_shift=p_shift)
    else:
        prob = compile_full(sys, d, R, eps)
    sol = solve(prob, feas_tol=feas_tol, psd_tol=psd_tol, backend=backend)
    if sol.status is not Status.FEASIBLE:
        return prob, sol, None, None
    Vz = assemble_v(prob, sol.free_values, sol.psd_values)
    V = Vz
    if form is Form.PARTIAL and not np.array_equal(split.T, np.eye(split.n)):
        # V_x(x) = V_z(T x)
        V = linear_substitute(Vz, split.T)
    return prob, sol, V, Vz


def certify(
    sys: PolySystem,
    d: int = 2,
    R: float = DEFAULT_RADIUS,
    eps: float = DEFAULT_EPSILON,
    form: str | Form = "auto",
    tol: float | None = None,
    feas_tol: float = FEAS_TOL,
    psd_tol: float = PSD_TOL,
    backend: Backend | None = None,
    n_samples: int = 20_000,
    p_shift: float = DEFAULT_P_SHIFT,
) -> Certificate:
    """Decide local asymptotic stability of the origin of ``sys``.

    ``form`` is ``"auto"``, ``"full"`` or ``"partial"``.  Under ``auto`` the
    partially quadratic search runs first and the full search is tried if it
    does not produce a feasible point.
    """
    A = linearize(sys)
    tol = default_tol(A) if tol is None else tol
    spec = classify(A, tol)
    params = {"d": d, "R": R, "epsilon": eps, "tol": tol}
    base = dict(params=params, eigenvalues=spec.eigenvalues)
    if spec.verdict is Verdict.STABLE:
        return Certificate(CertVerdict.STABLE_FIRST_METHOD, Form.NONE, **base)
    if spec.verdict is Verdict.UNSTABLE:
        return Certificate(CertVerdict.UNSTABLE_FIRST_METHOD, Form.NONE, **base)

    split = split_system(sys, tol)
    key = form.value if isinstance(form, Form) else str(form).lower()
    if key == "auto":
        plan = [Form.PARTIAL, Form.FULL] if split.k >= 1 else [Form.FULL]
    elif key == "partial":
        plan = [Form.PARTIAL]
    elif key == "full":
        plan = [Form.FULL]
    else:
        raise ValueError(f"unknown form {form!r}")

    diagnostics: list[str] = []
    last: Certificate | None = None
    for which in plan:
        prob, sol, V, Vz = _attempt(which, sys, split, d, R, eps, feas_tol, psd_tol, backend, p_shift)
        witnesses = {b.role: Q for b, Q in zip(prob.psd_blocks, sol.psd_values)}
        common = dict(
            base, k=split.k, gram_witnesses=witnesses,
            max_eq_residual=sol.max_eq_residual, min_psd_eig=sol.min_psd_eig,
            T=split.T if which is Form.PARTIAL else np.eye(split.n),
        )
        if V is None:
            diagnostics.append(f"{which.value}: SDP {sol.status.value}. {sol.diagnostic}".strip())
            last = Certificate(CertVerdict.NOT_CERTIFIED, which, diagnostics=tuple(diagnostics), **common)
            continue
        # the partial search holds on the z-ball of radius R, which contains
        # the x-ball of radius R / ||T||
        R_x = R / np.linalg.norm(split.T, 2) if which is Form.PARTIAL else R
        report = validate_lf(V, sys, R_x, n_samples=n_samples)
        if report.passed and report.trajectories_ok:
            return Certificate(CertVerdict.STABLE_SOS, which, V, validation=report,
                               diagnostics=tuple(diagnostics), V_split=Vz, **common)
        diagnostics.append(
            f"{which.value}: SDP feasible but validation failed "
            f"(min V {report.min_V_off_origin:.3e}, max dV {report.max_Vdot_off_origin:.3e}, "
            f"trajectories ok: {report.trajectories_ok})"
        )
        last = Certificate(CertVerdict.NOT_CERTIFIED, which, V, validation=report,
                           diagnostics=tuple(diagnostics), V_split=Vz, **common)
        if key == "auto":
            # a feasible but unvalidated partial result does not trigger the fallback
            break
    assert last is not None
    return last
