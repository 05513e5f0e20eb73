import json

import numpy as np
import pytest
import sympy as sp

from pqlyap import (
    CertVerdict,
    Form,
    Poly,
    PolySystem,
    certify,
    classify,
    halton_ball,
    integrate,
    validate_lf,
)
from pqlyap.certify import lie_derivative
from pqlyap.sdp import FEAS_TOL, PSD_TOL

from conftest import random_center_system


def _linear(A):
    n = A.shape[0]
    x = [Poly.variable(n, j) for j in range(n)]
    return PolySystem([sum((A[i, j] * x[j] for j in range(n)), Poly.zero(n)) for i in range(n)])


# -- integration ------------------------------------------------------------------

def test_rk4_exponential():
    traj = integrate(_linear(np.array([[-1.0]])), [1.0], 1.0, h=0.01)
    assert traj.times[-1] == 1.0
    assert abs(traj.states[-1, 0] - np.exp(-1.0)) <= 1e-6


def test_rk4_cubic_decay(cubic):
    traj = integrate(cubic, [1.0], 4.0, h=0.01)
    assert abs(traj.states[-1, 0] - 1.0 / 3.0) <= 1e-5


def test_rk4_starts_at_initial_state(illustrative):
    traj = integrate(illustrative, [0.1, -0.2], 0.5)
    np.testing.assert_array_equal(traj[0], [0.1, -0.2])
    assert len(traj) == 51


def test_rk4_zero_field_is_constant():
    x = Poly.variable(2, 0)
    traj = integrate(PolySystem([0.0 * x, 0.0 * x]), [0.3, 0.4], 1.0)
    assert np.all(traj.states == [0.3, 0.4])


def test_rk4_flags_blow_up():
    x = Poly.variable(1, 0)
    traj = integrate(PolySystem([x * x]), [1.0], 5.0, h=0.01)
    assert traj.divergent
    # exact solution 1 / (1 - t) blows up at t = 1
    assert traj.times[-1] <= 1.0 + 1e-9


def test_rk4_rejects_bad_step(cubic):
    with pytest.raises(ValueError):
        integrate(cubic, [1.0], 1.0, h=0.0)


# -- sampling and validation ------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_halton_ball_points(n):
    X = halton_ball(n, 500, 0.3)
    assert X.shape == (500, n)
    assert np.all(np.isfinite(X))
    assert np.all(np.linalg.norm(X, axis=1) < 0.3)
    np.testing.assert_array_equal(X, halton_ball(n, 500, 0.3))


def test_halton_ball_fills_the_ball():
    X = halton_ball(2, 4000, 1.0)
    r = np.linalg.norm(X, axis=1)
    # uniform in area: half the points inside radius 1/sqrt(2)
    assert abs(np.mean(r < 1 / np.sqrt(2)) - 0.5) < 0.02
    assert abs(np.mean(X[:, 0] > 0) - 0.5) < 0.02


def test_lie_derivative_closed_form(illustrative, illustrative_v):
    x1, x2 = sp.symbols("x1 x2")
    V = x1**4 / 4 + (x2 - x1**2) ** 2 / 2
    f = [-x1 * x2, -x2 + x1**2 - 2 * x2**2]
    vdot = sp.expand(sp.diff(V, x1) * f[0] + sp.diff(V, x2) * f[1])
    u = x2 - x1**2
    closed = -(x1**6) + x1**4 * u + 2 * x1**2 * u**2 - u**2 - 2 * u * x2**2
    assert sp.expand(vdot - closed) == 0
    X = np.random.default_rng(0).uniform(-0.3, 0.3, (50, 2))
    ref = sp.lambdify((x1, x2), vdot, "numpy")(X[:, 0], X[:, 1])
    np.testing.assert_allclose(lie_derivative(illustrative_v, illustrative, X), ref, atol=1e-15)


def test_analytic_function_validates(illustrative, illustrative_v):
    rep = validate_lf(illustrative_v, illustrative, 0.3)
    assert rep.passed and rep.trajectories_ok
    assert rep.max_Vdot_off_origin < 0 < rep.min_V_off_origin
    assert len(rep.trajectory_checks) == 8


def test_quadratic_on_linear_decay():
    sys = _linear(-np.eye(2))
    V = Poly.variable(2, 0) ** 2 + Poly.variable(2, 1) ** 2
    rep = validate_lf(V, sys, 1.0, n_samples=2000)
    assert rep.passed
    X = halton_ball(2, 100, 1.0)
    np.testing.assert_allclose(lie_derivative(V, sys, X), -2 * np.sum(X**2, axis=1), atol=1e-15)


def test_negative_function_fails(illustrative):
    V = -(Poly.variable(2, 0) ** 2 + Poly.variable(2, 1) ** 2)
    rep = validate_lf(V, illustrative, 0.1, n_samples=2000)
    assert not rep.passed
    assert rep.min_V_off_origin < 0


def test_validate_rejects_bad_exclusion(illustrative, illustrative_v):
    with pytest.raises(ValueError):
        validate_lf(illustrative_v, illustrative, 0.1, exclusion_radius=0.2)


# -- the pipeline -----------------------------------------------------------------

def test_first_method_short_circuits():
    x = Poly.variable(1, 0)
    assert certify(PolySystem([x])).verdict is CertVerdict.UNSTABLE_FIRST_METHOD
    cert = certify(PolySystem([-x]))
    assert cert.verdict is CertVerdict.STABLE_FIRST_METHOD
    assert cert.form is Form.NONE and cert.V is None


@pytest.mark.parametrize("form", ["partial", "full", "auto"])
def test_illustrative_certified(illustrative, form):
    cert = certify(illustrative, d=2, R=0.1, eps=0.1, form=form)
    assert cert.verdict is CertVerdict.STABLE_SOS
    assert cert.max_eq_residual <= FEAS_TOL and cert.min_psd_eig >= -PSD_TOL
    assert cert.validation.passed and cert.validation.trajectories_ok
    if form != "full":
        assert cert.form is Form.PARTIAL
        # quadratic in x2
        assert max(m[1] for m, _ in cert.V.items()) <= 2


def test_cubic_certified(cubic):
    cert = certify(cubic, d=2)
    assert cert.verdict is CertVerdict.STABLE_SOS


def test_unstable_center_is_not_certified():
    x = Poly.variable(1, 0)
    cert = certify(PolySystem([x**3]), d=2)
    assert cert.verdict is CertVerdict.NOT_CERTIFIED
    assert cert.diagnostics


def test_certificate_json(illustrative):
    cert = certify(illustrative, d=2)
    data = json.loads(cert.dumps())
    assert data["verdict"] == "StableSOS"
    assert data["form"] == "Partial"
    V = Poly.from_json(2, data["V"]["terms"])
    assert V == cert.V
    assert data["validation"]["passed"] is True
    assert set(data["gram_witnesses"]) == {"P", "s1", "s2", "s3"}


def test_not_certified_json_is_strict():
    x = Poly.variable(1, 0)
    text = certify(PolySystem([x**3])).dumps()
    json.loads(text, parse_constant=lambda c: pytest.fail(f"non-finite {c}"))


def test_unknown_form_rejected(illustrative):
    with pytest.raises(ValueError):
        certify(illustrative, form="quadratic")


@pytest.mark.parametrize("seed", range(12))
def test_soundness_on_random_systems(seed):
    sys = random_center_system(seed)
    cert = certify(sys, d=2, R=0.1, eps=0.1)
    if cert.verdict is not CertVerdict.STABLE_SOS:
        return
    rep = cert.validation
    assert rep.passed and rep.trajectories_ok
    assert cert.max_eq_residual <= FEAS_TOL and cert.min_psd_eig >= -PSD_TOL
    # independent pseudo-random resampling of the validated ball
    rng = np.random.default_rng(seed)
    X = rng.uniform(-rep.R, rep.R, (4000, sys.n))
    r = np.linalg.norm(X, axis=1)
    X = X[(r < rep.R) & (r >= rep.exclusion_radius)]
    assert cert.V.eval_many(X).min() > 0
    assert lie_derivative(cert.V, sys, X).max() < 0


@pytest.mark.parametrize("seed", range(6))
def test_coordinate_change_consistency(seed):
    for s in range(seed, 200, 6):
        sys = random_center_system(s)
        cert = certify(sys, d=2, form="partial") if sys.n > 1 else None
        if cert is not None and cert.V is not None and not np.allclose(cert.T, np.eye(sys.n)):
            break
    else:
        pytest.skip("no transformed certificate in range")
    X = np.random.default_rng(seed).uniform(-0.1, 0.1, (50, sys.n))
    for x in X:
        assert abs(cert.V(x) - cert.V_split(cert.T @ x)) <= 1e-9


@pytest.mark.parametrize("seed", range(25))
def test_first_method_agrees_with_eigenvalues(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    A = rng.standard_normal((n, n))
    cert = certify(_linear(A))
    re = np.linalg.eigvals(A).real
    if np.all(re < 0):
        assert cert.verdict is CertVerdict.STABLE_FIRST_METHOD
    else:
        assert np.any(re > 0)
        assert cert.verdict is CertVerdict.UNSTABLE_FIRST_METHOD
    assert classify(A).n_pos == int(np.sum(re > 0))
