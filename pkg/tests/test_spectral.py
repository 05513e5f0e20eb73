import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from pqlyap import (
    Poly,
    PolySystem,
    SpectralError,
    UnstableSpectrumError,
    Verdict,
    block_diagonalize,
    classify,
    linearize,
    solve_lyapunov,
    split_system,
)
from pqlyap.transform import transform_field

from conftest import random_hurwitz


def test_linearize_illustrative(illustrative):
    A = linearize(illustrative)
    assert A.tolist() == [[0.0, 0.0], [0.0, -1.0]]


def test_classify_examples():
    assert classify(np.array([[0.0, 0.0], [0.0, -1.0]])).verdict is Verdict.INCONCLUSIVE
    assert classify(-np.eye(3)).verdict is Verdict.STABLE
    assert classify(np.array([[1.0]])).verdict is Verdict.UNSTABLE
    c = classify(np.array([[0.0, 1.0], [-1.0, 0.0]]))
    assert (c.n_zero, c.n_neg, c.n_pos) == (2, 0, 0)


def test_lyapunov_scalar():
    sol = solve_lyapunov(np.array([[-1.0]]), np.array([[1.0]]))
    assert abs(sol.P[0, 0] - 0.5) <= 1e-12


def test_lyapunov_against_kronecker_solve():
    A = np.array([[-1.0, 1.0], [0.0, -2.0]])
    Q = np.eye(2)
    # vec(A^T P + P A) = (I kron A^T + A^T kron I) vec(P)
    K = np.kron(np.eye(2), A.T) + np.kron(A.T, np.eye(2))
    P_ref = np.linalg.solve(K, -Q.reshape(-1, order="F")).reshape(2, 2, order="F")
    np.testing.assert_allclose(solve_lyapunov(A, Q).P, P_ref, atol=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_lyapunov_random_hurwitz(seed):
    rng = np.random.default_rng(seed)
    m = rng.integers(1, 11)
    A = random_hurwitz(rng, m)
    sol = solve_lyapunov(A)
    R = A.T @ sol.P + sol.P @ A + np.eye(m)
    assert np.max(np.abs(R)) <= 1e-8
    assert np.linalg.eigvalsh(sol.P).min() > 0


def test_lyapunov_rejects_non_hurwitz():
    with pytest.raises(SpectralError):
        solve_lyapunov(np.array([[0.0]]))


def _planted(rng, k, s):
    # skew center block (imaginary-axis spectrum) plus a Hurwitz block
    S = rng.standard_normal((k, k))
    C = S - S.T
    H = random_hurwitz(rng, s)
    M = rng.standard_normal((k + s, k + s)) + 3 * np.eye(k + s)
    return M @ sla.block_diag(C, H) @ np.linalg.inv(M)


@pytest.mark.parametrize("seed", range(15))
def test_block_split_reconstructs(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 4))
    s = int(rng.integers(1, 4))
    A = _planted(rng, k, s)
    split = block_diagonalize(A)
    assert split.k == k
    D = split.block_matrix()
    rel = np.linalg.norm(split.T_inv @ D @ split.T - A) / np.linalg.norm(A)
    assert rel <= 1e-8
    # block structure and spectrum placement
    assert np.all(np.abs(np.linalg.eigvals(split.A1).real) <= 1e-8)
    assert np.all(np.linalg.eigvals(split.A2).real < 0)
    ev = np.linalg.eigvals(A)
    ev_split = np.concatenate([np.linalg.eigvals(split.A1), np.linalg.eigvals(split.A2)])
    dist = np.abs(ev[:, None] - ev_split[None, :])
    assert dist.min(axis=1).max() <= 1e-7 and dist.min(axis=0).max() <= 1e-7


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_classification_is_similarity_invariant(seed):
    rng = np.random.default_rng(seed)
    A = _planted(rng, 1, 2)
    M = rng.standard_normal((3, 3)) + 3 * np.eye(3)
    B = M @ A @ np.linalg.inv(M)
    a, b = classify(A), classify(B, tol=1e-8)
    assert (a.n_zero, a.n_neg, a.n_pos) == (b.n_zero, b.n_neg, b.n_pos)


def test_block_split_identity_fast_path(illustrative):
    split = block_diagonalize(linearize(illustrative))
    assert np.array_equal(split.T, np.eye(2))
    assert split.A1.tolist() == [[0.0]] and split.A2.tolist() == [[-1.0]]


def test_block_split_no_center():
    split = block_diagonalize(-np.eye(2))
    assert split.k == 0 and split.A1.shape == (0, 0)


def test_block_split_rejects_unstable():
    with pytest.raises(UnstableSpectrumError, match="UnstableSpectrum"):
        block_diagonalize(np.diag([0.0, 1.0]))


def test_transformed_field_is_conjugate(illustrative):
    rng = np.random.default_rng(3)
    T = rng.standard_normal((2, 2)) + 2 * np.eye(2)
    g = transform_field(illustrative, T)
    z = np.array([0.2, -0.1])
    np.testing.assert_allclose(g(z), T @ illustrative(np.linalg.solve(T, z)), atol=1e-12)


def test_split_system_removes_linear_coupling():
    x, y = Poly.variable(2, 0), Poly.variable(2, 1)
    sys = PolySystem([-(x * x) + 0.0 * y, x - y + x * y])
    split = split_system(sys)
    assert split.k == 1
    for gi in split.g:
        assert all(sum(m) >= 2 for m, _ in gi.items())
    np.testing.assert_allclose(linearize(split.field), split.split.block_matrix(), atol=1e-12)
