import numpy as np
import pytest

from pqlyap import Poly, PolySystem


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, config):
    if config.acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(config.acceptance_lines):
            terminalreporter.write_line(line)


def var(n, i):
    return Poly.variable(n, i)


@pytest.fixture
def illustrative():
    """x1' = -x1 x2, x2' = -x2 + x1^2 - 2 x2^2 (center manifold x2 = x1^2)."""
    x1, x2 = var(2, 0), var(2, 1)
    return PolySystem([-(x1 * x2), -x2 + x1 * x1 - 2.0 * x2 * x2])


@pytest.fixture
def illustrative_v():
    """Analytic Lyapunov function x1^4/4 + (x2 - x1^2)^2 / 2."""
    x1, x2 = var(2, 0), var(2, 1)
    return 0.25 * x1**4 + 0.5 * (x2 - x1 * x1) ** 2


@pytest.fixture
def cubic():
    return PolySystem([-(var(1, 0) ** 3)])


def random_hurwitz(rng, m):
    """Random matrix shifted so every eigenvalue has real part <= -0.1."""
    M = rng.standard_normal((m, m))
    shift = np.max(np.linalg.eigvals(M).real) + 0.1 + rng.uniform(0, 1)
    return M - shift * np.eye(m)


def random_center_system(seed):
    """Random polynomial system with an imaginary-axis eigenvalue at the origin.

    A one-dimensional center direction with a cubic damping term of random
    sign is coupled to a Hurwitz block through random quadratic terms, then
    everything is conjugated by a random well-conditioned matrix.
    """
    from pqlyap import Poly, PolySystem
    from pqlyap.transform import transform_field

    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    z = [Poly.variable(n, i) for i in range(n)]
    A2 = random_hurwitz(rng, n - 1) if n > 1 else np.zeros((0, 0))
    f = []
    center = rng.choice([-1.0, -1.0, -1.0, 1.0]) * rng.uniform(0.5, 1.5) * z[0] ** 3
    for j in range(1, n):
        center = center + rng.uniform(-0.5, 0.5) * z[0] * z[j]
    f.append(center)
    for i in range(1, n):
        row = Poly.zero(n)
        for j in range(1, n):
            row = row + A2[i - 1, j - 1] * z[j]
        row = row + rng.uniform(-1, 1) * z[0] * z[0] + rng.uniform(-0.5, 0.5) * z[i] * z[0]
        f.append(row)
    sys = PolySystem(f)
    if n > 1 and rng.uniform() < 0.5:
        T = np.eye(n) + 0.3 * rng.standard_normal((n, n))
        sys = transform_field(sys, T)
    return sys
