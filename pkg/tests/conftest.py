import numpy as np
import pytest

from batchgrad.objectives import StronglyConvexQuadratic, make_quadratic_logsumexp

# filled by test_acceptance: criterion number -> (passed, detail)
ACCEPTANCE_RESULTS = {}


@pytest.fixture(scope="session")
def qlse_small():
    """d = 10, cond = 10 quadratic + log-sum-exp objective."""
    return make_quadratic_logsumexp(10, 10.0, seed=1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def identity_quadratic(d, theta_star=None):
    """J = 0.5 ||x - x*||^2, so grad J(x) = x - x*."""
    x_star = np.zeros(d) if theta_star is None else np.asarray(theta_star, dtype=float)
    return StronglyConvexQuadratic(np.eye(d), x_star)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
