import numpy as np
import pytest

from rfprecode.problem import GlseProblem


def random_problem(rng, M, K, lam=0.1, rho=1.0, p_out=1.0) -> GlseProblem:
    H = (rng.standard_normal((M, K)) + 1j * rng.standard_normal((M, K))) / np.sqrt(2 * M)
    s = (rng.standard_normal(K) + 1j * rng.standard_normal(K)) / np.sqrt(2)
    return GlseProblem(H, s, rho, lam, p_out)


def random_spd(rng, n=None, scale=1.0):
    shape = () if n is None else (n,)
    A = rng.standard_normal(shape + (2, 2))
    return scale * (A @ np.swapaxes(A, -1, -2) + 0.1 * np.eye(2))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# verdict lines appended by the acceptance tests, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
