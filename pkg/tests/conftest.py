import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

SX = np.array([[0.0, 1.0], [1.0, 0.0]])
SY = np.array([[0.0, -1j], [1j, 0.0]])
SZ = np.array([[1.0, 0.0], [0.0, -1.0]])
DOWN = np.array([[0.0, 0.0], [0.0, 1.0]])


def site_op(op, k, n):
    """``op`` on site ``k`` (0-based from the left) of an ``n``-site chain."""
    out = np.ones((1, 1))
    for m in range(n):
        out = np.kron(out, op if m == k else np.eye(2))
    return out


def kron_hamiltonian(Delta, lam, beta, omega):
    """Spin chain Hamiltonian assembled from Pauli matrices."""
    n = len(omega)
    H = np.zeros((2**n, 2**n), dtype=complex)
    for k in range(n - 1):
        zz = site_op(SZ, k, n) @ site_op(SZ, k + 1, n)
        xx = site_op(SX, k, n) @ site_op(SX, k + 1, n)
        yy = site_op(SY, k, n) @ site_op(SY, k + 1, n)
        H += 0.25 * (np.eye(2**n) - zz) - (xx + yy) / (4 * Delta)
    for k in range(n):
        H += lam * omega[k] * site_op(DOWN, k, n)
    H += beta * (site_op(DOWN, 0, n) + site_op(DOWN, n - 1, n))
    assert np.abs(H.imag).max() == 0
    return H.real


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
