import numpy as np
import pytest

from finprec.channel import exp_correlation, identity_stats, make_stats
from finprec.constellation import make_constellation


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def bpsk():
    return make_constellation("BPSK")


@pytest.fixture(scope="session")
def qpsk():
    return make_constellation("QPSK")


@pytest.fixture(scope="session")
def qam16():
    return make_constellation("QAM16")


@pytest.fixture(scope="session")
def corr4():
    return make_stats(exp_correlation(4, 0.9), exp_correlation(4, 0.9))


@pytest.fixture(scope="session")
def iid4():
    return identity_stats(4, 4)


def random_unitary(rng, n):
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_correlation(rng, n):
    """Random complex correlation matrix (Hermitian PSD, unit diagonal)."""
    z = rng.standard_normal((n, n + 1)) + 1j * rng.standard_normal((n, n + 1))
    a = z @ z.conj().T
    d = 1.0 / np.sqrt(np.real(np.diag(a)))
    return d[:, None] * a * d[None, :]


def pytest_terminal_summary(terminalreporter):
    lines = []
    for reports in terminalreporter.stats.values():
        for rep in reports:
            for key, value in getattr(rep, "user_properties", []):
                if key == "acceptance" and getattr(rep, "when", None) == "call":
                    lines.append(value)
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
