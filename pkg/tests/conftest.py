import numpy as np
import pytest

from qudit_witness.model import PureDephasingModel

_ACCEPTANCE = []


def random_hermitian(rng, d, scale=1.0):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (a + a.conj().T) / 2


def random_density(rng, d, rank=None):
    rank = d if rank is None else rank
    a = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def random_amplitudes(rng, n):
    c = rng.normal(size=n) + 1j * rng.normal(size=n)
    return c / np.linalg.norm(c)


def random_model(rng, n, d, scale=1.0):
    return PureDephasingModel(
        rng.normal(size=n),
        random_hermitian(rng, d, scale),
        [random_hermitian(rng, d, scale) for _ in range(n)],
    )


def bell_state():
    psi = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    return np.outer(psi, psi.conj())


@pytest.fixture
def rng():
    return np.random.default_rng(20201)


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""

    def record(number, name, passed, detail=""):
        _ACCEPTANCE.append((number, name, passed, detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, detail in sorted(_ACCEPTANCE, key=lambda r: str(r[0])):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {number}. {name} {detail}".rstrip())
