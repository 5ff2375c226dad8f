import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mqcwit.exact import FullDensityMatrix, full_to_symmetric_coeffs, symmetrize
from mqcwit.symmetric import SymmetricState, layout

settings.register_profile("default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_density(N, rng, rank=None):
    d = 2**N
    rank = d if rank is None else rank
    G = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = G @ G.conj().T
    return FullDensityMatrix(N, rho / np.trace(rho).real)


def random_pure_full(N, rng):
    psi = rng.normal(size=2**N) + 1j * rng.normal(size=2**N)
    return FullDensityMatrix.from_pure(N, psi / np.linalg.norm(psi))


def sym_from_full(rho: FullDensityMatrix) -> SymmetricState:
    """Symmetric-basis state of a permutation-invariant full matrix."""
    d = full_to_symmetric_coeffs(rho)
    lay = layout(rho.N)
    c = np.array([d[(z, p, m)] for p, m, z in zip(lay.n_plus, lay.n_minus, lay.n_z)])
    return SymmetricState(rho.N, c)


def random_symmetric_pair(N, rng):
    """A random permutation-invariant mixed state as (full, symmetric)."""
    full = symmetrize(random_density(N, rng, rank=3))
    return full, sym_from_full(full)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = {}


@pytest.fixture
def criterion(request, capsys):
    """``criterion(number, title, ok, detail)`` prints and records one PASS/FAIL line."""

    def record(number, title, ok, detail=""):
        line = f"ACCEPTANCE {number:2d} {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        request.config.stash[_ACCEPTANCE][number] = line
        with capsys.disabled():
            print("\n" + line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, {})
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
