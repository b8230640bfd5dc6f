import numpy as np
import pytest

from modtandem.exact import solve_pn
from modtandem.harmonic import assemble_haK
from modtandem.model import ModelParams, reference_model
from modtandem.roots import build_root_catalog


def random_stable_instance(rng, size):
    """Strictly tridiagonal P with lam < mu2 < mu1 in every regime.

    This class satisfies the real-simple spectrum condition and the
    conjugate-below-one condition by construction.
    """
    P = np.zeros((size, size))
    for i in range(size):
        for j in (i - 1, i, i + 1):
            if 0 <= j < size:
                P[i, j] = rng.uniform(0.2, 1.0)
    P /= P.sum(axis=1, keepdims=True)
    lam = rng.uniform(0.05, 0.2, size)
    mu2 = rng.uniform(0.3, 0.45, size)
    return ModelParams(P, lam, 1 - lam - mu2, mu2)


def random_instances(count, seed=2024):
    rng = np.random.default_rng(seed)
    return [random_stable_instance(rng, int(rng.integers(1, 4))) for _ in range(count)]


@pytest.fixture(scope="session")
def ref():
    return reference_model()


@pytest.fixture(scope="session")
def scalar():
    return ModelParams([[1.0]], [0.2], [0.3], [0.5])


@pytest.fixture(scope="session")
def ref_catalog(ref):
    return build_root_catalog(ref, 5, 0.7)


@pytest.fixture(scope="session")
def scalar_catalog(scalar):
    return build_root_catalog(scalar, 0, 0.7)


@pytest.fixture(scope="session")
def ref_haK(ref, ref_catalog):
    return assemble_haK(ref, ref_catalog)


@pytest.fixture(scope="session")
def ref_p60(ref):
    return solve_pn(ref, 60, 1e-12)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
