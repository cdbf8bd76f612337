import numpy as np
import pytest

from multirail import ChainSpec, build_chain, spectrum


def random_chain(rng, N, model=None, min_coupling=0.1, field_scale=0.5):
    """Open chain with random couplings of random sign and random fields."""
    model = model or rng.choice(["xy", "heisenberg"])
    J = rng.uniform(min_coupling, 1.5, N - 1) * rng.choice([-1, 1], N - 1)
    B = rng.normal(0, field_scale, N)
    return ChainSpec(N, str(model), tuple(J), tuple(B))


def spectrum_of(spec):
    return spectrum(build_chain(spec))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def xy3():
    return spectrum_of(ChainSpec.uniform(3, "xy"))


@pytest.fixture
def xy2():
    return spectrum_of(ChainSpec.uniform(2, "xy"))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
