import numpy as np
import pytest

from advids.nn import init_network

ACCEPTANCE_LINES = []


def random_net(rng, sizes, scale=1.0):
    net = init_network(sizes, int(rng.integers(2**31)))
    for w, b in zip(net.weights, net.biases):
        w *= scale * np.sqrt(w.shape[1])  # roughly unit-variance weights
        b[:] = rng.normal(scale=0.3, size=b.shape)
    return net


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_synth():
    from advids.data import SynthConfig, split, synth_generate

    return split(synth_generate(SynthConfig(6, 150, 150, 6.0, 1.0, seed=11)), seed=11)
