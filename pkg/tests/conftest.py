import numpy as np
import pytest

from evonet.network import EvolvingNetwork, HiddenLayer, OutputLayer

ACCEPTANCE_LINES: list[str] = []


def random_net(rng, n, widths, m, mode="regression", scale=1.0):
    layers = []
    fan_in = n
    for w in widths:
        layers.append(HiddenLayer(rng.normal(0, scale, (fan_in, w)), rng.normal(0, scale, w)))
        fan_in = w
    head = OutputLayer(rng.normal(0, scale, (fan_in, m)), rng.normal(0, scale, m))
    return EvolvingNetwork(layers, head, mode, np.random.default_rng(0))


def explicit_params(net):
    return ([l.W.tolist() for l in net.layers], [l.b.tolist() for l in net.layers],
            net.head.W.tolist(), net.head.c.tolist())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
