import numpy as np
import pytest

from dfmnet import kernels
from dfmnet.model import DFMNet, ModelConfig, build_manifest
from dfmnet.weights import init_random


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    """Run a test once per available kernel backend."""
    previous = kernels.backend_name()
    kernels.set_backend(request.param)
    yield request.param
    kernels.set_backend(previous)


@pytest.fixture(scope="session")
def manifest():
    return build_manifest(ModelConfig())


@pytest.fixture(scope="session")
def weights(manifest):
    return init_random(manifest, 42)


@pytest.fixture(scope="session")
def net(weights):
    return DFMNet(weights, ModelConfig())


@pytest.fixture(scope="session")
def inputs():
    rng = np.random.default_rng(7)
    rgb = rng.standard_normal((1, 3, 256, 256)).astype(np.float32)
    depth = rng.standard_normal((1, 1, 256, 256)).astype(np.float32)
    return rgb, depth


@pytest.fixture(scope="session")
def output(net, inputs):
    return net.forward(*inputs)


_ACCEPTANCE: list = []


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion; call with (number, title, passed, detail)."""

    def record(number, title, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title}" + (f" | {detail}" if detail else "")
        _ACCEPTANCE.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE, key=lambda t: t[0]):
        terminalreporter.write_line(line)
