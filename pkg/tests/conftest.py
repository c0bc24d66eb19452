import os

import numpy as np
import pytest

from labelbridge.substrate import kernels

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")

AVAILABLE_BACKENDS = ["python"] + (["cython"] if kernels.compiled_backend is not None else [])


@pytest.fixture(params=AVAILABLE_BACKENDS)
def backend(request):
    """Run the test once per kernel backend."""
    prev = kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(prev)


@pytest.fixture
def fixture_path():
    return lambda name: os.path.join(FIXTURES, name)


@pytest.fixture
def g():
    return np.random.default_rng(1234)


def tiny_run_config(**train):
    from labelbridge.trainer import RunConfig

    cfg = RunConfig()
    cfg.model.dim, cfg.model.hidden, cfg.model.label_dim = 16, 16, 8
    cfg.train.batch_size = 4
    for k, v in train.items():
        setattr(cfg.train, k, v)
    return cfg


# one line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
