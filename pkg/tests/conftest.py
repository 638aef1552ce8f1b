import numpy as np
import pytest

import acceptance_log
from toporelax.links import hopf_pair_config
from toporelax.modeled import build_link_field
from toporelax.spectral import Grid3, VectorField


@pytest.fixture(scope="session")
def grid64():
    return Grid3(64)


@pytest.fixture(scope="session")
def grid32():
    return Grid3(32)


@pytest.fixture(scope="session")
def hopf_cfg():
    return hopf_pair_config()


@pytest.fixture(scope="session")
def hopf_fields64(hopf_cfg, grid64):
    return build_link_field(hopf_cfg, grid64)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_solenoidal(g, rng, kmax=4, mean_zero=True):
    """Smooth random solenoidal field with modes up to ``kmax`` per axis."""
    ops = g.ops
    shape = (3,) + ops.shape_hat
    hat = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    hat *= np.all(np.abs(ops.index) <= kmax, axis=0)
    hat[:, 0, 0, 0] = 0.0
    F = VectorField.from_hat(g, ops.project_hat(hat))
    if mean_zero:
        return F
    return VectorField(g, F.data + rng.standard_normal(3)[:, None, None, None])


def pytest_terminal_summary(terminalreporter):
    lines = acceptance_log.summary_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
