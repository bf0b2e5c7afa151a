import numpy as np
import pytest
import torch

from msae.losses import RDConfig
from msae.networks import NetworkConfig
from msae.training import TrainConfig, freeze_model, init_state

TINY_NET = dict(base_channels=4, trunk_channels=16, disc_base_channels=4, disc_max_channels=16)


def tiny_config(**kw) -> TrainConfig:
    base = dict(crop_size=64, batch_size=1, steps=10, seed=0, network=dict(TINY_NET))
    base.update(kw)
    return TrainConfig(**base)


@pytest.fixture
def tiny_cfg():
    return tiny_config()


@pytest.fixture(scope="session")
def tiny_frozen():
    state = init_state(tiny_config())
    return freeze_model(state)


@pytest.fixture
def smooth_image():
    def make(h, w, seed=0):
        rng = np.random.default_rng(seed)
        yy, xx = np.mgrid[0:h, 0:w]
        img = np.stack(
            [np.sin(xx / (5 + 3 * c) + rng.uniform(0, 6)) * np.cos(yy / (7 + 2 * c)) for c in range(3)], axis=-1
        )
        img = (img - img.min()) / (np.ptp(img) + 1e-9)
        return (img * 255).round().astype(np.uint8)

    return make


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
