"""Shared fixtures: cameras, scenarios, and cached synthetic datasets."""

from dataclasses import replace

import numpy as np
import pytest

from scashape.experiments import SyntheticScenario, generate_grid

ARM_LENGTH = 287.0
ARM_RADIUS = 12.0


@pytest.fixture(scope="session")
def default_camera():
    from scashape.camera import synthesize_camera
    return synthesize_camera(160.0, (1280, 960))


@pytest.fixture(scope="session")
def noiseless_dataset():
    """Default grid rendered without pixel noise (exact imaging pipeline)."""
    sc = replace(SyntheticScenario(), pixel_noise_sigma=0.0)
    return sc, generate_grid(sc)


@pytest.fixture(scope="session")
def noisy_dataset():
    """Default grid at the default 2 px marker noise."""
    sc = SyntheticScenario()
    return sc, generate_grid(sc)


def rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)
