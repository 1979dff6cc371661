"""Shared fixtures."""

import numpy as np
import pytest

from app.core.logging import configure_logging
from app.models.activation import ActivationSet
from app.models.synthetic import PlantedSpec
from app.services.synth_oracle import planted_block_activations
from app.services.tensor_store import write_activation_set


@pytest.fixture(autouse=True, scope="session")
def quiet_logging():
    configure_logging("WARNING", json=True)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def planted_spec() -> PlantedSpec:
    return PlantedSpec(
        n_examples=64,
        feature_dim=8,
        layer_count=6,
        block_boundaries=[3],
        noise_sigma=0.05,
        seed=7
    )


@pytest.fixture
def planted_set(planted_spec: PlantedSpec) -> ActivationSet:
    return planted_block_activations(planted_spec)


@pytest.fixture
def planted_manifest(tmp_path, planted_set):
    return write_activation_set(planted_set, tmp_path / "planted")
