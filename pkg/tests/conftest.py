"""Shared fixtures. Pairing keypairs are expensive, so a fixed pool is built once per session."""

import pytest

from bftboot import bls12381, modelgroup
from bftboot.rng import SplitMix64
from bftboot.scheme import EndorsementScheme

POOL_SIZE = 16


@pytest.fixture(scope="session")
def pairing_scheme():
    return EndorsementScheme(bls12381)


@pytest.fixture(scope="session")
def model_scheme():
    return EndorsementScheme(modelgroup)


@pytest.fixture(scope="session")
def pairing_pool(pairing_scheme):
    rng = SplitMix64(0x9E3779B97F4A7C15)
    return tuple(pairing_scheme.key_generate(rng) for _ in range(POOL_SIZE))


@pytest.fixture(scope="session")
def model_pool(model_scheme):
    rng = SplitMix64(0x9E3779B97F4A7C15)
    return tuple(model_scheme.key_generate(rng) for _ in range(POOL_SIZE))
