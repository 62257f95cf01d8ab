import numpy as np
import pytest

from pwsde.models import get_model

MODEL_NAMES = ("step_function", "unit_circle", "dividend", "prescribed_transform")


@pytest.fixture(scope="session")
def models():
    """One shared instance per model; width selection is cached this way.

    Tests that mutate a model must build their own via get_model.
    """
    return {name: get_model(name) for name in MODEL_NAMES}


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(987654))
