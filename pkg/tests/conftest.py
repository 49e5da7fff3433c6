import os

# Set environment defaults before any module is imported during test collection
os.environ.setdefault('LOG_LEVEL', 'WARNING')
os.environ.setdefault('SIM_WORKERS', '1')
os.environ.setdefault('SIM_OUTPUT_DIR', 'results')
os.environ.pop('RNG_SEED', None)

# Pre-import utils.config so it is cached in sys.modules before any test manipulates env vars.
# Tests that call importlib.reload(cfg) rely on this cached reference being present.
import utils.config  # noqa: E402, F401

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from utils.mapping import QamConstellation  # noqa: E402
from utils.shaping import AmplitudeAlphabet, Composition  # noqa: E402

DEFAULT_PMF = (0.4, 0.3, 0.2, 0.1)


@pytest.fixture
def shaped_alphabet():
    return AmplitudeAlphabet.ask(DEFAULT_PMF)


@pytest.fixture
def shaped_constellation(shaped_alphabet):
    return QamConstellation.from_alphabet(shaped_alphabet)


@pytest.fixture
def composition_4321():
    return Composition((4, 3, 2, 1))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def _exact_stream(constellation, resolution=400):
    counts = np.rint(constellation.expected_pmf * resolution).astype(int)
    return np.repeat(constellation.points, counts)


@pytest.fixture
def exact_stream():
    """Builds a stream holding every point in exact proportion to its expected probability."""
    return _exact_stream
