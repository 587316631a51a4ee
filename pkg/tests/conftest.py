import os
import sys

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=60, deadline=None, derandomize=True)
settings.load_profile("default")

from ftlr.core import BoundingBox, Frame  # noqa: E402
from ftlr.synth import SynthSpec, generate_synthetic  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def static_sequence():
    return generate_synthetic(SynthSpec(name="static", frame_count=12, frame_width=160,
                                        frame_height=120, seed=3))


@pytest.fixture(scope="session")
def drifting_sequence():
    return generate_synthetic(SynthSpec(name="drift", frame_count=20, frame_width=200,
                                        frame_height=160, velocity=(2.0, 1.0), seed=5))


def textured_frame(seed=0, h=120, w=160, index=1):
    r = np.random.default_rng(seed)
    from scipy.ndimage import gaussian_filter
    img = gaussian_filter(r.standard_normal((h, w)), 2.0)
    img = (img - img.min()) / (img.max() - img.min())
    return Frame(img, index)


def box(x, y, w=32, h=32):
    return BoundingBox(float(x), float(y), float(w), float(h))
