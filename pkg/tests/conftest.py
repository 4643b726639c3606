import numpy as np
import pytest

from streamctx.store import FrameFeature
from streamctx.synthetic import SyntheticSpec, build_synthetic


@pytest.fixture(scope="session")
def default_session():
    """The default synthetic session: 5 segments, 20 QAs, 1 dialogue stream."""
    return build_synthetic(SyntheticSpec())


def make_frames(n, patches=2, dim=4, seed=0, t0=0.0, dt=1.0):
    """n random frames with evenly spaced timestamps."""
    rng = np.random.default_rng(seed)
    return [
        FrameFeature(rng.normal(size=(patches, dim)).astype(np.float32), t0 + i * dt)
        for i in range(n)
    ]
