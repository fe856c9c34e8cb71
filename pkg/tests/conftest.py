import numpy as np
import pytest

from motioncond.synth import ArcMotion, Background, Blob, SceneSpec, VelocityMotion


@pytest.fixture
def two_blob_scene():
    """32x32, L=8: one rightward disc, one static disc, static background."""
    return SceneSpec(
        length=8,
        height=32,
        width=32,
        background=Background(color=(0.1, 0.1, 0.1)),
        blobs=(
            Blob(center=(8.0, 16.0), radius=4.0, color=(0.9, 0.2, 0.2), motion=VelocityMotion((2.0, 0.0))),
            Blob(center=(24.0, 8.0), radius=3.0, color=(0.2, 0.9, 0.2), motion=VelocityMotion((0.0, 0.0))),
        ),
        seed=0,
    )


@pytest.fixture
def arc_scene():
    """24x24, L=6: disc orbiting a pivot, plenty of rotation per frame."""
    return SceneSpec(
        length=6,
        height=24,
        width=24,
        background=Background(color=(0.0, 0.0, 0.0)),
        blobs=(
            Blob(center=(16.0, 12.0), radius=3.0, color=(0.8, 0.8, 0.1), motion=ArcMotion(center=(12.0, 12.0), omega=0.3)),
        ),
        seed=1,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
