import numpy as np
import pytest

from deskbench.coords import default_camera
from deskbench.perception import PerceptionConfig
from deskbench.render import render_observation
from deskbench.shapes import TextureSpec
from deskbench.world import WorldObject, WorldState


@pytest.fixture
def camera():
    return default_camera()


@pytest.fixture
def clean_config():
    return PerceptionConfig()


def make_world(*specs) -> WorldState:
    """specs: (shape, kind, primary, secondary, x, y) tuples."""
    objs = [
        WorldObject(
            id=i, shape=shape, texture=TextureSpec(kind, primary, secondary),
            x=x, y=y,
        )
        for i, (shape, kind, primary, secondary, x, y) in enumerate(specs)
    ]
    return WorldState(objects=objs)


@pytest.fixture
def three_object_world():
    return make_world(
        ("block", "solid", "red", None, 0.40, -0.30),
        ("round", "polka_dot", "green", "purple", 0.60, 0.00),
        ("container", "stripe", "blue", "yellow", 0.45, 0.30),
    )


@pytest.fixture
def three_object_image(three_object_world):
    return render_observation(three_object_world)


def blob_mask(rng, size=256, max_r=12) -> np.ndarray:
    """Random connected blob: a few overlapping discs, clear of borders."""
    m = np.zeros((size, size), dtype=bool)
    margin = max(max_r + 2, size // 6)
    cx = rng.integers(margin, size - margin)
    cy = rng.integers(margin, size - margin)
    yy, xx = np.mgrid[0:size, 0:size]
    for _ in range(int(rng.integers(1, 4))):
        ox = cx + rng.integers(-8, 9)
        oy = cy + rng.integers(-8, 9)
        r = rng.integers(3, max_r)
        m |= (xx - ox) ** 2 + (yy - oy) ** 2 <= r * r
    return m
