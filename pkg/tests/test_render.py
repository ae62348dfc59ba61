import numpy as np

from deskbench.perception import color_distance
from deskbench.render import render_observation
from deskbench.shapes import TABLE_COLOR, shadow_color
from deskbench.world import WorldState

from conftest import make_world


def test_empty_world_is_uniform_table():
    img = render_observation(WorldState(objects=[]))
    assert img.shape == (256, 256, 3)
    assert (img == np.array(TABLE_COLOR, dtype=np.uint8)).all()


def _object_pixels(img):
    """Pixels that belong to neither the table nor its darkened shadow."""
    fg = color_distance(img, TABLE_COLOR) > 40.0
    fg &= color_distance(img, shadow_color()) > 40.0
    return fg


def test_single_block_centroid_at_image_center():
    w = make_world(("block", "solid", "red", None, 0.5, 0.0))
    img = render_observation(w)
    fg = _object_pixels(img)
    labeled_regions = _count_components(fg)
    assert labeled_regions == 1
    ys, xs = np.nonzero(fg)
    assert abs(xs.mean() - 128.0) <= 1.0
    assert abs(ys.mean() - 128.0) <= 1.0


def _count_components(mask):
    from scipy import ndimage

    _, n = ndimage.label(mask, structure=np.ones((3, 3), dtype=bool))
    return n


def test_shadow_band_present_and_darkened(three_object_world):
    img = render_observation(three_object_world)
    sh = np.array(shadow_color(), dtype=np.uint8)
    shadow_pixels = (img == sh).all(axis=-1).sum()
    assert shadow_pixels > 0
    img_off = render_observation(three_object_world, shadows=False)
    assert (img_off == sh).all(axis=-1).sum() == 0


def test_render_is_deterministic(three_object_world):
    a = render_observation(three_object_world)
    b = render_observation(three_object_world)
    assert a.tobytes() == b.tobytes()


def test_shadows_never_cover_objects(three_object_world):
    with_sh = render_observation(three_object_world)
    without = render_observation(three_object_world, shadows=False)
    obj = _object_pixels(without)
    assert (with_sh[obj] == without[obj]).all()


def test_rotated_render_differs():
    w = make_world(("letter_L", "solid", "red", None, 0.5, 0.0))
    a = render_observation(w)
    w.objects[0].yaw = 90.0
    b = render_observation(w)
    assert a.tobytes() != b.tobytes()
