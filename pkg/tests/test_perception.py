import numpy as np
import pytest

from deskbench.coords import default_camera
from deskbench.perception import (
    CALIBRATED_NOISE,
    DimensionMismatch,
    EmptyScene,
    MaskSet,
    NoiseSpec,
    PerceptionConfig,
    crop_objects,
    mask_iou,
    postprocess_masks,
    preprocess_image,
    propose_masks,
    refine_mask,
    run_pipeline,
)
from deskbench.render import object_mask, render_observation
from deskbench.shapes import TABLE_COLOR
from deskbench.tasks import generate_task

from conftest import blob_mask, make_world


# ---------------- preprocess ----------------


def test_preprocess_identity_without_shadows(three_object_world, clean_config):
    img = render_observation(three_object_world, shadows=False)
    out = preprocess_image(img, clean_config)
    assert out.tobytes() == img.tobytes()


def test_preprocess_uniform_table_unchanged(clean_config):
    img = np.empty((256, 256, 3), dtype=np.uint8)
    img[:] = np.array(TABLE_COLOR, dtype=np.uint8)
    out = preprocess_image(img, clean_config)
    assert out.tobytes() == img.tobytes()


def test_preprocess_removes_shadow_band(clean_config):
    w = make_world(("block", "solid", "red", None, 0.5, 0.0))
    with_sh = render_observation(w, shadows=True)
    without = render_observation(w, shadows=False)
    cleaned = preprocess_image(with_sh, clean_config)

    def fg_count(img):
        d = img.astype(float) - np.array(TABLE_COLOR, dtype=float)
        return int((np.sqrt((d * d).sum(-1)) > 40).sum())

    k = clean_config.closing_kernel
    assert abs(fg_count(cleaned) - fg_count(without)) <= k * k


def test_preprocess_only_touches_shadow_pixels(three_object_world, clean_config):
    img = render_observation(three_object_world, shadows=True)
    out = preprocess_image(img, clean_config)
    changed = (out != img).any(axis=-1)
    from deskbench.shapes import shadow_color

    shadow = (img == np.array(shadow_color(), dtype=np.uint8)).all(axis=-1)
    assert (changed <= shadow).all()


# ---------------- propose ----------------


def test_propose_matches_ground_truth(three_object_world, clean_config):
    img = render_observation(three_object_world, shadows=False)
    ms = propose_masks(img, None, clean_config)
    assert len(ms) == 3
    cam = default_camera()
    truth = []
    for obj in three_object_world.objects:
        px, py = cam.world_to_pixel(obj.x, obj.y)
        truth.append((float(px), float(py)))
    for mask in ms.masks:
        ys, xs = np.nonzero(mask)
        cx, cy = xs.mean(), ys.mean()
        best = min(abs(cx - tx) + abs(cy - ty) for tx, ty in truth)
        assert best <= 2.0


def test_propose_empty_scene_raises(clean_config):
    img = np.empty((256, 256, 3), dtype=np.uint8)
    img[:] = np.array(TABLE_COLOR, dtype=np.uint8)
    with pytest.raises(EmptyScene):
        propose_masks(img, None, clean_config)


def test_point_prompt_filters_components(three_object_world, clean_config):
    img = render_observation(three_object_world, shadows=False)
    cam = default_camera()
    obj = three_object_world.objects[0]
    px, py = cam.world_to_pixel(obj.x, obj.y)
    point = (int(px), int(py))
    ms = propose_masks(img, [point], clean_config)
    assert len(ms) == 1
    assert ms.masks[0][point[1], point[0]]


def test_point_prompt_bounds_validated(three_object_image, clean_config):
    with pytest.raises(ValueError):
        propose_masks(three_object_image, [(300, 10)], clean_config)


def test_duplicate_noise_overlaps_original(clean_config):
    w = make_world(("block", "solid", "red", None, 0.5, 0.0))
    img = render_observation(w, shadows=False)
    cfg = PerceptionConfig(noise=NoiseSpec(duplicate_prob=1.0, seed=5))
    ms = propose_masks(img, None, cfg)
    assert len(ms) == 2
    assert mask_iou(ms.masks[0], ms.masks[1]) > cfg.nms_iou


def test_point_prompts_skip_noise(clean_config):
    w = make_world(("block", "solid", "red", None, 0.5, 0.0))
    img = render_observation(w, shadows=False)
    cfg = PerceptionConfig(
        noise=NoiseSpec(duplicate_prob=1.0, shadow_blob_prob=1.0, seed=5)
    )
    ms = propose_masks(img, [(128, 128)], cfg)
    assert len(ms) == 1


# ---------------- postprocess ----------------


def test_nms_keeps_one_of_identical_masks(clean_config):
    m = np.zeros((256, 256), dtype=bool)
    m[100:120, 100:120] = True
    ms = MaskSet(masks=[m, m.copy()], scores=[0.1, 0.1])
    out = postprocess_masks(ms, clean_config)
    assert len(out) == 1


def test_size_filter_drops_small_masks(clean_config):
    small = np.zeros((256, 256), dtype=bool)
    small[0:2, 0:5] = True  # 10 px < area_min=50
    big = np.zeros((256, 256), dtype=bool)
    big[50:80, 50:80] = True
    ms = MaskSet(masks=[small, big], scores=[0.01, 0.2])
    out = postprocess_masks(ms, clean_config)
    assert len(out) == 1
    assert out.masks[0].sum() >= 50


def test_size_filter_drops_huge_masks(clean_config):
    huge = np.ones((256, 256), dtype=bool)
    ms = MaskSet(masks=[huge], scores=[1.0])
    out = postprocess_masks(ms, clean_config)
    assert len(out) == 0


def test_refinement_fills_small_holes():
    square = np.zeros((64, 64), dtype=bool)
    square[20:40, 20:40] = True
    holey = square.copy()
    holey[25, 25] = False
    holey[30, 33] = False
    holey[36, 22] = False
    refined = refine_mask(holey, 3)
    assert (refined == square).all()


def test_refinement_idempotent_on_random_blobs():
    rng = np.random.default_rng(42)
    for _ in range(500):
        m = blob_mask(rng, size=96, max_r=10)
        once = refine_mask(m, 3)
        twice = refine_mask(once, 3)
        assert (once == twice).all()


def test_nms_pairwise_iou_bounded_fuzz():
    rng = np.random.default_rng(9)
    cfg = PerceptionConfig(area_min=5)
    for _ in range(1000):
        masks = [blob_mask(rng, size=64, max_r=9) for _ in range(int(rng.integers(1, 6)))]
        ms = MaskSet(masks=masks, scores=[float(m.sum()) for m in masks])
        out = postprocess_masks(ms, cfg)
        for i in range(len(out)):
            for j in range(i + 1, len(out)):
                assert mask_iou(out.masks[i], out.masks[j]) <= cfg.nms_iou


# ---------------- iou ----------------


def test_mask_iou_cases():
    a = np.zeros((10, 10), dtype=bool)
    a[2:6, 2:6] = True
    assert mask_iou(a, a) == 1.0
    b = np.zeros((10, 10), dtype=bool)
    b[8:10, 8:10] = True
    assert mask_iou(a, b) == 0.0
    assert mask_iou(np.zeros((4, 4), bool), np.zeros((4, 4), bool)) == 0.0


def test_mask_iou_half_overlap_is_one_third():
    # equal squares overlapping half: overlap wh/2, union 3wh/2
    a = np.zeros((20, 20), dtype=bool)
    b = np.zeros((20, 20), dtype=bool)
    a[0:8, 0:8] = True
    b[0:8, 4:12] = True
    assert mask_iou(a, b) == pytest.approx(1.0 / 3.0)


def test_mask_iou_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        mask_iou(np.zeros((4, 4), bool), np.zeros((5, 5), bool))


# ---------------- crops ----------------


def test_crop_full_image_mask(three_object_image):
    full = np.ones((256, 256), dtype=bool)
    crops, ms = crop_objects(three_object_image, MaskSet(masks=[full], scores=[1.0]))
    assert len(crops) == 1
    assert crops[0].bbox == (0, 0, 255, 255)
    assert crops[0].image.tobytes() == three_object_image.tobytes()


def test_crop_order_and_passthrough(three_object_image, clean_config):
    ms = propose_masks(three_object_image, None, clean_config)
    crops, back = crop_objects(three_object_image, ms)
    assert back is ms
    assert [c.source_index for c in crops] == list(range(len(ms)))


def test_crop_disc_bbox():
    img = np.empty((256, 256, 3), dtype=np.uint8)
    img[:] = np.array(TABLE_COLOR, dtype=np.uint8)
    yy, xx = np.mgrid[0:256, 0:256]
    disc = (xx - 50) ** 2 + (yy - 50) ** 2 <= 100
    crops, _ = crop_objects(img, MaskSet(masks=[disc], scores=[1.0]))
    x0, y0, x1, y1 = crops[0].bbox
    assert abs(x0 - 40) <= 1 and abs(y0 - 40) <= 1
    assert abs(x1 - 60) <= 1 and abs(y1 - 60) <= 1


def test_crop_wipes_outside_mask(three_object_image, clean_config):
    ms = propose_masks(three_object_image, None, clean_config)
    crops, _ = crop_objects(three_object_image, ms)
    c = crops[0]
    local = c.mask[c.bbox[1] : c.bbox[3] + 1, c.bbox[0] : c.bbox[2] + 1]
    outside = c.image[~local]
    assert (outside == np.array(TABLE_COLOR, dtype=np.uint8)).all()


# ---------------- pipeline properties ----------------


def test_pipeline_bijects_with_ground_truth_noise_off():
    cam = default_camera()
    cfg = PerceptionConfig()
    for mt in ("T01", "T03", "T04"):
        for lvl in ("L1", "L3"):
            for seed in range(4):
                task = generate_task(mt, lvl, seed)
                world = task.initial_world
                img = render_observation(world)
                ms = run_pipeline(img, None, cfg)
                assert len(ms) == len(world.objects)
                truths = []
                for obj in world.objects:
                    m = object_mask(obj, cam)
                    ys, xs = np.nonzero(m)
                    truths.append((xs.mean(), ys.mean()))
                used = set()
                for mask in ms.masks:
                    ys, xs = np.nonzero(mask)
                    cx, cy = xs.mean(), ys.mean()
                    dists = [
                        max(abs(cx - tx), abs(cy - ty)) for tx, ty in truths
                    ]
                    k = int(np.argmin(dists))
                    assert dists[k] <= 1.0
                    assert k not in used
                    used.add(k)


def test_calibrated_noise_recovered_by_postprocess():
    w = make_world(
        ("block", "solid", "red", None, 0.40, -0.30),
        ("round", "polka_dot", "green", "purple", 0.60, 0.00),
    )
    img = render_observation(w)
    recovered = 0
    trials = 30
    for seed in range(trials):
        cfg = PerceptionConfig(noise=CALIBRATED_NOISE).with_noise_seed(seed)
        ms = run_pipeline(img, None, cfg)
        if len(ms) == 2:
            recovered += 1
    assert recovered >= trials * 0.8
