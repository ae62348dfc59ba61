"""Image pre-processing, mask proposal, and mask post-processing.

The proposer is a desk-scale stand-in for a promptable segmenter: connected
components of non-table pixels, with optional point prompts and calibrated
noise injection so the post-processing stages have something real to fix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .shapes import TABLE_COLOR, rgb_hue, rgb_luminance

FG_COLOR_DISTANCE = 40.0      # u8 RGB euclidean threshold vs table color
SHADOW_HUE_TOLERANCE = 15.0   # degrees

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


class EmptyScene(Exception):
    """No foreground components were found."""


class DimensionMismatch(Exception):
    pass


@dataclass(frozen=True)
class NoiseSpec:
    split_prob: float = 0.0
    hole_prob: float = 0.0
    duplicate_prob: float = 0.0
    shadow_blob_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for p in (self.split_prob, self.hole_prob, self.duplicate_prob,
                  self.shadow_blob_prob):
            if not 0.0 <= p <= 1.0:
                raise ValueError("noise probabilities must lie in [0, 1]")

    def enabled(self) -> bool:
        return any(
            p > 0
            for p in (self.split_prob, self.hole_prob, self.duplicate_prob,
                      self.shadow_blob_prob)
        )


# probabilities tuned so that, without post-processing, a calibrated share of
# episodes hits junk masks (EmptyCrop in retrieval, duplicate confusion),
# while the size filter + refinement + NMS recover nearly all of it
CALIBRATED_NOISE = NoiseSpec(
    split_prob=0.04, hole_prob=0.15, duplicate_prob=0.35, shadow_blob_prob=0.16
)


@dataclass(frozen=True)
class PerceptionConfig:
    shadow_luminance_ratio: float = 0.75
    closing_kernel: int = 3
    refine_dilate_erode_kernel: int = 3
    area_min: int = 50
    area_max_fraction: float = 0.25
    nms_iou: float = 0.5
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    table_color: tuple[int, int, int] = TABLE_COLOR
    enable_preprocess: bool = True
    enable_postprocess: bool = True

    def __post_init__(self):
        for k in (self.closing_kernel, self.refine_dilate_erode_kernel):
            if k < 1 or k % 2 == 0:
                raise ValueError("kernels must be odd and >= 1")
        if not 0 < self.area_min:
            raise ValueError("area_min must be positive")
        if not 0 < self.nms_iou <= 1:
            raise ValueError("nms_iou must lie in (0, 1]")

    def area_max(self, image_shape) -> int:
        return int(self.area_max_fraction * image_shape[0] * image_shape[1])

    def with_noise_seed(self, seed: int) -> "PerceptionConfig":
        return replace(self, noise=replace(self.noise, seed=seed))


@dataclass
class MaskSet:
    masks: list[np.ndarray]
    scores: list[float]

    def __post_init__(self):
        if len(self.masks) != len(self.scores):
            raise ValueError("masks and scores must align")

    def __len__(self) -> int:
        return len(self.masks)


@dataclass
class ObjectCrop:
    image: np.ndarray
    bbox: tuple[int, int, int, int]  # inclusive (x0, y0, x1, y1) pixels
    source_index: int
    mask: np.ndarray | None = None   # source binary mask, kept for matching


def color_distance(img: np.ndarray, color) -> np.ndarray:
    diff = img.astype(np.float64) - np.asarray(color, dtype=np.float64)
    return np.sqrt((diff * diff).sum(axis=-1))


def _hue_map(img: np.ndarray) -> np.ndarray:
    rgb = img.astype(np.float64) / 255.0
    mx = rgb.max(axis=-1)
    mn = rgb.min(axis=-1)
    d = mx - mn
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    h = np.zeros_like(mx)
    safe = d > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        is_r = safe & (mx == r)
        h[is_r] = np.mod((g[is_r] - b[is_r]) / d[is_r], 6.0)
        is_g = safe & ~is_r & (mx == g)
        h[is_g] = (b[is_g] - r[is_g]) / d[is_g] + 2.0
        is_b = safe & ~is_r & ~is_g
        h[is_b] = (r[is_b] - g[is_b]) / d[is_b] + 4.0
    return 60.0 * h


def preprocess_image(img: np.ndarray, cfg: PerceptionConfig) -> np.ndarray:
    """Replace shadow pixels by the table color, then reconcile via a
    morphological closing of the foreground indicator (pixels the closing
    claims back get their original colors restored)."""
    table = np.asarray(cfg.table_color, dtype=np.uint8)
    table_hue = rgb_hue(cfg.table_color)
    table_lum = rgb_luminance(cfg.table_color)

    hue = _hue_map(img)
    lum = (
        0.299 * img[..., 0].astype(np.float64)
        + 0.587 * img[..., 1].astype(np.float64)
        + 0.114 * img[..., 2].astype(np.float64)
    )
    hue_diff = np.abs(hue - table_hue)
    hue_diff = np.minimum(hue_diff, 360.0 - hue_diff)
    shadow = (hue_diff <= SHADOW_HUE_TOLERANCE) & (
        lum < cfg.shadow_luminance_ratio * table_lum
    )

    out = img.copy()
    out[shadow] = table

    fg = color_distance(out, cfg.table_color) > FG_COLOR_DISTANCE
    closed = _padded_close(fg, cfg.closing_kernel)
    reclaimed = closed & ~fg
    out[reclaimed] = img[reclaimed]
    return out


def _padded_close(mask: np.ndarray, kernel: int) -> np.ndarray:
    """Dilate then erode on a padded canvas (exact, idempotent closing)."""
    pad = kernel
    struct = np.ones((kernel, kernel), dtype=bool)
    padded = np.pad(mask, pad)
    dilated = ndimage.binary_dilation(padded, structure=struct)
    eroded = ndimage.binary_erosion(dilated, structure=struct)
    return eroded[pad:-pad, pad:-pad]


def refine_mask(mask: np.ndarray, kernel: int) -> np.ndarray:
    """Dilation then erosion: fills small holes and unconnected gaps."""
    return _padded_close(mask, kernel)


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise DimensionMismatch(f"mask shapes differ: {a.shape} vs {b.shape}")
    inter = np.logical_and(a, b).sum()
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 0.0
    return float(inter) / float(union)


# ------------------------------------------------------------------
# noise injection
# ------------------------------------------------------------------


def _split_mask(mask: np.ndarray, rng) -> list[np.ndarray]:
    ys, xs = np.nonzero(mask)
    cx = float(xs.mean()) + float(rng.uniform(-3, 3))
    cy = float(ys.mean()) + float(rng.uniform(-3, 3))
    theta = float(rng.uniform(0, math.pi))
    nx, ny = math.cos(theta), math.sin(theta)
    yy, xx = np.mgrid[0 : mask.shape[0], 0 : mask.shape[1]]
    signed = (xx - cx) * nx + (yy - cy) * ny
    gap = np.abs(signed) <= 1.0
    side_a = mask & (signed > 1.0)
    side_b = mask & (signed < -1.0)
    if side_a.sum() >= 20 and side_b.sum() >= 20:
        return [side_a, side_b]
    del gap
    return [mask]


def _punch_holes(mask: np.ndarray, rng) -> np.ndarray:
    out = mask.copy()
    ys, xs = np.nonzero(out)
    n = int(rng.integers(1, 4))
    for _ in range(n):
        i = int(rng.integers(len(xs)))
        s = int(rng.integers(1, 4))
        y0, x0 = ys[i], xs[i]
        out[y0 : y0 + s, x0 : x0 + s] = False
    if out.any():
        return out
    return mask


def _duplicate_mask(mask: np.ndarray, rng) -> np.ndarray | None:
    dx = int(rng.integers(-2, 3))
    dy = int(rng.integers(-2, 3))
    if dx == 0 and dy == 0:
        dx = 1
    out = np.zeros_like(mask)
    h, w = mask.shape
    src = mask[max(0, -dy) : h - max(0, dy), max(0, -dx) : w - max(0, dx)]
    out[max(0, dy) : h - max(0, -dy), max(0, dx) : w - max(0, -dx)] = src
    return out if out.any() else None


def _shadow_blob(mask: np.ndarray, rng) -> np.ndarray | None:
    ys, xs = np.nonzero(mask)
    h, w = mask.shape
    cx = int(xs.max()) + 3 + int(rng.integers(0, 5))
    cy = int(ys.max()) + 3 + int(rng.integers(0, 5))
    r = int(rng.integers(1, 4))
    if cx >= w - 1 or cy >= h - 1:
        cx = min(cx, w - 2)
        cy = min(cy, h - 2)
    yy, xx = np.mgrid[0:h, 0:w]
    blob = (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r
    blob &= ~mask
    return blob if blob.any() else None


def propose_masks(img: np.ndarray, points, cfg: PerceptionConfig) -> MaskSet:
    """Connected components of non-table pixels, with optional point prompts.

    When points are given, only components containing at least one point are
    returned and noise injection is skipped for them.
    """
    h, w = img.shape[:2]
    if points:
        for x, y in points:
            if not (0 <= x < w and 0 <= y < h):
                raise ValueError(f"point prompt ({x}, {y}) outside image bounds")

    fg = color_distance(img, cfg.table_color) > FG_COLOR_DISTANCE
    labels, n = ndimage.label(fg, structure=EIGHT_CONNECTED)
    if n == 0:
        raise EmptyScene("no foreground components")

    components = [labels == k for k in range(1, n + 1)]

    if points:
        keep = []
        for comp in components:
            if any(comp[y, x] for x, y in points):
                keep.append(comp)
        if not keep:
            raise EmptyScene("no component contains a point prompt")
        masks = keep
    elif cfg.noise.enabled():
        rng = np.random.default_rng(cfg.noise.seed)
        masks = []
        extras: list[np.ndarray] = []
        for comp in components:
            parts = [comp]
            if rng.random() < cfg.noise.split_prob:
                parts = _split_mask(comp, rng)
            if rng.random() < cfg.noise.hole_prob:
                parts = [_punch_holes(p, rng) for p in parts]
            if rng.random() < cfg.noise.duplicate_prob:
                dup = _duplicate_mask(parts[0], rng)
                if dup is not None:
                    extras.append(dup)
            if rng.random() < cfg.noise.shadow_blob_prob:
                blob = _shadow_blob(comp, rng)
                if blob is not None:
                    extras.append(blob)
            masks.extend(parts)
        masks.extend(extras)
    else:
        masks = components

    total = float(h * w)
    scores = [float(m.sum()) / total for m in masks]
    return MaskSet(masks=masks, scores=scores)


def postprocess_masks(ms: MaskSet, cfg: PerceptionConfig) -> MaskSet:
    """Size filter, then dilate-erode refinement, then greedy NMS."""
    if not ms.masks:
        return MaskSet(masks=[], scores=[])
    shape = ms.masks[0].shape
    a_max = cfg.area_max(shape)

    kept = [
        (m, s)
        for m, s in zip(ms.masks, ms.scores)
        if cfg.area_min <= m.sum() <= a_max
    ]
    refined = [
        (refine_mask(m, cfg.refine_dilate_erode_kernel), s) for m, s in kept
    ]

    order = sorted(range(len(refined)), key=lambda i: -refined[i][1])
    survivors: list[tuple[np.ndarray, float]] = []
    for i in order:
        m, s = refined[i]
        if all(mask_iou(m, km) <= cfg.nms_iou for km, _ in survivors):
            survivors.append((m, s))
    return MaskSet(masks=[m for m, _ in survivors], scores=[s for _, s in survivors])


def crop_objects(img: np.ndarray, ms: MaskSet,
                 table_color=TABLE_COLOR) -> tuple[list[ObjectCrop], MaskSet]:
    """One crop per mask, order preserving; the mask set passes through."""
    crops = []
    table = np.asarray(table_color, dtype=np.uint8)
    for i, mask in enumerate(ms.masks):
        ys, xs = np.nonzero(mask)
        x0, x1 = int(xs.min()), int(xs.max())
        y0, y1 = int(ys.min()), int(ys.max())
        patch = img[y0 : y1 + 1, x0 : x1 + 1].copy()
        local = mask[y0 : y1 + 1, x0 : x1 + 1]
        patch[~local] = table
        crops.append(
            ObjectCrop(image=patch, bbox=(x0, y0, x1, y1), source_index=i, mask=mask)
        )
    return crops, ms


def run_pipeline(img: np.ndarray, points, cfg: PerceptionConfig) -> MaskSet:
    """Full perception chain honoring the enable flags."""
    work = preprocess_image(img, cfg) if cfg.enable_preprocess else img
    ms = propose_masks(work, points, cfg)
    if cfg.enable_postprocess:
        ms = postprocess_masks(ms, cfg)
    return ms
