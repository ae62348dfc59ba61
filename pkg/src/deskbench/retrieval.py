"""Shared attribute-space embeddings for text and crops, plus retrieval
and Hungarian scene matching.

The embedding space is a hand-crafted stand-in for a pair of aligned
text/image encoders: 12 primary-color + 12 secondary-color + 5 texture +
10 shape slots, L2 normalized. Exact, diagnosable, and weight-free.
"""

from __future__ import annotations

import base64
import io
import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import ndimage
from scipy.optimize import linear_sum_assignment

from .coords import default_camera
from .perception import EIGHT_CONNECTED, ObjectCrop, color_distance
from .shapes import (
    COLOR_NAMES,
    SHAPES,
    TABLE_COLOR,
    TEXTURE_KINDS,
    COLORS,
    TextureSpec,
    shadow_color,
)
from .world import WorldObject

N_COLOR = len(COLOR_NAMES)
N_TEXTURE = len(TEXTURE_KINDS)
N_SHAPE = len(SHAPES)
EMBED_DIM = 2 * N_COLOR + N_TEXTURE + N_SHAPE

_SECONDARY_OFFSET = N_COLOR
_TEXTURE_OFFSET = 2 * N_COLOR
_SHAPE_OFFSET = 2 * N_COLOR + N_TEXTURE

MIN_CROP_FOREGROUND = 10


class UnparsableQuery(Exception):
    pass


class EmptyCrop(Exception):
    pass


class AllExcluded(Exception):
    pass


@dataclass(frozen=True)
class AttributeEmbedding:
    vector: np.ndarray
    provenance: str  # "text" | "image"

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=np.float64)
        if v.shape != (EMBED_DIM,):
            raise ValueError(f"embedding must have {EMBED_DIM} dims")
        if abs(float(np.linalg.norm(v)) - 1.0) > 1e-6:
            raise ValueError("embedding must be unit norm")
        object.__setattr__(self, "vector", v)


def _normalize(raw: np.ndarray, provenance: str) -> AttributeEmbedding:
    norm = float(np.linalg.norm(raw))
    if norm == 0:
        raise UnparsableQuery("no recognizable attributes")
    return AttributeEmbedding(vector=raw / norm, provenance=provenance)


# ------------------------------------------------------------------
# text side
# ------------------------------------------------------------------

_TEXTURE_WORDS = {
    "polka dot": "polka_dot",
    "stripe": "stripe",
    "striped": "stripe",
    "checkerboard": "checkerboard",
    "paisley": "paisley",
}
_SHAPE_WORDS = {
    "letter l": "letter_L",
    "letter t": "letter_T",
    **{s: s for s in SHAPES if not s.startswith("letter")},
}


def _tokens(text: str) -> list[str]:
    return re.findall(r"[a-z]+", text.lower())


def embed_text(query: str) -> AttributeEmbedding:
    """Map a descriptive phrase onto the attribute slots.

    The first color word fills the primary slot and the second the
    secondary slot; unknown words are ignored so that queries with missing
    or misspelled characteristics still ground."""
    if not query:
        raise UnparsableQuery("empty query")
    toks = _tokens(query)
    joined = " ".join(toks)

    colors = [t for t in toks if t in COLOR_NAMES]
    texture = None
    for phrase, kind in _TEXTURE_WORDS.items():
        if phrase in joined:
            texture = kind
            break
    shape = None
    for phrase, name in _SHAPE_WORDS.items():
        if re.search(rf"\b{phrase}\b", joined):
            shape = name
            break

    if not colors and texture is None and shape is None and "object" not in toks:
        raise UnparsableQuery(f"no vocabulary hit in {query!r}")

    if texture is None:
        texture = "solid"
    color_ids = [COLOR_NAMES.index(c) for c in colors[:2]]
    if texture == "checkerboard" and len(color_ids) == 2:
        # a 50/50 pattern has no dominant color; canonicalize the order
        color_ids.sort()

    raw = np.zeros(EMBED_DIM)
    if color_ids:
        raw[color_ids[0]] = 1.0
        if len(color_ids) > 1:
            raw[_SECONDARY_OFFSET + color_ids[1]] = 1.0
    raw[_TEXTURE_OFFSET + TEXTURE_KINDS.index(texture)] = 1.0
    if shape is not None:
        raw[_SHAPE_OFFSET + SHAPES.index(shape)] = 1.0
    else:
        raw[_SHAPE_OFFSET : _SHAPE_OFFSET + N_SHAPE] = 1.0 / N_SHAPE
    return _normalize(raw, "text")


# ------------------------------------------------------------------
# image side
# ------------------------------------------------------------------

_PALETTE = np.array([COLORS[c] for c in COLOR_NAMES], dtype=np.float64)


def _foreground(crop_img: np.ndarray) -> np.ndarray:
    """Object pixels: away from both the table color and its shadow."""
    from .perception import FG_COLOR_DISTANCE

    fg = color_distance(crop_img, TABLE_COLOR) > FG_COLOR_DISTANCE
    fg &= color_distance(crop_img, shadow_color()) > FG_COLOR_DISTANCE
    return fg


def _dominant_colors(crop_img: np.ndarray, fg: np.ndarray):
    pix = crop_img[fg].astype(np.float64)
    d = ((pix[:, None, :] - _PALETTE[None, :, :]) ** 2).sum(axis=2)
    nearest = d.argmin(axis=1)
    counts = np.bincount(nearest, minlength=len(COLOR_NAMES))
    order = np.argsort(-counts, kind="stable")
    primary = int(order[0])
    secondary = None
    if counts[order[1]] >= max(8, 0.06 * len(pix)):
        secondary = int(order[1])
    return primary, secondary, nearest, counts


_PATTERN_AGREEMENT_MIN = 0.84


def _periodic_agreement(sec: np.ndarray, fg: np.ndarray, kind: str) -> float:
    """Best phase-aligned agreement between the secondary mask and the
    canonical periodic pattern of the given kind (a periodicity check at
    the pattern's own period)."""
    from .shapes import CHECKER_CELL_PX, STRIPE_PERIOD_PX

    h, w = fg.shape
    yy, xx = np.mgrid[0:h, 0:w]
    n_fg = fg.sum()
    best = 0.0
    if kind == "stripe":
        duty = 0.4 * STRIPE_PERIOD_PX
        for axis_grid in (xx, yy):
            for phase in range(STRIPE_PERIOD_PX):
                pattern = np.mod(axis_grid + phase, STRIPE_PERIOD_PX) < duty
                best = max(best, float((sec == pattern)[fg].sum()) / n_fg)
    elif kind == "checkerboard":
        c = CHECKER_CELL_PX
        for px in range(2 * c):
            for py in range(2 * c):
                pattern = (((xx + px) // c) + ((yy + py) // c)) % 2 == 0
                best = max(best, float((sec == pattern)[fg].sum()) / n_fg)
    else:
        raise ValueError(kind)
    return best


def _classify_texture(fg: np.ndarray, sec_mask: np.ndarray,
                      has_secondary: bool) -> str:
    """Rule order: stripes (periodic along an axis), polka dots (many small
    blobs), checkerboard (alternating grid), else paisley."""
    if not has_secondary:
        return "solid"
    if _periodic_agreement(sec_mask, fg, "stripe") >= _PATTERN_AGREEMENT_MIN:
        return "stripe"
    labels, n_blobs = ndimage.label(sec_mask, structure=EIGHT_CONNECTED)
    sec_total = float(sec_mask.sum())
    if n_blobs >= 4:
        sizes = np.asarray(
            ndimage.sum_labels(sec_mask, labels, range(1, n_blobs + 1))
        )
        small = sizes[sizes <= 0.08 * fg.sum()]
        if len(small) >= 4 and small.sum() >= 0.5 * sec_total:
            return "polka_dot"
    if _periodic_agreement(sec_mask, fg, "checkerboard") >= _PATTERN_AGREEMENT_MIN:
        return "checkerboard"
    return "paisley"


def _shape_descriptors(mask: np.ndarray) -> np.ndarray:
    """Five scale- and rotation-invariant silhouette descriptors:
    circularity, hole ratio, two moment invariants, and the spread of the
    outer boundary's radial profile."""
    m = mask.astype(bool)
    area = float(m.sum())
    filled = ndimage.binary_fill_holes(m)
    filled_area = float(filled.sum())
    hole_ratio = (filled_area - area) / filled_area if filled_area else 0.0

    struct = np.ones((3, 3), dtype=bool)
    boundary = m & ~ndimage.binary_erosion(m, structure=struct)
    perimeter = float(boundary.sum())
    circularity = 4.0 * np.pi * area / max(perimeter, 1.0) ** 2

    ys, xs = np.nonzero(m)
    x = xs - xs.mean()
    y = ys - ys.mean()

    def eta(p, q):
        return float(((x**p) * (y**q)).sum()) / area ** (1 + (p + q) / 2.0)

    hu1 = eta(2, 0) + eta(0, 2)
    hu2 = (eta(2, 0) - eta(0, 2)) ** 2 + 4 * eta(1, 1) ** 2

    outer = filled & ~ndimage.binary_erosion(filled, structure=struct)
    oy, ox = np.nonzero(outer)
    r = np.hypot(ox - ox.mean(), oy - oy.mean())
    radial_spread = float(r.std() / max(r.mean(), 1e-9))

    return np.array(
        [circularity, hole_ratio, np.log10(hu1 + 1e-12), np.log10(hu2 + 1e-12),
         radial_spread]
    )


@lru_cache(maxsize=1)
def _shape_prototypes():
    from .render import object_mask

    cam = default_camera()
    protos = {}
    for shape in SHAPES:
        obj = WorldObject(
            id=0, shape=shape, texture=TextureSpec("solid", "red"), x=0.5, y=0.0
        )
        mask = object_mask(obj, cam)
        ys, xs = np.nonzero(mask)
        local = mask[ys.min() : ys.max() + 1, xs.min() : xs.max() + 1]
        protos[shape] = _shape_descriptors(local)
    mat = np.stack([protos[s] for s in SHAPES])
    scale = mat.std(axis=0) + 1e-9
    return mat, scale


def _classify_shape(mask: np.ndarray) -> str:
    mat, scale = _shape_prototypes()
    d = _shape_descriptors(mask)
    dist = (((mat - d) / scale) ** 2).sum(axis=1)
    return SHAPES[int(dist.argmin())]


def embed_image(crop: ObjectCrop) -> AttributeEmbedding:
    """Classify a crop's colors, texture, and silhouette into the slots."""
    fg = _foreground(crop.image)
    if fg.sum() < MIN_CROP_FOREGROUND:
        raise EmptyCrop(f"crop has {int(fg.sum())} foreground pixels")

    primary, secondary, nearest, _ = _dominant_colors(crop.image, fg)
    sec_mask = np.zeros_like(fg)
    if secondary is not None:
        flat = np.zeros(fg.sum(), dtype=bool)
        flat[nearest == secondary] = True
        sec_mask[fg] = flat

    texture = _classify_texture(fg, sec_mask, secondary is not None)
    shape = _classify_shape(fg)
    if texture == "checkerboard" and secondary is not None and secondary < primary:
        primary, secondary = secondary, primary

    raw = np.zeros(EMBED_DIM)
    raw[primary] = 1.0
    if texture != "solid" and secondary is not None:
        raw[_SECONDARY_OFFSET + secondary] = 1.0
    raw[_TEXTURE_OFFSET + TEXTURE_KINDS.index(texture)] = 1.0
    raw[_SHAPE_OFFSET + SHAPES.index(shape)] = 1.0
    return _normalize(raw, "image")


# ------------------------------------------------------------------
# similarity, retrieval, matching
# ------------------------------------------------------------------


def cosine(a: AttributeEmbedding, b: AttributeEmbedding) -> float:
    return float(np.dot(a.vector, b.vector))


def _embed_query(query) -> AttributeEmbedding:
    if isinstance(query, str):
        return embed_text(query)
    if isinstance(query, ObjectCrop):
        return embed_image(query)
    if isinstance(query, np.ndarray):
        # a raw image patch, e.g. an instruction-template crop
        crop = ObjectCrop(
            image=query,
            bbox=(0, 0, query.shape[1] - 1, query.shape[0] - 1),
            source_index=-1,
        )
        return embed_image(crop)
    if isinstance(query, AttributeEmbedding):
        return query
    raise TypeError(f"unsupported query type {type(query).__name__}")


def retrieve(crops: list[ObjectCrop], query, exclusions=frozenset()) -> int:
    """Index of the crop most similar to the query, skipping exclusions;
    ties break toward the lowest index."""
    if not crops:
        raise ValueError("crops must be nonempty")
    candidates = [i for i in range(len(crops)) if i not in exclusions]
    if not candidates:
        raise AllExcluded("every crop index is excluded")
    q = _embed_query(query)
    best, best_sim = candidates[0], -1.0
    for i in candidates:
        sim = cosine(q, embed_image(crops[i]))
        if sim > best_sim + 1e-12:
            best, best_sim = i, sim
    return best


def solve_assignment(similarity: np.ndarray) -> tuple[list[int], list[int]]:
    """Maximum-total-similarity assignment over min(n, m) pairs."""
    rows, cols = linear_sum_assignment(similarity, maximize=True)
    return list(map(int, rows)), list(map(int, cols))


def match_objects(goal_crops: list[ObjectCrop],
                  obs_crops: list[ObjectCrop]) -> tuple[list[int], list[int]]:
    if not goal_crops or not obs_crops:
        raise ValueError("both crop lists must be nonempty")
    goal_emb = [embed_image(c) for c in goal_crops]
    obs_emb = [embed_image(c) for c in obs_crops]
    sim = np.array([[cosine(g, o) for o in obs_emb] for g in goal_emb])
    return solve_assignment(sim)


# ------------------------------------------------------------------
# optional remote embedder (drop-in for a live encoder service)
# ------------------------------------------------------------------


class RemoteEmbedder:
    """Client for the POST /embed protocol: {kind, payload} -> {vector}.

    The embedding dimension is negotiated at startup with a probe request.
    """

    def __init__(self, base_url: str, timeout: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.dim = len(self._post("text", "the red block"))

    def _post(self, kind: str, payload: str) -> list[float]:
        import requests

        resp = requests.post(
            f"{self.base_url}/embed",
            json={"kind": kind, "payload": payload},
            timeout=self.timeout,
        )
        resp.raise_for_status()
        return resp.json()["vector"]

    def embed_text(self, query: str) -> AttributeEmbedding:
        vec = np.asarray(self._post("text", query))
        return AttributeEmbedding(vector=vec / np.linalg.norm(vec), provenance="text")

    def embed_image(self, crop: ObjectCrop) -> AttributeEmbedding:
        from PIL import Image

        buf = io.BytesIO()
        Image.fromarray(crop.image, mode="RGB").save(buf, format="PNG")
        payload = base64.b64encode(buf.getvalue()).decode("ascii")
        vec = np.asarray(self._post("image", payload))
        return AttributeEmbedding(vector=vec / np.linalg.norm(vec), provenance="image")
