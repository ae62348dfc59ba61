"""Object vocabulary: shape footprints, color palette, texture specs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SHAPES = (
    "block",
    "round",
    "pan",
    "bowl",
    "container",
    "frame",
    "letter_L",
    "letter_T",
    "star",
    "flower",
)

TEXTURE_KINDS = ("solid", "polka_dot", "stripe", "checkerboard", "paisley")

# 12 canonical colors. Chosen so that no color falls in the renderer's
# shadow classification band (hue within 15 degrees of the table hue AND
# luminance below the shadow ratio); see tests/test_shapes.py.
COLORS: dict[str, tuple[int, int, int]] = {
    "red": (230, 25, 25),
    "orange": (255, 160, 20),
    "yellow": (245, 230, 30),
    "olive": (130, 130, 10),
    "green": (40, 180, 50),
    "teal": (20, 150, 150),
    "cyan": (45, 215, 235),
    "blue": (35, 70, 230),
    "navy": (25, 25, 120),
    "purple": (150, 60, 210),
    "magenta": (225, 50, 200),
    "pink": (250, 130, 180),
}
COLOR_NAMES = tuple(COLORS)

TABLE_COLOR = (191, 166, 133)
SHADOW_LUMINANCE = 0.55


def shadow_color(table=TABLE_COLOR) -> tuple[int, int, int]:
    return tuple(int(round(c * SHADOW_LUMINANCE)) for c in table)


def rgb_luminance(rgb) -> float:
    r, g, b = (float(c) for c in rgb)
    return 0.299 * r + 0.587 * g + 0.114 * b


def rgb_hue(rgb) -> float:
    """Hue in degrees [0, 360); 0 for achromatic colors."""
    r, g, b = (float(c) / 255.0 for c in rgb)
    mx, mn = max(r, g, b), min(r, g, b)
    d = mx - mn
    if d == 0:
        return 0.0
    if mx == r:
        h = ((g - b) / d) % 6.0
    elif mx == g:
        h = (b - r) / d + 2.0
    else:
        h = (r - g) / d + 4.0
    return 60.0 * h


@dataclass(frozen=True)
class TextureSpec:
    kind: str
    primary_color: str
    secondary_color: str | None = None

    def __post_init__(self):
        if self.kind not in TEXTURE_KINDS:
            raise ValueError(f"unknown texture kind {self.kind!r}")
        if self.primary_color not in COLORS:
            raise ValueError(f"unknown color {self.primary_color!r}")
        if self.kind == "solid":
            if self.secondary_color is not None:
                raise ValueError("solid textures carry no secondary color")
        else:
            if self.secondary_color not in COLORS:
                raise ValueError("patterned textures need a secondary color")

    def description(self) -> str:
        """Canonical texture phrase, e.g. 'green and purple polka dot'."""
        if self.kind == "solid":
            return self.primary_color
        kind_word = self.kind.replace("_", " ")
        return f"{self.primary_color} and {self.secondary_color} {kind_word}"


def shape_word(shape: str) -> str:
    return {"letter_L": "letter L", "letter_T": "letter T"}.get(shape, shape)


def object_description(shape: str, texture: TextureSpec) -> str:
    return f"the {texture.description()} {shape_word(shape)}"


def _regular_polygon(r: float, n: int = 28) -> list[tuple[float, float]]:
    return [
        (r * math.cos(2 * math.pi * k / n), r * math.sin(2 * math.pi * k / n))
        for k in range(n)
    ]


def _rect(cx, cy, hw, hh):
    return [(cx - hw, cy - hh), (cx + hw, cy - hh), (cx + hw, cy + hh), (cx - hw, cy + hh)]


def _star(r_out: float, r_in: float, points: int = 5):
    verts = []
    for k in range(points * 2):
        r = r_out if k % 2 == 0 else r_in
        a = math.pi / 2 + math.pi * k / points
        verts.append((r * math.cos(a), r * math.sin(a)))
    return verts


def _flower(r0: float, amp: float, n: int = 60):
    verts = []
    for k in range(n):
        a = 2 * math.pi * k / n
        r = r0 + amp * math.cos(6 * a)
        verts.append((r * math.cos(a), r * math.sin(a)))
    return verts


def _polygon_centroid(verts) -> tuple[float, float]:
    xs = np.array([v[0] for v in verts])
    ys = np.array([v[1] for v in verts])
    x2, y2 = np.roll(xs, -1), np.roll(ys, -1)
    cross = xs * y2 - x2 * ys
    area = cross.sum() / 2.0
    cx = ((xs + x2) * cross).sum() / (6.0 * area)
    cy = ((ys + y2) * cross).sum() / (6.0 * area)
    return float(cx), float(cy)


def _recenter(verts):
    cx, cy = _polygon_centroid(verts)
    return [(x - cx, y - cy) for x, y in verts]


@dataclass(frozen=True)
class ShapeSpec:
    """Local footprint geometry in meters, centered on its centroid.

    ``outer`` is the movable footprint polygon; ``hole`` (optional) is a
    table-visible interior cut (bowls, containers, frames) that affects the
    rendered mask but not the footprint.
    """

    name: str
    outer: tuple[tuple[float, float], ...]
    hole: tuple[tuple[float, float], ...] | None = None

    def scaled(self, scale: float) -> "ShapeSpec":
        if scale == 1.0:
            return self
        outer = tuple((x * scale, y * scale) for x, y in self.outer)
        hole = None
        if self.hole is not None:
            hole = tuple((x * scale, y * scale) for x, y in self.hole)
        return ShapeSpec(self.name, outer, hole)

    def bounding_radius(self) -> float:
        return max(math.hypot(x, y) for x, y in self.outer)


def _letter_l():
    # vertical bar plus foot, chunky enough that the centroid stays inside
    verts = [
        (0.0, 0.0),
        (0.048, 0.0),
        (0.048, 0.020),
        (0.020, 0.020),
        (0.020, 0.066),
        (0.0, 0.066),
    ]
    return _recenter(verts)


def _letter_t():
    verts = [
        (0.0, 0.0),
        (0.058, 0.0),
        (0.058, 0.022),
        (0.040, 0.022),
        (0.040, 0.064),
        (0.018, 0.064),
        (0.018, 0.022),
        (0.0, 0.022),
    ]
    return _recenter(verts)


def _pan():
    disc = _regular_polygon(0.034)
    # splice a handle into the disc outline on the +x side
    verts = []
    for x, y in disc:
        verts.append((x, y))
        if abs(y) < 1e-9 and x > 0:
            verts.extend(
                [(x, -0.007), (x + 0.03, -0.007), (x + 0.03, 0.007), (x, 0.007)]
            )
    return _recenter(verts)


@lru_cache(maxsize=1)
def shape_catalog() -> dict[str, ShapeSpec]:
    cat = {
        "block": ShapeSpec("block", tuple(_rect(0, 0, 0.032, 0.032))),
        "round": ShapeSpec("round", tuple(_regular_polygon(0.034))),
        "pan": ShapeSpec("pan", tuple(_pan())),
        "bowl": ShapeSpec(
            "bowl",
            tuple(_regular_polygon(0.040)),
            tuple(_regular_polygon(0.016)),
        ),
        "container": ShapeSpec(
            "container",
            tuple(_rect(0, 0, 0.055, 0.055)),
            tuple(_rect(0, 0, 0.034, 0.034)),
        ),
        "frame": ShapeSpec(
            "frame",
            tuple(_rect(0, 0, 0.055, 0.055)),
            tuple(_rect(0, 0, 0.043, 0.043)),
        ),
        "letter_L": ShapeSpec("letter_L", tuple(_letter_l())),
        "letter_T": ShapeSpec("letter_T", tuple(_letter_t())),
        "star": ShapeSpec("star", tuple(_star(0.040, 0.018))),
        "flower": ShapeSpec("flower", tuple(_flower(0.033, 0.006))),
    }
    return cat


# ------------------------------------------------------------------
# Texture patterns, evaluated in pixel-projected local coordinates so
# that dots stay round and stripes stay even under the anisotropic
# camera. (dx, dy) are pixel offsets from the object's center pixel in
# the object's local (unrotated) frame.
# ------------------------------------------------------------------

STRIPE_PERIOD_PX = 10
CHECKER_CELL_PX = 4
DOT_PITCH_PX = 6
DOT_RADIUS_PX = 1.6


def texture_pattern(kind: str, dx: np.ndarray, dy: np.ndarray, half_extent_px):
    """Boolean array: True where the secondary color is painted."""
    if kind == "solid":
        return np.zeros(dx.shape, dtype=bool)
    if kind == "stripe":
        # 40/60 duty cycle keeps the primary color dominant by pixel count
        return np.mod(dx, STRIPE_PERIOD_PX) < 0.4 * STRIPE_PERIOD_PX
    if kind == "checkerboard":
        return (
            np.floor(dx / CHECKER_CELL_PX).astype(int)
            + np.floor(dy / CHECKER_CELL_PX).astype(int)
        ) % 2 == 0
    if kind == "polka_dot":
        gx = dx - np.round(dx / DOT_PITCH_PX) * DOT_PITCH_PX
        gy = dy - np.round(dy / DOT_PITCH_PX) * DOT_PITCH_PX
        return gx * gx + gy * gy <= DOT_RADIUS_PX**2
    if kind == "paisley":
        # three fixed blobs on a diagonal chain: projections are distinct on
        # both axes (no stripe-like dominance) and the outer blobs land on
        # ring-shaped bodies too
        wx, wy = half_extent_px
        out = np.zeros(dx.shape, dtype=bool)
        for (ox, oy, rx, ry) in (
            (-0.60, -0.52, 0.28, 0.26),
            (0.05, 0.02, 0.26, 0.28),
            (0.60, 0.55, 0.28, 0.25),
        ):
            ex = (dx - ox * wx) / max(rx * wx, 1.2)
            ey = (dy - oy * wy) / max(ry * wy, 1.2)
            out |= ex * ex + ey * ey <= 1.0
        return out
    raise ValueError(f"unknown texture kind {kind!r}")
