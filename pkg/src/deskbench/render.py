"""Top-down orthographic rendering of the tabletop world."""

from __future__ import annotations

import math

import numpy as np
from PIL import Image, ImageDraw

from .coords import IMAGE_SIZE, CameraTransform, default_camera
from .shapes import COLORS, shadow_color, texture_pattern
from .world import WorldObject, WorldState

SHADOW_OFFSET_PX = (4, 4)


def _polygon_pixel_verts(obj: WorldObject, cam: CameraTransform, ring):
    rad = math.radians(obj.yaw)
    c, s = math.cos(rad), math.sin(rad)
    verts = []
    for lx, ly in ring:
        wx = obj.x + c * lx - s * ly
        wy = obj.y + s * lx + c * ly
        px, py = cam.world_to_pixel(wx, wy)
        verts.append((float(px), float(py)))
    return verts


def object_mask(obj: WorldObject, cam: CameraTransform, size: int = IMAGE_SIZE) -> np.ndarray:
    """Boolean pixel mask of the object's visible region (holes cut out)."""
    img = Image.new("L", (size, size), 0)
    draw = ImageDraw.Draw(img)
    draw.polygon(_polygon_pixel_verts(obj, cam, obj.spec.outer), fill=1)
    if obj.spec.hole is not None:
        draw.polygon(_polygon_pixel_verts(obj, cam, obj.spec.hole), fill=0)
    return np.asarray(img, dtype=bool)


def _paint_texture(canvas: np.ndarray, mask: np.ndarray, obj: WorldObject,
                   cam: CameraTransform) -> None:
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        return
    cx, cy = cam.world_to_pixel(obj.x, obj.y)
    dx = xs.astype(float) - float(cx)
    dy = ys.astype(float) - float(cy)
    if obj.yaw:
        rad = math.radians(-obj.yaw)
        c, s = math.cos(rad), math.sin(rad)
        dx, dy = c * dx - s * dy, s * dx + c * dy
    spec = obj.spec
    wx = max(abs(v[0]) for v in spec.outer) / abs(cam.a00)
    wy = max(abs(v[1]) for v in spec.outer) / abs(cam.a11)
    sec = texture_pattern(obj.texture.kind, dx, dy, (wx, wy))
    primary = np.array(COLORS[obj.texture.primary_color], dtype=np.uint8)
    canvas[ys, xs] = primary
    if obj.texture.secondary_color is not None:
        secondary = np.array(COLORS[obj.texture.secondary_color], dtype=np.uint8)
        canvas[ys[sec], xs[sec]] = secondary


def render_observation(world: WorldState, shadows: bool = True,
                       cam: CameraTransform | None = None) -> np.ndarray:
    """Render a 256x256 RGB uint8 top-down view; deterministic given world."""
    cam = cam or default_camera(world.bounds)
    canvas = np.empty((IMAGE_SIZE, IMAGE_SIZE, 3), dtype=np.uint8)
    canvas[:] = np.array(world.table_color, dtype=np.uint8)

    objs = world.draw_order()
    masks = {o.id: object_mask(o, cam) for o in objs}

    if shadows:
        from scipy import ndimage

        sh = np.array(shadow_color(world.table_color), dtype=np.uint8)
        dx, dy = SHADOW_OFFSET_PX
        any_object = np.zeros((IMAGE_SIZE, IMAGE_SIZE), dtype=bool)
        shadow_area = np.zeros_like(any_object)
        near = np.ones((5, 5), dtype=bool)  # band hugs the silhouette
        for o in objs:
            m = masks[o.id]
            any_object |= m
            shifted = np.zeros_like(m)
            shifted[dy:, dx:] = m[: IMAGE_SIZE - dy, : IMAGE_SIZE - dx]
            shadow_area |= shifted & ndimage.binary_dilation(m, structure=near)
        shadow_area &= ~any_object
        canvas[shadow_area] = sh

    for o in objs:
        _paint_texture(canvas, masks[o.id], o, cam)
    return canvas


def save_png(image: np.ndarray, path) -> None:
    Image.fromarray(image, mode="RGB").save(path, format="PNG")


def png_bytes(image: np.ndarray) -> bytes:
    import io

    buf = io.BytesIO()
    Image.fromarray(image, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()
