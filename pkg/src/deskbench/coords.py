"""Workspace geometry: bounds, camera transform, robot actions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

IMAGE_SIZE = 256


class OutOfBounds(Exception):
    """A robot coordinate violates the workspace bounds."""


@dataclass(frozen=True)
class WorkspaceBounds:
    """Axis-aligned action-space box in meters."""

    x_min: float = 0.25
    x_max: float = 0.75
    y_min: float = -0.5
    y_max: float = 0.5

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError("bounds must satisfy min < max per axis")

    def clamp(self, x: float, y: float) -> tuple[float, float]:
        return (
            min(max(x, self.x_min), self.x_max),
            min(max(y, self.y_min), self.y_max),
        )

    def contains(self, x: float, y: float, eps: float = 1e-9) -> bool:
        return (
            self.x_min - eps <= x <= self.x_max + eps
            and self.y_min - eps <= y <= self.y_max + eps
        )

    def to_dict(self) -> dict:
        return {"x": [self.x_min, self.x_max], "y": [self.y_min, self.y_max]}


@dataclass(frozen=True)
class CameraTransform:
    """Affine pixel -> robot mapping: q = A @ p + b, with A in meters/pixel.

    Pixel coordinates are (px, py) where px indexes image columns and py
    indexes image rows.
    """

    a00: float
    a01: float
    a10: float
    a11: float
    b0: float
    b1: float

    def __post_init__(self):
        if abs(self.det()) < 1e-12:
            raise ValueError("camera transform must be invertible")

    def det(self) -> float:
        return self.a00 * self.a11 - self.a01 * self.a10

    def pixel_to_world(self, px, py):
        x = self.a00 * np.asarray(px) + self.a01 * np.asarray(py) + self.b0
        y = self.a10 * np.asarray(px) + self.a11 * np.asarray(py) + self.b1
        return x, y

    def world_to_pixel(self, x, y):
        d = self.det()
        u = np.asarray(x) - self.b0
        v = np.asarray(y) - self.b1
        px = (self.a11 * u - self.a01 * v) / d
        py = (-self.a10 * u + self.a00 * v) / d
        return px, py


def default_camera(bounds: WorkspaceBounds | None = None) -> CameraTransform:
    """Camera mapping the full image extent onto the workspace box."""
    b = bounds or WorkspaceBounds()
    return CameraTransform(
        a00=(b.x_max - b.x_min) / IMAGE_SIZE,
        a01=0.0,
        a10=0.0,
        a11=(b.y_max - b.y_min) / IMAGE_SIZE,
        b0=b.x_min,
        b1=b.y_min,
    )


def normalize_yaw(deg: float) -> float:
    """Normalize an angle in degrees to (-180, 180]."""
    d = math.fmod(deg, 360.0)
    if d <= -180.0:
        d += 360.0
    elif d > 180.0:
        d -= 360.0
    return d


def yaw_distance(a: float, b: float) -> float:
    """Smallest absolute angular difference between two yaws in degrees."""
    return abs(normalize_yaw(a - b))


@dataclass(frozen=True)
class RobotAction:
    """One pick-and-place (or pure rotation when pick == place)."""

    pick: tuple[float, float]
    place: tuple[float, float]
    yaw_degrees: float = 0.0
    tool: str = "suction"

    def __post_init__(self):
        if self.tool not in ("suction", "spatula"):
            raise ValueError(f"unknown tool {self.tool!r}")
        object.__setattr__(self, "yaw_degrees", normalize_yaw(self.yaw_degrees))

    def is_rotation(self, eps: float = 1e-12) -> bool:
        return (
            abs(self.pick[0] - self.place[0]) < eps
            and abs(self.pick[1] - self.place[1]) < eps
        )
