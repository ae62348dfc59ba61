"""Deterministic 2D tabletop world state and pick/place/rotate kinematics."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

from shapely.geometry import Point, Polygon

from .coords import RobotAction, WorkspaceBounds, normalize_yaw
from .shapes import ShapeSpec, TextureSpec, shape_catalog


@dataclass
class WorldObject:
    """One rigid object on the table."""

    id: int
    shape: str
    texture: TextureSpec
    x: float
    y: float
    yaw: float = 0.0
    scale: float = 1.0
    movable: bool = True

    def __post_init__(self):
        if self.shape not in shape_catalog():
            raise ValueError(f"unknown shape {self.shape!r}")

    @property
    def spec(self) -> ShapeSpec:
        return shape_catalog()[self.shape].scaled(self.scale)

    def footprint(self) -> Polygon:
        """World-frame footprint polygon (outer boundary, holes ignored)."""
        rad = math.radians(self.yaw)
        c, s = math.cos(rad), math.sin(rad)
        pts = [
            (self.x + c * px - s * py, self.y + s * px + c * py)
            for px, py in self.spec.outer
        ]
        return Polygon(pts)

    def contains_point(self, x: float, y: float) -> bool:
        poly = self.footprint()
        return poly.contains(Point(x, y)) or poly.touches(Point(x, y))

    def pose(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.yaw)


Snapshot = tuple[tuple[int, float, float, float], ...]


@dataclass
class HistoryEntry:
    action: RobotAction
    picked_id: int | None
    poses: Snapshot


@dataclass
class WorldState:
    """Value-typed simulator truth; mutate only through :func:`step`."""

    objects: list[WorldObject]
    bounds: WorkspaceBounds = field(default_factory=WorkspaceBounds)
    table_color: tuple[int, int, int] = (191, 166, 133)
    step_count: int = 0
    history: list[HistoryEntry] = field(default_factory=list)
    z_order: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.z_order:
            self.z_order = [o.id for o in self.objects]

    def clone(self) -> "WorldState":
        return copy.deepcopy(self)

    def get(self, obj_id: int) -> WorldObject:
        for o in self.objects:
            if o.id == obj_id:
                return o
        raise KeyError(obj_id)

    def snapshot(self) -> Snapshot:
        return tuple(
            (o.id, o.x, o.y, o.yaw) for o in sorted(self.objects, key=lambda o: o.id)
        )

    def draw_order(self) -> list[WorldObject]:
        """Objects bottom-to-top."""
        return [self.get(i) for i in self.z_order]

    def top_object_at(self, x: float, y: float) -> WorldObject | None:
        """Topmost movable object whose footprint contains the point."""
        for obj_id in reversed(self.z_order):
            obj = self.get(obj_id)
            if obj.movable and obj.contains_point(x, y):
                return obj
        return None


@dataclass(frozen=True)
class StepResult:
    picked: bool
    world: WorldState


def step(world: WorldState, action: RobotAction) -> StepResult:
    """Apply one action in place; the world history is appended either way.

    Raises OutOfBounds if a coordinate escapes the workspace: actions are
    clamped upstream, so this signals an action-bridge bug.
    """
    from .coords import OutOfBounds

    for x, y in (action.pick, action.place):
        if not world.bounds.contains(x, y):
            raise OutOfBounds(f"action coordinate ({x:.4f}, {y:.4f}) outside bounds")

    target = world.top_object_at(*action.pick)
    picked = target is not None
    if picked:
        if action.is_rotation():
            target.yaw = normalize_yaw(target.yaw + action.yaw_degrees)
        else:
            target.x, target.y = action.place
            target.yaw = normalize_yaw(target.yaw + action.yaw_degrees)
        world.z_order.remove(target.id)
        world.z_order.append(target.id)

    world.step_count += 1
    world.history.append(
        HistoryEntry(
            action=action,
            picked_id=target.id if picked else None,
            poses=world.snapshot(),
        )
    )
    return StepResult(picked=picked, world=world)
