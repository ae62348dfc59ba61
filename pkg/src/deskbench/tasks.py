"""Task generation for the six meta-tasks at levels L1-L3, plus scoring."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import Point

from .coords import IMAGE_SIZE, WorkspaceBounds, default_camera, yaw_distance
from .prompts import InstructionBundle
from .render import object_mask, render_observation
from .shapes import (
    COLOR_NAMES,
    SHAPES,
    TEXTURE_KINDS,
    TextureSpec,
    object_description,
    shape_catalog,
)
from .world import WorldObject, WorldState

META_TASKS = {
    "T01": "visual_manipulation",
    "T02": "scene_understanding",
    "T03": "rotation",
    "T04": "rearrange",
    "T05": "rearrange_restore",
    "T17": "pick_order_restore",
}
LEVELS = ("L1", "L2", "L3")

POSITION_TOLERANCE = 0.03   # meters
YAW_TOLERANCE = 15.0        # degrees
ROTATION_DRIFT_TOLERANCE = 0.02  # meters; rotation must not translate

DRAG_SHAPES = {
    "L1": ("block", "round", "pan"),
    "L2": ("block", "round", "pan"),
    "L3": ("letter_L", "letter_T", "star", "flower"),
}
BASE_SHAPES = {
    "L1": ("container", "bowl"),
    "L2": ("container", "bowl"),
    "L3": ("frame",),
}
# nested start (T17) needs a roomy home and a compact dragged object
HOME_SHAPES = {"L1": "container", "L2": "container", "L3": "frame"}
COMPACT_DRAG_SHAPES = {
    "L1": ("block", "round"),
    "L2": ("block", "round"),
    "L3": ("star", "letter_L", "letter_T", "flower"),
}
HOME_SCALE = 1.4
NESTED_SCALE = 0.8

ROTATION_CHOICES = (30, 60, 90, 120, 150)


def allowed_texture_kinds(shape: str, level: str) -> tuple[str, ...]:
    """Level-specific shape x texture pairing tables.

    Frames are thin-walled and always solid. L1 and L2 split the pairing
    table into disjoint halves (combinatorial novelty); L3's novelty is the
    shape set itself, so every kind is allowed there.
    """
    if shape == "frame":
        return ("solid",)
    if level == "L3":
        return TEXTURE_KINDS
    si = SHAPES.index(shape)
    want = 0 if level == "L1" else 1
    return tuple(
        k for i, k in enumerate(TEXTURE_KINDS) if (si + i) % 2 == want
    )


@dataclass
class GoalSpec:
    dragged_id: int | None = None
    base_id: int | None = None
    target_yaw_delta: float | None = None
    angle_text: str | None = None           # instruction wording, e.g. "60 degrees"
    target_poses: dict[int, tuple[float, float, float]] = field(default_factory=dict)
    container_order: list[int] = field(default_factory=list)
    home_id: int | None = None


@dataclass
class TaskInstance:
    meta_task: str
    level: str
    seed: int
    instruction: InstructionBundle
    goal: GoalSpec
    initial_world: WorldState
    variants: dict[str, InstructionBundle] = field(default_factory=dict)
    scene_world: WorldState | None = None

    def instruction_for(self, modality: str) -> InstructionBundle:
        """Bundle for the requested modality, falling back to the default
        (scene-image tasks have no pure-language form)."""
        return self.variants.get(modality) or self.instruction


class SceneLayoutError(Exception):
    """Rejection sampling could not place the scene (generator bug)."""


# ------------------------------------------------------------------
# scene composition helpers
# ------------------------------------------------------------------

_PLACE_MARGIN = 0.04
_PLACE_GAP = 0.025


def _radius(shape: str, scale: float = 1.0) -> float:
    return shape_catalog()[shape].scaled(scale).bounding_radius()


def _sample_pose(rng, bounds: WorkspaceBounds, radius: float,
                 keepout: list[tuple[float, float, float]],
                 attempts: int = 3000) -> tuple[float, float]:
    lo_x = bounds.x_min + radius + _PLACE_MARGIN
    hi_x = bounds.x_max - radius - _PLACE_MARGIN
    lo_y = bounds.y_min + radius + _PLACE_MARGIN
    hi_y = bounds.y_max - radius - _PLACE_MARGIN
    for _ in range(attempts):
        x = rng.uniform(lo_x, hi_x)
        y = rng.uniform(lo_y, hi_y)
        if all(
            math.hypot(x - kx, y - ky) >= radius + kr + _PLACE_GAP
            for kx, ky, kr in keepout
        ):
            return x, y
    raise SceneLayoutError("could not place object")


def _sample_texture(rng, shape: str, level: str,
                    used: set[tuple], scene_used_textures: set[tuple] | None = None,
                    forbid_primary: set[str] | None = None) -> TextureSpec:
    kinds = allowed_texture_kinds(shape, level)
    for _ in range(500):
        kind = kinds[int(rng.integers(len(kinds)))]
        primary = COLOR_NAMES[int(rng.integers(len(COLOR_NAMES)))]
        if forbid_primary and primary in forbid_primary:
            continue
        secondary = None
        if kind != "solid":
            secondary = COLOR_NAMES[int(rng.integers(len(COLOR_NAMES)))]
            if secondary == primary:
                continue
        tex = TextureSpec(kind, primary, secondary)
        key = (shape, kind, primary, secondary)
        tex_key = (kind, primary, secondary)
        if key in used:
            continue
        if scene_used_textures is not None and tex_key in scene_used_textures:
            continue
        used.add(key)
        if scene_used_textures is not None:
            scene_used_textures.add(tex_key)
        return tex
    raise SceneLayoutError("could not sample a distinct texture")


class _SceneBuilder:
    def __init__(self, rng, bounds: WorkspaceBounds):
        self.rng = rng
        self.bounds = bounds
        self.objects: list[WorldObject] = []
        self.keepout: list[tuple[float, float, float]] = []
        self.used_keys: set[tuple] = set()
        self.used_textures: set[tuple] = set()

    def add(self, shape: str, level: str, scale: float = 1.0,
            at: tuple[float, float] | None = None,
            forbid_primary: set[str] | None = None,
            unique_texture: bool = False,
            keepout_extra: list[tuple[float, float, float]] | None = None) -> WorldObject:
        r = _radius(shape, scale)
        tex = _sample_texture(
            self.rng, shape, level, self.used_keys,
            self.used_textures if unique_texture else None,
            forbid_primary,
        )
        if at is None:
            ko = self.keepout + (keepout_extra or [])
            x, y = _sample_pose(self.rng, self.bounds, r, ko)
        else:
            x, y = at
        obj = WorldObject(
            id=len(self.objects), shape=shape, texture=tex, x=x, y=y, scale=scale
        )
        self.objects.append(obj)
        if at is None:
            self.keepout.append((x, y, r))
        return obj

    def world(self) -> WorldState:
        return WorldState(objects=self.objects, bounds=self.bounds)


# ------------------------------------------------------------------
# instruction bundles
# ------------------------------------------------------------------


def render_object_asset(obj: WorldObject) -> np.ndarray:
    """Clean crop of a single object for instruction templates."""
    lone = WorldObject(
        id=0, shape=obj.shape, texture=obj.texture, x=0.5, y=0.0, scale=obj.scale
    )
    world = WorldState(objects=[lone])
    img = render_observation(world, shadows=False)
    mask = object_mask(lone, default_camera(world.bounds))
    ys, xs = np.nonzero(mask)
    x0, x1 = int(xs.min()), int(xs.max())
    y0, y1 = int(ys.min()), int(ys.max())
    return img[y0 : y1 + 1, x0 : x1 + 1].copy()


def _pixel_of(obj: WorldObject, bounds: WorkspaceBounds) -> tuple[int, int]:
    """Simulated click: the rendered-mask pixel nearest the centroid (ring
    shapes have table showing through at the centroid itself)."""
    cam = default_camera(bounds)
    px, py = cam.world_to_pixel(obj.x, obj.y)
    mask = object_mask(obj, cam)
    ys, xs = np.nonzero(mask)
    d2 = (xs - float(px)) ** 2 + (ys - float(py)) ** 2
    k = int(np.argmin(d2))
    return int(xs[k]), int(ys[k])


def _describe(obj: WorldObject) -> str:
    return object_description(obj.shape, obj.texture)


# ------------------------------------------------------------------
# per-task builders
# ------------------------------------------------------------------


def _build_t01(rng, level, bounds):
    sb = _SceneBuilder(rng, bounds)
    base = sb.add(rng.choice(BASE_SHAPES[level]), level)
    dragged = sb.add(rng.choice(DRAG_SHAPES[level]), level)
    for _ in range(int(rng.integers(1, 3))):
        sb.add(rng.choice(DRAG_SHAPES[level]), level)
    world = sb.world()
    goal = GoalSpec(dragged_id=dragged.id, base_id=base.id)

    pure = InstructionBundle(
        kind="pure_language",
        text=f"Put {_describe(dragged)} into {_describe(base)}.",
    )
    multi = InstructionBundle(
        kind="multimodal",
        text="Put the {dragged_obj} into the {base_obj}.",
        assets={
            "dragged_obj": render_object_asset(dragged),
            "base_obj": render_object_asset(base),
        },
    )
    pointing = InstructionBundle(
        kind="pointing",
        text=f"Put {_describe(dragged)} into {_describe(base)}.",
        points=[_pixel_of(dragged, bounds), _pixel_of(base, bounds)],
    )
    variants = {"pure_language": pure, "multimodal": multi, "pointing": pointing}
    return world, goal, multi, variants, None


def _build_t02(rng, level, bounds):
    sb = _SceneBuilder(rng, bounds)
    # the base is referenced as "the <color> object": solid, with a primary
    # color reserved so no other observed object shares it
    base_shape = rng.choice(BASE_SHAPES[level])
    base_color = COLOR_NAMES[int(rng.integers(len(COLOR_NAMES)))]
    r = _radius(base_shape)
    bx, by = _sample_pose(rng, bounds, r, sb.keepout)
    base = WorldObject(
        id=0, shape=base_shape, texture=TextureSpec("solid", base_color), x=bx, y=by
    )
    sb.objects.append(base)
    sb.keepout.append((bx, by, r))
    sb.used_keys.add((base_shape, "solid", base_color, None))
    sb.used_textures.add(("solid", base_color, None))

    dragged = sb.add(
        rng.choice(DRAG_SHAPES[level]), level,
        forbid_primary={base_color}, unique_texture=True,
    )
    for _ in range(int(rng.integers(1, 3))):
        sb.add(
            rng.choice(DRAG_SHAPES[level]), level,
            forbid_primary={base_color}, unique_texture=True,
        )
    world = sb.world()

    # instruction scene: the dragged object at a different pose plus extras
    scene_sb = _SceneBuilder(rng, bounds)
    scene_sb.used_keys = set(sb.used_keys)
    scene_sb.used_textures = set(sb.used_textures)
    scene_dragged = WorldObject(
        id=0, shape=dragged.shape, texture=dragged.texture,
        x=0.0, y=0.0, scale=dragged.scale,
    )
    r = _radius(dragged.shape, dragged.scale)
    scene_dragged.x, scene_dragged.y = _sample_pose(rng, bounds, r, [])
    scene_sb.objects.append(scene_dragged)
    scene_sb.keepout.append((scene_dragged.x, scene_dragged.y, r))
    for _ in range(int(rng.integers(1, 3))):
        scene_sb.add(rng.choice(DRAG_SHAPES[level]), level, unique_texture=True)
    scene_world = scene_sb.world()

    goal = GoalSpec(dragged_id=dragged.id, base_id=base.id)
    multi = InstructionBundle(
        kind="multimodal",
        text=(
            f"Put the {dragged.texture.description()} object in {{scene}} "
            f"into the {base.texture.primary_color} object."
        ),
        assets={"scene": render_observation(scene_world)},
    )
    return world, goal, multi, {"multimodal": multi}, scene_world


def _build_t03(rng, level, bounds):
    sb = _SceneBuilder(rng, bounds)
    dragged = sb.add(rng.choice(DRAG_SHAPES[level]), level)
    for _ in range(int(rng.integers(1, 3))):
        sb.add(rng.choice(DRAG_SHAPES[level]), level)
    world = sb.world()

    target = int(rng.choice(ROTATION_CHOICES))
    use_radians = bool(rng.random() < 0.25)
    if use_radians:
        angle_text = f"{round(math.radians(target), 4)} radians"
    else:
        angle_text = f"{target} degrees"
    goal = GoalSpec(
        dragged_id=dragged.id, target_yaw_delta=float(target), angle_text=angle_text
    )

    pure = InstructionBundle(
        kind="pure_language",
        text=f"Rotate {_describe(dragged)} {angle_text}.",
    )
    multi = InstructionBundle(
        kind="multimodal",
        text=f"Rotate the {{dragged_obj}} {angle_text}.",
        assets={"dragged_obj": render_object_asset(dragged)},
    )
    pointing = InstructionBundle(
        kind="pointing",
        text=f"Rotate {_describe(dragged)} {angle_text}.",
        points=[_pixel_of(dragged, bounds)],
    )
    variants = {"pure_language": pure, "multimodal": multi, "pointing": pointing}
    return world, goal, multi, variants, None


def _build_rearrange(rng, level, bounds, restore: bool):
    sb = _SceneBuilder(rng, bounds)
    n_goal = int(rng.integers(2, 4))
    goal_objs = [sb.add(rng.choice(DRAG_SHAPES[level]), level) for _ in range(n_goal)]

    # goal poses: clear of every initial pose and of each other so the
    # rearrangement is swap-free
    target_poses: dict[int, tuple[float, float, float]] = {}
    goal_keepout = list(sb.keepout)
    for obj in goal_objs:
        r = _radius(obj.shape, obj.scale)
        gx, gy = _sample_pose(rng, bounds, r, goal_keepout)
        goal_keepout.append((gx, gy, r))
        target_poses[obj.id] = (gx, gy, 0.0)

    n_distr = int(rng.integers(1, 3))
    for k in range(n_distr):
        shape = rng.choice(DRAG_SHAPES[level])
        if k == 0 and rng.random() < 0.6:
            # conflicting distractor: parked on a goal pose
            victim = goal_objs[int(rng.integers(n_goal))]
            gx, gy, _ = target_poses[victim.id]
            ox = float(rng.uniform(-0.008, 0.008))
            oy = float(rng.uniform(-0.008, 0.008))
            sb.add(shape, level, at=(gx + ox, gy + oy))
        else:
            sb.add(shape, level, keepout_extra=goal_keepout)
    world = sb.world()

    scene_objs = [
        WorldObject(
            id=o.id, shape=o.shape, texture=o.texture,
            x=target_poses[o.id][0], y=target_poses[o.id][1],
            yaw=target_poses[o.id][2], scale=o.scale,
        )
        for o in goal_objs
    ]
    scene_world = WorldState(objects=scene_objs, bounds=bounds)

    goal = GoalSpec(target_poses=target_poses)
    text = "Rearrange to this {scene} then restore." if restore else "Rearrange to this {scene}."
    multi = InstructionBundle(
        kind="multimodal", text=text,
        assets={"scene": render_observation(scene_world)},
    )
    return world, goal, multi, {"multimodal": multi}, scene_world


def _build_t17(rng, level, bounds):
    sb = _SceneBuilder(rng, bounds)
    home = sb.add(HOME_SHAPES[level], level, scale=HOME_SCALE)
    dragged = sb.add(
        rng.choice(COMPACT_DRAG_SHAPES[level]), level,
        scale=NESTED_SCALE, at=(home.x, home.y),
    )
    base_1 = sb.add(rng.choice(BASE_SHAPES[level]), level)
    base_2 = sb.add(rng.choice(BASE_SHAPES[level]), level)
    if rng.random() < 0.5:
        sb.add(rng.choice(COMPACT_DRAG_SHAPES[level]), level, scale=NESTED_SCALE)
    world = sb.world()

    goal = GoalSpec(
        dragged_id=dragged.id,
        home_id=home.id,
        container_order=[base_1.id, base_2.id, home.id],
    )
    pure = InstructionBundle(
        kind="pure_language",
        text=(
            f"Put {_describe(dragged)} into {_describe(base_1)} then "
            f"{_describe(base_2)}. Finally restore it into its original container."
        ),
    )
    multi = InstructionBundle(
        kind="multimodal",
        text=(
            "Put the {dragged_obj} into the {base_obj_1} then {base_obj_2}. "
            "Finally restore it into its original container."
        ),
        assets={
            "dragged_obj": render_object_asset(dragged),
            "base_obj_1": render_object_asset(base_1),
            "base_obj_2": render_object_asset(base_2),
        },
    )
    variants = {"pure_language": pure, "multimodal": multi}
    return world, goal, multi, variants, None


_BUILDERS = {
    "T01": _build_t01,
    "T02": _build_t02,
    "T03": _build_t03,
    "T04": lambda rng, level, bounds: _build_rearrange(rng, level, bounds, False),
    "T05": lambda rng, level, bounds: _build_rearrange(rng, level, bounds, True),
    "T17": _build_t17,
}


def generate_task(meta_task: str, level: str, seed: int) -> TaskInstance:
    """Deterministically build a task instance; total over all valid inputs."""
    if meta_task not in META_TASKS:
        raise ValueError(f"unknown meta task {meta_task!r}")
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}")
    mt_index = list(META_TASKS).index(meta_task)
    lvl_index = LEVELS.index(level)
    bounds = WorkspaceBounds()
    for restart in range(20):
        rng = np.random.default_rng(
            np.random.SeedSequence([int(seed), mt_index, lvl_index, restart])
        )
        try:
            world, goal, default, variants, scene_world = _BUILDERS[meta_task](
                rng, level, bounds
            )
        except SceneLayoutError:
            continue
        return TaskInstance(
            meta_task=meta_task,
            level=level,
            seed=int(seed),
            instruction=default,
            goal=goal,
            initial_world=world,
            variants=variants,
            scene_world=scene_world,
        )
    raise SceneLayoutError(f"layout failed for {meta_task}/{level}/seed={seed}")


# ------------------------------------------------------------------
# success checking
# ------------------------------------------------------------------


def _pose_close(pose, target, pos_tol=POSITION_TOLERANCE, yaw_tol=YAW_TOLERANCE) -> bool:
    dx = pose[0] - target[0]
    dy = pose[1] - target[1]
    if math.hypot(dx, dy) > pos_tol:
        return False
    return yaw_distance(pose[2], target[2]) <= yaw_tol


def _poses_from_snapshot(snapshot) -> dict[int, tuple[float, float, float]]:
    return {oid: (x, y, yaw) for oid, x, y, yaw in snapshot}


def _snapshot_matches(snapshot, target_poses) -> bool:
    poses = _poses_from_snapshot(snapshot)
    return all(
        oid in poses and _pose_close(poses[oid], tgt)
        for oid, tgt in target_poses.items()
    )


def check_success(task: TaskInstance, world: WorldState) -> bool:
    """Score a terminal state (plus history) against the task goal."""
    goal = task.goal
    mt = task.meta_task

    if mt in ("T01", "T02"):
        dragged = world.get(goal.dragged_id)
        base = world.get(goal.base_id)
        return base.footprint().contains(Point(dragged.x, dragged.y))

    if mt == "T03":
        dragged = world.get(goal.dragged_id)
        start = task.initial_world.get(goal.dragged_id)
        delta = dragged.yaw - start.yaw
        if yaw_distance(delta, goal.target_yaw_delta) > YAW_TOLERANCE:
            return False
        moved = math.hypot(dragged.x - start.x, dragged.y - start.y)
        return moved < ROTATION_DRIFT_TOLERANCE

    if mt == "T04":
        return _snapshot_matches(world.snapshot(), goal.target_poses)

    if mt == "T05":
        matched_mid = any(
            _snapshot_matches(entry.poses, goal.target_poses)
            for entry in world.history
        )
        if not matched_mid:
            return False
        initial = {
            oid: task.initial_world.get(oid).pose() for oid in goal.target_poses
        }
        return _snapshot_matches(world.snapshot(), initial)

    if mt == "T17":
        dragged_id = goal.dragged_id
        containers = {cid: world.get(cid) for cid in goal.container_order}
        visits: list[int] = []
        for entry in world.history:
            if entry.picked_id != dragged_id:
                continue
            poses = _poses_from_snapshot(entry.poses)
            x, y, _ = poses[dragged_id]
            for cid, cobj in containers.items():
                if cobj.footprint().contains(Point(x, y)):
                    visits.append(cid)
                    break
        if visits != list(goal.container_order):
            return False
        start = task.initial_world.get(dragged_id).pose()
        final = world.get(dragged_id).pose()
        return _pose_close(final, start)

    raise ValueError(f"unknown meta task {mt!r}")


# ------------------------------------------------------------------
# serialization (fixtures and replay)
# ------------------------------------------------------------------


def _object_to_json(o: WorldObject) -> dict:
    return {
        "id": o.id,
        "shape": o.shape,
        "texture": {
            "kind": o.texture.kind,
            "primary_color": o.texture.primary_color,
            "secondary_color": o.texture.secondary_color,
        },
        "pose": [o.x, o.y, o.yaw],
        "scale": o.scale,
        "movable": o.movable,
    }


def _object_from_json(d: dict) -> WorldObject:
    t = d["texture"]
    return WorldObject(
        id=d["id"],
        shape=d["shape"],
        texture=TextureSpec(t["kind"], t["primary_color"], t["secondary_color"]),
        x=d["pose"][0],
        y=d["pose"][1],
        yaw=d["pose"][2],
        scale=d.get("scale", 1.0),
        movable=d.get("movable", True),
    )


def task_to_json(task: TaskInstance) -> dict:
    doc = {
        "meta_task": task.meta_task,
        "level": task.level,
        "seed": task.seed,
        "objects": [_object_to_json(o) for o in task.initial_world.objects],
        "goal": {
            "dragged_id": task.goal.dragged_id,
            "base_id": task.goal.base_id,
            "target_yaw_delta": task.goal.target_yaw_delta,
            "angle_text": task.goal.angle_text,
            "target_poses": {
                str(k): list(v) for k, v in task.goal.target_poses.items()
            },
            "container_order": task.goal.container_order,
            "home_id": task.goal.home_id,
        },
    }
    if task.scene_world is not None:
        doc["scene_objects"] = [
            _object_to_json(o) for o in task.scene_world.objects
        ]
    return doc


def task_from_json(doc: dict) -> TaskInstance:
    """Rebuild an instance from the fixture schema.

    Instruction bundles are regenerated deterministically via the generator,
    then the stored world/goal are verified against it.
    """
    task = generate_task(doc["meta_task"], doc["level"], doc["seed"])
    stored = [tuple(o["pose"]) for o in doc["objects"]]
    live = [o.pose() for o in task.initial_world.objects]
    if len(stored) != len(live) or any(
        max(abs(a - b) for a, b in zip(s, l)) > 1e-9 for s, l in zip(stored, live)
    ):
        raise ValueError("fixture does not match the generator output")
    return task
