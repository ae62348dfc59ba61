"""Action mapping: masks to pixels to clamped robot coordinates, and the
composite pick/place, distractor, and rearrange action builders."""

from __future__ import annotations

import math
import os
import time

import numpy as np

from .coords import CameraTransform, RobotAction, WorkspaceBounds
from .interpreter import ExecutionInfo
from .perception import MaskSet
from .world import WorldState, step


class EmptyMask(Exception):
    pass


class NoFreeSpace(Exception):
    pass


class IndexMismatch(Exception):
    pass


def pixel_to_loc(mask: np.ndarray) -> tuple[int, int]:
    """Pixel centroid (mean of set pixels), rounded half-up per axis."""
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        raise EmptyMask("mask has no set pixels")
    px = math.floor(float(xs.mean()) + 0.5)
    py = math.floor(float(ys.mean()) + 0.5)
    return (px, py)


def to_robot(p, cam: CameraTransform, bounds: WorkspaceBounds) -> tuple[float, float]:
    """Affine map then per-axis clamp into the workspace box."""
    x, y = cam.pixel_to_world(p[0], p[1])
    return bounds.clamp(float(x), float(y))


def pick_place(pick_loc, place_loc, bounds: WorkspaceBounds, cam: CameraTransform,
               yaw_angle_degree: float | None = None,
               tool: str = "suction") -> RobotAction:
    return RobotAction(
        pick=to_robot(pick_loc, cam, bounds),
        place=to_robot(place_loc, cam, bounds),
        yaw_degrees=0.0 if yaw_angle_degree is None else float(yaw_angle_degree),
        tool=tool,
    )


def _mask_points_to_robot(mask: np.ndarray, cam: CameraTransform) -> np.ndarray:
    ys, xs = np.nonzero(mask)
    wx, wy = cam.pixel_to_world(xs, ys)
    return np.stack([wx, wy], axis=1)


def staging_cells(bounds: WorkspaceBounds, per_side: int = 4) -> list[tuple[float, float]]:
    """A 4x4 ring of parking cells along the workspace border."""
    inset_x = 0.05 * (bounds.x_max - bounds.x_min)
    inset_y = 0.05 * (bounds.y_max - bounds.y_min)
    xs = np.linspace(bounds.x_min + inset_x, bounds.x_max - inset_x, per_side)
    ys = np.linspace(bounds.y_min + inset_y, bounds.y_max - inset_y, per_side)
    cells = []
    for x in xs:
        cells.append((float(x), float(ys[0])))
    for y in ys[1:]:
        cells.append((float(xs[-1]), float(y)))
    for x in xs[-2::-1]:
        cells.append((float(x), float(ys[-1])))
    for y in ys[-2:0:-1]:
        cells.append((float(xs[0]), float(y)))
    return cells


def distractor_actions(obs_masks: MaskSet, matched_obs_indices,
                       goal_masks: list[np.ndarray],
                       bounds: WorkspaceBounds, cam: CameraTransform,
                       tool: str = "suction",
                       clearance: float = 0.03,
                       strict: bool = False) -> list[RobotAction]:
    """Park unmatched observed masks that conflict with matched goal
    footprints on the border staging grid.

    With strict=True every unmatched mask is parked, conflicting or not.
    """
    matched = set(int(i) for i in matched_obs_indices)
    if any(i < 0 or i >= len(obs_masks) for i in matched):
        raise IndexMismatch("matched index out of range")
    if not obs_masks.masks:
        return []

    goal_union = np.zeros(obs_masks.masks[0].shape, dtype=bool)
    for g in goal_masks:
        goal_union |= g

    conflicts = []
    for i, mask in enumerate(obs_masks.masks):
        if i in matched:
            continue
        if strict or bool((mask & goal_union).any()):
            conflicts.append((i, mask))
    if not conflicts:
        return []

    occupied = [_mask_points_to_robot(m, cam) for m in obs_masks.masks]
    occupied += [_mask_points_to_robot(g, cam) for g in goal_masks]

    actions = []
    used_cells: list[tuple[float, float]] = []
    for i, mask in conflicts:
        src = to_robot(pixel_to_loc(mask), cam, bounds)
        best = None
        for cell in staging_cells(bounds):
            if any(math.hypot(cell[0] - u[0], cell[1] - u[1]) < 2 * clearance
                   for u in used_cells):
                continue
            free = all(
                float(np.min(np.hypot(pts[:, 0] - cell[0], pts[:, 1] - cell[1]))) >= clearance
                for pts in occupied
            )
            if not free:
                continue
            d = math.hypot(cell[0] - src[0], cell[1] - src[1])
            if best is None or d < best[0]:
                best = (d, cell)
        if best is None:
            raise NoFreeSpace("staging grid exhausted")
        cell = best[1]
        used_cells.append(cell)
        actions.append(RobotAction(pick=src, place=cell, tool=tool))
    return actions


def rearrange_actions(pick_masks: MaskSet, place_masks: MaskSet,
                      pick_ind, place_ind,
                      bounds: WorkspaceBounds, cam: CameraTransform,
                      tool: str = "suction") -> list[RobotAction]:
    """Move pick_masks[pick_ind[k]] onto place_masks[place_ind[k]], longest
    moves first to reduce collisions."""
    pick_ind = list(pick_ind)
    place_ind = list(place_ind)
    if len(pick_ind) != len(place_ind):
        raise IndexMismatch("pick and place index lists differ in length")
    moves = []
    for k, (pi, qi) in enumerate(zip(pick_ind, place_ind)):
        src = to_robot(pixel_to_loc(pick_masks.masks[pi]), cam, bounds)
        dst = to_robot(pixel_to_loc(place_masks.masks[qi]), cam, bounds)
        dist = math.hypot(src[0] - dst[0], src[1] - dst[1])
        moves.append((dist, k, RobotAction(pick=src, place=dst, tool=tool)))
    moves.sort(key=lambda m: (-m[0], m[1]))
    return [m[2] for m in moves]


def save_failure_image(world: WorldState, directory: str,
                       task_label: str = "task", seed: int = 0,
                       step_index: int = 0) -> str:
    from .render import render_observation, save_png

    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, f"fail_{task_label}_{seed}_{step_index}.png")
    save_png(render_observation(world), path)
    return path


def robot_execution(actions, world: WorldState,
                    failure_dir: str | None = None,
                    task_label: str = "task", seed: int = 0) -> ExecutionInfo:
    """Apply actions in order; success means every pick grabbed something."""
    if actions is None:
        actions = []
    if isinstance(actions, RobotAction):
        actions = [actions]
    flat: list[RobotAction] = []
    for a in actions:
        if isinstance(a, list):
            flat.extend(a)
        else:
            flat.append(a)

    start = time.perf_counter()
    all_picked = True
    first_failure = None
    for i, action in enumerate(flat):
        result = step(world, action)
        if not result.picked and all_picked:
            all_picked = False
            first_failure = i
    elapsed_ms = (time.perf_counter() - start) * 1000.0

    failure_path = None
    if not all_picked and failure_dir is not None:
        failure_path = save_failure_image(
            world, failure_dir, task_label, seed, first_failure or 0
        )
    return ExecutionInfo(
        success=all_picked,
        actions_executed=len(flat),
        failure_image_path=failure_path,
        elapsed_ms=elapsed_ms,
    )
