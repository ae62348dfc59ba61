"""Per-episode runtime: binds the policy-language APIs to the simulator,
perception pipeline, retrieval engine, and action bridge."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import actions as act
from .interpreter import ApiRegistry, ExecutionInfo
from .perception import MaskSet, ObjectCrop, PerceptionConfig, crop_objects, run_pipeline
from .prompts import EnvironmentCache
from .retrieval import match_objects, retrieve
from .world import WorldState


@dataclass
class PolicyRuntime:
    """Owns one episode's world, cache, and perception configuration."""

    world: WorldState
    cache: EnvironmentCache
    perception: PerceptionConfig
    point_prompts: list[tuple[int, int]] | None = None
    failure_dir: str | None = None
    task_label: str = "task"
    seed: int = 0
    dump_dir: str | None = None
    strict_distractors: bool = False
    _sam_calls: int = field(default=0, init=False)
    _last_match: dict = field(default_factory=dict, init=False)

    # -- API implementations -------------------------------------------

    def get_obs_image(self, obs=None) -> np.ndarray:
        return self.cache.observation

    def sam(self, image: np.ndarray) -> MaskSet:
        self._sam_calls += 1
        cfg = self.perception.with_noise_seed(
            self.perception.noise.seed * 1000 + self._sam_calls
        )
        points = None
        if self.point_prompts and image is self.cache.observation:
            points = self.point_prompts
        ms = run_pipeline(image, points, cfg)
        if self.dump_dir:
            self._dump(image, ms)
        return ms

    def image_crop(self, image: np.ndarray, masks: MaskSet):
        crops, ms = crop_objects(image, masks, self.perception.table_color)
        return (crops, ms)

    def clip_retrieval(self, objs, query, pre_obj1=None, pre_obj2=None) -> int:
        exclusions = {int(i) for i in (pre_obj1, pre_obj2) if i is not None}
        return retrieve(objs, query, exclusions)

    def get_objs_match(self, objs_list1, objs_list2):
        rows, cols = match_objects(objs_list1, objs_list2)
        self._last_match = {
            "rows": rows,
            "cols": cols,
            "goal_masks": [objs_list1[i].mask for i in rows],
            "goal_crops": objs_list1,
            "obs_crops": objs_list2,
        }
        return (rows, cols)

    def pixel_to_loc(self, obj, masks: MaskSet):
        idx = int(obj)
        return act.pixel_to_loc(masks.masks[idx])

    def pick_place(self, pick, place, bounds=None, yaw_angle_degree=None,
                   tool: str = "suction"):
        return act.pick_place(
            pick, place, self.cache.bounds, self.cache.camera,
            yaw_angle_degree=yaw_angle_degree, tool=tool,
        )

    def distractor_actions(self, mask_obs: MaskSet, obj_list, tool: str = "suction"):
        if not self._last_match:
            raise RuntimeError("DistractorActions requires a prior get_objs_match")
        return act.distractor_actions(
            mask_obs, obj_list, self._last_match["goal_masks"],
            self.cache.bounds, self.cache.camera, tool=tool,
            strict=self.strict_distractors,
        )

    def rearrange_actions(self, pick_masks: MaskSet, place_masks: MaskSet,
                          pick_ind, place_ind, bounds=None, tool: str = "suction"):
        return act.rearrange_actions(
            pick_masks, place_masks, pick_ind, place_ind,
            self.cache.bounds, self.cache.camera, tool=tool,
        )

    def robot_execution(self, action) -> ExecutionInfo:
        return act.robot_execution(
            action, self.world,
            failure_dir=self.failure_dir,
            task_label=self.task_label, seed=self.seed,
        )

    def save_failure_image(self) -> str:
        if self.failure_dir is None:
            return ""
        return act.save_failure_image(
            self.world, self.failure_dir, self.task_label, self.seed,
            self.world.step_count,
        )

    # -- wiring ---------------------------------------------------------

    def registry(self) -> ApiRegistry:
        reg = ApiRegistry(
            cache_templates=self.cache.templates,
            env={"obs": self.cache.observation, "BOUNDS": self.cache.bounds},
            failure_hook=self.save_failure_image,
        )
        reg.register("GetObsImage", self.get_obs_image)
        reg.register("SaveFailureImage", self.save_failure_image)
        reg.register("SAM", self.sam)
        reg.register("ImageCrop", self.image_crop)
        reg.register("CLIPRetrieval", self.clip_retrieval)
        reg.register("get_objs_match", self.get_objs_match)
        reg.register("Pixel2Loc", self.pixel_to_loc)
        reg.register("PickPlace", self.pick_place)
        reg.register("DistractorActions", self.distractor_actions)
        reg.register("RearrangeActions", self.rearrange_actions)
        reg.register("RobotExecution", self.robot_execution)
        return reg

    def _dump(self, image: np.ndarray, ms: MaskSet) -> None:
        import os

        from .render import save_png

        os.makedirs(self.dump_dir, exist_ok=True)
        stem = f"{self.task_label}_{self.seed}_call{self._sam_calls}"
        save_png(image, os.path.join(self.dump_dir, f"{stem}_image.png"))
        overlay = image.copy()
        for i, m in enumerate(ms.masks):
            tint = np.array([(37 * (i + 1)) % 255, (91 * (i + 1)) % 255, 200], dtype=np.uint8)
            overlay[m] = (overlay[m] // 2 + tint // 2).astype(np.uint8)
        save_png(overlay, os.path.join(self.dump_dir, f"{stem}_masks.png"))


def make_runtime(task, perception: PerceptionConfig,
                 modality: str = "multimodal",
                 failure_dir: str | None = None,
                 dump_dir: str | None = None,
                 point_override: list[tuple[int, int]] | None = None) -> tuple[PolicyRuntime, str]:
    """Build the episode runtime and the normalized instruction text."""
    from .prompts import normalize_instruction
    from .render import render_observation

    bundle = task.instruction_for(modality)
    world = task.initial_world.clone()
    cache = EnvironmentCache(bounds=world.bounds)
    cache.observation = render_observation(world)
    text = normalize_instruction(bundle, cache)

    points = None
    if bundle.kind == "pointing":
        points = point_override if point_override is not None else bundle.points

    runtime = PolicyRuntime(
        world=world,
        cache=cache,
        perception=perception,
        point_prompts=points,
        failure_dir=failure_dir,
        task_label=task.meta_task,
        seed=task.seed,
        dump_dir=dump_dir,
    )
    return runtime, text
