"""Policy-source generation: live endpoint, cassette replay, or oracle
templates, wrapped in the parse/lint retry loop."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, field

from .policy import LintReport, PolicyProgram, PolicyParseError, lint_program, parse_program
from .shapes import object_description

logger = logging.getLogger(__name__)


class CassetteMiss(Exception):
    pass


class EndpointError(Exception):
    pass


class LintRejected(Exception):
    def __init__(self, report: LintReport):
        super().__init__(
            f"lint rejected program: unknown={report.unknown_apis} "
            f"unbound={report.unbound_identifiers} "
            f"cache_ok={report.uses_cache_when_required}"
        )
        self.report = report


class ExhaustedTrials(Exception):
    def __init__(self, trials: int, last_error: Exception):
        super().__init__(f"no valid program after {trials} trials: {last_error}")
        self.trials = trials
        self.last_error = last_error


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass
class Cassette:
    """Recorded responses keyed by prompt hash; one entry per trial."""

    entries: dict[str, list[str]] = field(default_factory=dict)

    def record(self, prompt: str, response: str) -> None:
        self.entries.setdefault(prompt_hash(prompt), []).append(response)

    def fetch(self, prompt: str, trial: int) -> str:
        key = prompt_hash(prompt)
        if key not in self.entries:
            raise CassetteMiss(f"no cassette entry for prompt hash {key[:12]}")
        responses = self.entries[key]
        if trial >= len(responses):
            raise CassetteMiss(
                f"cassette has {len(responses)} responses, trial {trial} requested"
            )
        return responses[trial]

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"version": 1, "entries": self.entries}, fh, indent=2)

    @classmethod
    def load(cls, path: str) -> "Cassette":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("version") != 1:
            raise ValueError("unknown cassette schema version")
        return cls(entries=doc["entries"])


@dataclass
class GenerationRequest:
    prompt: str
    mode: str = "oracle"  # live | replay | oracle
    max_trials: int = 1
    temperature: float = 0.0
    cassette: Cassette | None = None
    oracle_task: object = None
    modality: str = "multimodal"
    record_to: Cassette | None = None

    def __post_init__(self):
        if self.mode not in ("live", "replay", "oracle"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.max_trials < 1:
            raise ValueError("max_trials must be >= 1")


def strip_fences(text: str) -> str:
    """Pull code out of markdown fences; pass raw text through otherwise."""
    lines = text.strip().splitlines()
    if not any(line.startswith("```") for line in lines):
        return text.strip() + "\n"
    out: list[str] = []
    inside = False
    for line in lines:
        if line.startswith("```"):
            inside = not inside
            continue
        if inside:
            out.append(line)
    return "\n".join(out).strip() + "\n"


def _call_live_endpoint(prompt: str, temperature: float) -> str:
    import requests

    url = os.environ.get("LLM_ENDPOINT")
    if not url:
        raise EndpointError("LLM_ENDPOINT is not configured")
    headers = {"Content-Type": "application/json"}
    key = os.environ.get("LLM_API_KEY")
    if key:
        headers["Authorization"] = f"Bearer {key}"
    body = {
        "model": os.environ.get("LLM_MODEL", "default"),
        "messages": [{"role": "user", "content": prompt}],
        "temperature": temperature,
    }
    try:
        resp = requests.post(url, json=body, headers=headers, timeout=120)
        resp.raise_for_status()
        doc = resp.json()
        return doc["choices"][0]["message"]["content"]
    except Exception as exc:
        raise EndpointError(str(exc)) from exc


def _fetch(req: GenerationRequest, trial: int) -> str:
    if req.mode == "oracle":
        if req.oracle_task is None:
            raise ValueError("oracle mode requires a task")
        return oracle_source(req.oracle_task, req.modality)
    if req.mode == "replay":
        if req.cassette is None:
            raise CassetteMiss("replay mode without a cassette")
        return req.cassette.fetch(req.prompt, trial)
    text = _call_live_endpoint(req.prompt, req.temperature)
    if req.record_to is not None:
        req.record_to.record(req.prompt, text)
    return text


@dataclass
class GenerationResult:
    program: PolicyProgram
    trials: int
    source: str


def generate_program(req: GenerationRequest) -> GenerationResult:
    """Fetch, strip fences, parse, lint; retry up to max_trials."""
    lint_kind = "multimodal" if req.modality == "multimodal" else "pure_language"
    last_error: Exception | None = None
    for trial in range(req.max_trials):
        text = _fetch(req, trial)
        source = strip_fences(text)
        try:
            program = parse_program(source)
        except PolicyParseError as exc:
            logger.info("trial %d parse failure: %s", trial + 1, exc)
            last_error = exc
            continue
        report = lint_program(program, lint_kind)
        if not report.passes():
            logger.info("trial %d lint failure: %s", trial + 1, report)
            last_error = LintRejected(report)
            continue
        return GenerationResult(program=program, trials=trial + 1, source=source)
    raise ExhaustedTrials(req.max_trials, last_error or RuntimeError("no trials ran"))


# ------------------------------------------------------------------
# oracle templates, one program shape per meta-task family
# ------------------------------------------------------------------


def _quote(text: str) -> str:
    return "'" + text.replace("'", "\\'") + "'"


def _describe(world, obj_id: int) -> str:
    obj = world.get(obj_id)
    return object_description(obj.shape, obj.texture)


def _retrieval_query(task, key: str, obj_id: int, modality: str) -> str:
    if modality == "multimodal":
        return f'templates.get("{key}")'
    return _quote(_describe(task.initial_world, obj_id))


def _oracle_t01(task, modality: str) -> str:
    base_q = _retrieval_query(task, "base_obj", task.goal.base_id, modality)
    drag_q = _retrieval_query(task, "dragged_obj", task.goal.dragged_id, modality)
    return "\n".join(
        [
            "def main() -> dict:",
            "    image = GetObsImage(obs)",
            "    masks = SAM(image=image)",
            "    objs, masks = ImageCrop(image=image, masks=masks)",
            f"    obj_0 = CLIPRetrieval(objs=objs, query={base_q})",
            "    loc_0 = Pixel2Loc(obj=obj_0, masks=masks)",
            f"    obj_1 = CLIPRetrieval(objs=objs, query={drag_q}, pre_obj1=obj_0)",
            "    loc_1 = Pixel2Loc(obj=obj_1, masks=masks)",
            "    action = PickPlace(pick=loc_1, place=loc_0, bounds=BOUNDS)",
            "    info = RobotExecution(action=action)",
            "    return info",
        ]
    )


def _oracle_t02(task, modality: str) -> str:
    dragged = task.initial_world.get(task.goal.dragged_id)
    base = task.initial_world.get(task.goal.base_id)
    texture_q = _quote(f"the {dragged.texture.description()} object")
    base_q = _quote(f"the {base.texture.primary_color} object")
    return "\n".join(
        [
            "def main() -> dict:",
            "    image = GetObsImage(obs)",
            "    masks_obs = SAM(image=image)",
            "    objs_obs, masks_obs = ImageCrop(image=image, masks=masks_obs)",
            '    scene = templates.get("scene")',
            "    masks_goal = SAM(image=scene)",
            "    objs_goal, masks_goal = ImageCrop(image=scene, masks=masks_goal)",
            f"    goal = CLIPRetrieval(objs=objs_goal, query={texture_q})",
            "    target = CLIPRetrieval(objs=objs_obs, query=objs_goal[goal])",
            "    loc_0 = Pixel2Loc(obj=target, masks=masks_obs)",
            f"    obj_1 = CLIPRetrieval(objs=objs_obs, query={base_q}, pre_obj1=target)",
            "    loc_1 = Pixel2Loc(obj=obj_1, masks=masks_obs)",
            "    action = PickPlace(pick=loc_0, place=loc_1, bounds=BOUNDS)",
            "    info = RobotExecution(action=action)",
            "    return info",
        ]
    )


def _oracle_t03(task, modality: str) -> str:
    drag_q = _retrieval_query(task, "dragged_obj", task.goal.dragged_id, modality)
    lines = [
        "def main() -> dict:",
        "    image = GetObsImage(obs)",
        "    masks = SAM(image=image)",
        "    objs, masks = ImageCrop(image=image, masks=masks)",
        f"    obj_0 = CLIPRetrieval(objs=objs, query={drag_q})",
        "    loc_0 = Pixel2Loc(obj=obj_0, masks=masks)",
    ]
    if task.goal.angle_text and task.goal.angle_text.endswith("radians"):
        radians = round(math.radians(task.goal.target_yaw_delta), 4)
        lines += [
            f"    angle = {radians}",
            "    yaw_angle_degree = angle * 180 / pi",
            "    action = PickPlace(pick=loc_0, place=loc_0, bounds=BOUNDS, "
            "yaw_angle_degree=yaw_angle_degree)",
        ]
    else:
        lines.append(
            "    action = PickPlace(pick=loc_0, place=loc_0, bounds=BOUNDS, "
            f"yaw_angle_degree={int(task.goal.target_yaw_delta)})"
        )
    lines += [
        "    info = RobotExecution(action=action)",
        "    return info",
    ]
    return "\n".join(lines)


def _oracle_rearrange(task, modality: str, restore: bool) -> str:
    lines = [
        "def main() -> dict:",
        "    image_obs = GetObsImage(obs)",
        '    image_goal = templates.get("scene")',
        "    masks_obs = SAM(image=image_obs)",
        "    objs_obs, masks_obs = ImageCrop(image=image_obs, masks=masks_obs)",
        "    masks_goal = SAM(image=image_goal)",
        "    objs_goal, masks_goal = ImageCrop(image=image_goal, masks=masks_goal)",
        "    row, col = get_objs_match(objs_list1=objs_goal, objs_list2=objs_obs)",
        "    action_1 = DistractorActions(mask_obs=masks_obs, obj_list=col)",
        "    action_2 = RearrangeActions(pick_masks=masks_obs, place_masks=masks_goal, "
        "pick_ind=col, place_ind=row, bounds=BOUNDS)",
    ]
    chain = "    actions.extend(action_1).extend(action_2)"
    if restore:
        lines.append(
            "    action_3 = RearrangeActions(pick_masks=masks_goal, place_masks=masks_obs, "
            "pick_ind=row, place_ind=col, bounds=BOUNDS)"
        )
        chain += ".extend(action_3)"
    lines += [
        "    actions = []",
        chain,
        "    info = RobotExecution(action=actions)",
        "    return info",
    ]
    return "\n".join(lines)


def _oracle_t17(task, modality: str) -> str:
    goal = task.goal
    b1, b2, _home = goal.container_order
    q1 = _retrieval_query(task, "base_obj_1", b1, modality)
    q2 = _retrieval_query(task, "base_obj_2", b2, modality)
    qd = _retrieval_query(task, "dragged_obj", goal.dragged_id, modality)
    return "\n".join(
        [
            "def main() -> dict:",
            "    image = GetObsImage(obs)",
            "    masks = SAM(image=image)",
            "    objs, masks = ImageCrop(image=image, masks=masks)",
            f"    base_obj_1 = CLIPRetrieval(objs=objs, query={q1})",
            f"    base_obj_2 = CLIPRetrieval(objs=objs, query={q2}, pre_obj1=base_obj_1)",
            f"    dragged_obj = CLIPRetrieval(objs=objs, query={qd}, "
            "pre_obj1=base_obj_1, pre_obj2=base_obj_2)",
            "    loc_base_obj_1 = Pixel2Loc(obj=base_obj_1, masks=masks)",
            "    loc_base_obj_2 = Pixel2Loc(obj=base_obj_2, masks=masks)",
            "    loc_dragged_obj = Pixel2Loc(obj=dragged_obj, masks=masks)",
            "    action_1 = PickPlace(pick=loc_dragged_obj, place=loc_base_obj_1, bounds=BOUNDS)",
            "    action_2 = PickPlace(pick=loc_base_obj_1, place=loc_base_obj_2, bounds=BOUNDS)",
            "    action_3 = PickPlace(pick=loc_base_obj_2, place=loc_dragged_obj, bounds=BOUNDS)",
            "    actions = [action_1, action_2, action_3]",
            "    info = RobotExecution(action=actions)",
            "    return info",
        ]
    )


def oracle_source(task, modality: str = "multimodal") -> str:
    """Ground-truth program text for the task's meta-task family."""
    effective = task.instruction_for(modality).kind
    if effective == "pointing":
        effective = "pure_language"
    builders = {
        "T01": _oracle_t01,
        "T02": _oracle_t02,
        "T03": _oracle_t03,
        "T04": lambda t, m: _oracle_rearrange(t, m, restore=False),
        "T05": lambda t, m: _oracle_rearrange(t, m, restore=True),
        "T17": _oracle_t17,
    }
    return builders[task.meta_task](task, effective) + "\n"
