"""deskbench: a desk-scale benchmark for language-driven tabletop manipulation.

Multi-modal instructions are normalized into prompts, a gateway produces
restricted policy programs (live, replay, or oracle), an interpreter runs
them against pluggable perception/retrieval/action APIs, and a deterministic
simulated tabletop scores task success across six meta-tasks and three
generalization levels.
"""

from .bench import RunConfig, RunReport, run_benchmark
from .coords import CameraTransform, RobotAction, WorkspaceBounds, default_camera
from .gateway import Cassette, GenerationRequest, generate_program, oracle_source
from .interpreter import ApiRegistry, ExecutionInfo, execute_program
from .perception import (
    MaskSet,
    NoiseSpec,
    ObjectCrop,
    PerceptionConfig,
    crop_objects,
    mask_iou,
    postprocess_masks,
    preprocess_image,
    propose_masks,
)
from .policy import LintReport, PolicyProgram, lint_program, parse_program, pretty_print
from .prompts import EnvironmentCache, InstructionBundle, PromptOptions, build_prompt
from .render import render_observation
from .retrieval import (
    AttributeEmbedding,
    cosine,
    embed_image,
    embed_text,
    match_objects,
    retrieve,
)
from .tasks import TaskInstance, check_success, generate_task
from .world import WorldObject, WorldState, step

__version__ = "0.1.0"

__all__ = [
    "ApiRegistry",
    "AttributeEmbedding",
    "CameraTransform",
    "Cassette",
    "EnvironmentCache",
    "ExecutionInfo",
    "GenerationRequest",
    "InstructionBundle",
    "LintReport",
    "MaskSet",
    "NoiseSpec",
    "ObjectCrop",
    "PerceptionConfig",
    "PolicyProgram",
    "PromptOptions",
    "RobotAction",
    "RunConfig",
    "RunReport",
    "TaskInstance",
    "WorkspaceBounds",
    "WorldObject",
    "WorldState",
    "build_prompt",
    "check_success",
    "cosine",
    "crop_objects",
    "default_camera",
    "embed_image",
    "embed_text",
    "execute_program",
    "generate_program",
    "generate_task",
    "lint_program",
    "mask_iou",
    "match_objects",
    "oracle_source",
    "parse_program",
    "postprocess_masks",
    "preprocess_image",
    "pretty_print",
    "propose_masks",
    "render_observation",
    "retrieve",
    "run_benchmark",
    "step",
]
