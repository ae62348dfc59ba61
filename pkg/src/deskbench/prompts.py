"""Prompt assembly and multi-modal instruction normalization."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .coords import CameraTransform, WorkspaceBounds, default_camera

PLACEHOLDER_KEYS = ("scene", "dragged_obj", "base_obj", "base_obj_1", "base_obj_2")
_PLACEHOLDER_RE = re.compile(r"\{([a-z_0-9]+)\}")

STEP_BY_STEP_SENTENCE = (
    "Please solve the following instruction step-by-step. "
    "You should implement the main() function and output in the Python-code style."
)
THINK_TRIGGER_SENTENCE = "Think step by step to carry out the instruction."


class MissingAsset(Exception):
    pass


class DuplicateKey(Exception):
    pass


@dataclass
class InstructionBundle:
    """An instruction in one modality: text with {placeholder} tokens, the
    image assets backing them, and optional click points."""

    kind: str  # pure_language | multimodal | pointing
    text: str
    assets: dict[str, np.ndarray] = field(default_factory=dict)
    points: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("pure_language", "multimodal", "pointing"):
            raise ValueError(f"unknown instruction kind {self.kind!r}")
        for key in self.placeholders():
            if key not in PLACEHOLDER_KEYS:
                raise ValueError(f"placeholder {{{key}}} is not a known key")
        if self.kind == "pointing" and not self.points:
            raise ValueError("pointing instructions need at least one point")

    def placeholders(self) -> list[str]:
        return _PLACEHOLDER_RE.findall(self.text)


@dataclass
class EnvironmentCache:
    """Per-episode store: instruction assets, bounds, camera, observation."""

    bounds: WorkspaceBounds = field(default_factory=WorkspaceBounds)
    camera: CameraTransform | None = None
    observation: np.ndarray | None = None
    templates: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.camera is None:
            self.camera = default_camera(self.bounds)


def normalize_instruction(raw: InstructionBundle, cache: EnvironmentCache) -> str:
    """Copy the bundle's assets into the cache; the text keeps its
    {placeholder} tokens verbatim (the generated code resolves them through
    the template store)."""
    for key in raw.placeholders():
        if key not in raw.assets:
            raise MissingAsset(f"instruction references {{{key}}} without an asset")
    for key, asset in raw.assets.items():
        if key in cache.templates and cache.templates[key] is not asset:
            raise DuplicateKey(f"template key {key!r} already present")
        cache.templates[key] = asset
    return raw.text


@dataclass(frozen=True)
class PromptOptions:
    include_imports: bool = True
    include_api_defs: bool = True
    include_examples: bool = True
    include_think_trigger: bool = False


_SECTION_RE = re.compile(r"^%%SECTION:([a-z_]+)%%$", re.MULTILINE)


def load_template_sections(text: str | None = None) -> dict[str, str]:
    """Split the versioned prompt template into named sections."""
    if text is None:
        text = (
            resources.files("deskbench.assets")
            .joinpath("prompt_template.txt")
            .read_text(encoding="utf-8")
        )
    parts = _SECTION_RE.split(text)
    # parts = [preamble, name1, body1, name2, body2, ...]
    sections: dict[str, str] = {}
    for name, body in zip(parts[1::2], parts[2::2]):
        sections[name] = body.strip("\n")
    return sections


def build_prompt(instruction_text: str, opts: PromptOptions = PromptOptions()) -> str:
    """Assemble the full prompt: imports, hierarchical API definitions,
    in-context examples, then the closing instruction block."""
    if not instruction_text:
        raise ValueError("instruction text must be nonempty")
    sections = load_template_sections()
    chunks: list[str] = []
    if opts.include_imports:
        chunks.append(sections["imports"])
    if opts.include_api_defs:
        chunks.append(sections["api_defs"])
    if opts.include_examples:
        chunks.append(sections["examples"])
    closing = sections["closing"]
    if opts.include_think_trigger:
        closing = closing + "\n" + THINK_TRIGGER_SENTENCE
    chunks.append(closing + "\n\nInstruction: " + instruction_text)
    return "\n\n".join(chunks) + "\n"


PROMPT_ARMS = {
    "full": PromptOptions(),
    "api_only": PromptOptions(include_examples=False),
    "examples_only": PromptOptions(include_api_defs=False),
}
