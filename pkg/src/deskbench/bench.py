"""Benchmark harness: end-to-end episodes, sweeps, and report tables."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field

from .gateway import (
    Cassette,
    ExhaustedTrials,
    GenerationRequest,
    LintRejected,
    generate_program,
)
from .interpreter import ReturnTypeError, RuntimeApiError, execute_program
from .perception import EmptyScene, PerceptionConfig
from .prompts import PROMPT_ARMS, build_prompt
from .retrieval import AllExcluded, EmptyCrop, UnparsableQuery
from .runtime import make_runtime
from .tasks import LEVELS, META_TASKS, check_success, generate_task

logger = logging.getLogger(__name__)

FAILURE_KINDS = ("parse", "lint", "retrieval", "execution", "scoring")


@dataclass
class RunConfig:
    tasks: tuple[str, ...] = tuple(META_TASKS)
    levels: tuple[str, ...] = LEVELS
    episodes_per_cell: int = 20
    seeds: tuple[int, ...] = (0, 1, 2)
    mode: str = "oracle"
    prompt_arm: str = "full"
    modality: str = "multimodal"
    perception: PerceptionConfig = field(default_factory=PerceptionConfig)
    max_trials: int = 1
    cassette: Cassette | None = None
    record_to: Cassette | None = None
    output_dir: str | None = None
    failure_dir: str | None = None
    dump_dir: str | None = None

    def __post_init__(self):
        if self.episodes_per_cell < 1:
            raise ValueError("episodes_per_cell must be >= 1")
        unknown = set(self.tasks) - set(META_TASKS)
        if unknown:
            raise ValueError(f"unknown tasks {sorted(unknown)}")
        if self.prompt_arm not in PROMPT_ARMS:
            raise ValueError(f"unknown prompt arm {self.prompt_arm!r}")


@dataclass
class CellResult:
    successes: int = 0
    failures: int = 0
    errors: int = 0

    @property
    def total(self) -> int:
        return self.successes + self.failures + self.errors

    def rate(self) -> float:
        return 100.0 * self.successes / self.total if self.total else 0.0


@dataclass
class RunReport:
    cells: dict[str, dict[str, CellResult]]
    failure_histogram: dict[str, int]
    config_echo: dict
    episodes_total: int
    wall_clock_s: float = 0.0

    def average_rate(self) -> float:
        cells = [c for by_level in self.cells.values() for c in by_level.values()]
        if not cells:
            return 0.0
        return sum(c.rate() for c in cells) / len(cells)

    def to_dict(self) -> dict:
        """Canonical content; excludes wall clock so reports are replayable."""
        return {
            "config": self.config_echo,
            "episodes_total": self.episodes_total,
            "average_success_rate": round(self.average_rate(), 4),
            "cells": {
                task: {
                    level: {
                        "successes": cell.successes,
                        "failures": cell.failures,
                        "errors": cell.errors,
                        "success_rate": round(cell.rate(), 4),
                    }
                    for level, cell in by_level.items()
                }
                for task, by_level in self.cells.items()
            },
            "failure_histogram": self.failure_histogram,
        }

    def to_canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def to_markdown(self) -> str:
        tasks = list(self.cells)
        lines = []
        header = "| Level | " + " | ".join(f"Task {t[1:]}" for t in tasks) + " | Average |"
        lines.append(header)
        lines.append("|" + "---|" * (len(tasks) + 2))
        levels = sorted({lvl for by_level in self.cells.values() for lvl in by_level})
        for lvl in levels:
            rates = [self.cells[t][lvl].rate() for t in tasks if lvl in self.cells[t]]
            row = [f"{self.cells[t][lvl].rate():.1f}" if lvl in self.cells[t] else "-"
                   for t in tasks]
            avg = sum(rates) / len(rates) if rates else 0.0
            lines.append(f"| {lvl} | " + " | ".join(row) + f" | {avg:.1f} |")
        lines.append(
            "| all | "
            + " | ".join(
                f"{sum(c.rate() for c in self.cells[t].values()) / len(self.cells[t]):.1f}"
                for t in tasks
            )
            + f" | {self.average_rate():.1f} |"
        )
        return "\n".join(lines) + "\n"


def _failure_category(exc: Exception) -> str:
    if isinstance(exc, ExhaustedTrials):
        return "lint" if isinstance(exc.last_error, LintRejected) else "parse"
    if isinstance(exc, RuntimeApiError):
        cause = exc.cause
        if isinstance(cause, (UnparsableQuery, EmptyCrop, AllExcluded, EmptyScene)):
            return "retrieval"
        return "execution"
    return "execution"


def run_episode(task, cfg: RunConfig, instance_seed: int) -> tuple[bool, str | None]:
    """One instruction -> prompt -> program -> execution -> score pass.

    Returns (success, failure_kind); failure_kind is None on success.
    """
    perception = cfg.perception.with_noise_seed(instance_seed)
    runtime, text = make_runtime(
        task, perception,
        modality=cfg.modality,
        failure_dir=cfg.failure_dir,
        dump_dir=cfg.dump_dir,
    )
    prompt = build_prompt(text, PROMPT_ARMS[cfg.prompt_arm])
    req = GenerationRequest(
        prompt=prompt,
        mode=cfg.mode,
        max_trials=cfg.max_trials,
        cassette=cfg.cassette,
        oracle_task=task,
        modality=cfg.modality,
        record_to=cfg.record_to,
    )
    try:
        result = generate_program(req)
    except ExhaustedTrials as exc:
        return False, _failure_category(exc)

    try:
        execute_program(result.program, runtime.registry())
    except (RuntimeApiError, ReturnTypeError) as exc:
        return False, _failure_category(exc)

    if check_success(task, runtime.world):
        return True, None
    return False, "scoring"


def run_benchmark(cfg: RunConfig) -> RunReport:
    """Sweep tasks x levels x seeds x episodes; episode errors never abort."""
    start = time.perf_counter()
    cells: dict[str, dict[str, CellResult]] = {}
    histogram = {kind: 0 for kind in FAILURE_KINDS}
    episodes_total = 0

    for meta_task in cfg.tasks:
        cells[meta_task] = {}
        for level in cfg.levels:
            cell = CellResult()
            for root_seed in cfg.seeds:
                for ep in range(cfg.episodes_per_cell):
                    instance_seed = int(root_seed) * 100000 + ep
                    task = generate_task(meta_task, level, instance_seed)
                    try:
                        success, kind = run_episode(task, cfg, instance_seed)
                    except Exception as exc:  # count, never abort the sweep
                        logger.exception(
                            "episode error %s/%s seed=%d", meta_task, level, instance_seed
                        )
                        success, kind = False, _failure_category(exc)
                    episodes_total += 1
                    if success:
                        cell.successes += 1
                    elif kind == "scoring":
                        cell.failures += 1
                        histogram["scoring"] += 1
                    else:
                        cell.errors += 1
                        histogram[kind or "execution"] += 1
            cells[meta_task][level] = cell

    echo = {
        "tasks": list(cfg.tasks),
        "levels": list(cfg.levels),
        "episodes_per_cell": cfg.episodes_per_cell,
        "seeds": list(cfg.seeds),
        "mode": cfg.mode,
        "prompt_arm": cfg.prompt_arm,
        "modality": cfg.modality,
        "noise": cfg.perception.noise.enabled(),
        "preprocess": cfg.perception.enable_preprocess,
        "postprocess": cfg.perception.enable_postprocess,
    }
    return RunReport(
        cells=cells,
        failure_histogram=histogram,
        config_echo=echo,
        episodes_total=episodes_total,
        wall_clock_s=time.perf_counter() - start,
    )
