import json

from deskbench.bench import FAILURE_KINDS, RunConfig, run_benchmark, run_episode
from deskbench.gateway import Cassette
from deskbench.perception import CALIBRATED_NOISE, PerceptionConfig
from deskbench.prompts import build_prompt
from deskbench.runtime import make_runtime
from deskbench.tasks import generate_task


def small_cfg(**overrides):
    base = dict(
        tasks=("T01", "T03"), levels=("L1",), episodes_per_cell=2, seeds=(0,),
    )
    base.update(overrides)
    return RunConfig(**base)


def test_accounting_reconciles():
    cfg = small_cfg(tasks=("T01", "T04"), levels=("L1", "L2"), episodes_per_cell=3,
                    seeds=(0, 1))
    report = run_benchmark(cfg)
    per_cell = cfg.episodes_per_cell * len(cfg.seeds)
    for by_level in report.cells.values():
        for cell in by_level.values():
            assert cell.successes + cell.failures + cell.errors == per_cell
    assert report.episodes_total == per_cell * len(cfg.tasks) * len(cfg.levels)


def test_reports_byte_identical_across_runs():
    cfg = small_cfg()
    a = run_benchmark(cfg).to_canonical_json()
    b = run_benchmark(cfg).to_canonical_json()
    assert a.encode() == b.encode()
    json.loads(a)  # valid JSON


def test_canonical_json_excludes_wall_clock():
    report = run_benchmark(small_cfg())
    assert report.wall_clock_s > 0
    assert "wall_clock" not in report.to_canonical_json()


def test_markdown_layout():
    cfg = small_cfg(tasks=("T01", "T03"), levels=("L1", "L2"))
    md = run_benchmark(cfg).to_markdown()
    lines = md.strip().splitlines()
    assert lines[0].startswith("| Level |")
    assert "Task 01" in lines[0] and "Task 03" in lines[0] and "Average" in lines[0]
    assert any(row.startswith("| L1 |") for row in lines)
    assert any(row.startswith("| all |") for row in lines)


def test_parse_failures_counted_not_raised():
    cassette = Cassette()
    cfg = small_cfg(mode="replay", cassette=cassette, tasks=("T01",),
                    episodes_per_cell=1)
    # populate a syntactically broken response for each prompt the sweep makes
    task = generate_task("T01", "L1", 0)
    runtime, text = make_runtime(task, cfg.perception.with_noise_seed(0))
    cassette.record(build_prompt(text), "def main(:\n  broken\n")
    report = run_benchmark(cfg)
    assert report.failure_histogram["parse"] == 1
    assert report.cells["T01"]["L1"].errors == 1


def test_failure_kinds_known():
    assert set(FAILURE_KINDS) == {"parse", "lint", "retrieval", "execution", "scoring"}


def test_run_episode_pointing_modality():
    cfg = small_cfg(modality="pointing", tasks=("T01",))
    task = generate_task("T01", "L1", 0)
    ok, kind = run_episode(task, cfg, 0)
    assert ok and kind is None


def test_run_episode_pure_language():
    cfg = small_cfg(modality="pure_language", tasks=("T17",))
    task = generate_task("T17", "L2", 1)
    ok, kind = run_episode(task, cfg, 1)
    assert ok, kind


def test_noisy_unprocessed_episodes_fail_sometimes():
    cfg = small_cfg(
        tasks=("T04",), episodes_per_cell=8,
        perception=PerceptionConfig(
            noise=CALIBRATED_NOISE, enable_preprocess=False, enable_postprocess=False
        ),
    )
    report = run_benchmark(cfg)
    cell = report.cells["T04"]["L1"]
    assert cell.errors + cell.failures > 0
