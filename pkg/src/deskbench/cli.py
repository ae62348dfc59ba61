"""Command-line interface for sweeps and the pointing service."""

from __future__ import annotations

import logging
import sys

import click

from .bench import RunConfig, run_benchmark
from .gateway import Cassette
from .perception import CALIBRATED_NOISE, NoiseSpec, PerceptionConfig
from .tasks import LEVELS, META_TASKS


def _parse_csv(value: str, allowed, label: str) -> tuple[str, ...]:
    items = tuple(v.strip() for v in value.split(",") if v.strip())
    bad = [v for v in items if v not in allowed]
    if bad:
        raise click.BadParameter(f"unknown {label}: {', '.join(bad)}")
    return items


def _build_config(tasks, levels, episodes, seeds, mode, prompt_arm, modality,
                  noise, pre_process, post_process, max_trials, cassette,
                  failure_dir, dump_perception, full) -> RunConfig:
    perception = PerceptionConfig(
        noise=CALIBRATED_NOISE if noise == "on" else NoiseSpec(),
        enable_preprocess=pre_process == "on",
        enable_postprocess=post_process == "on",
    )
    cassette_obj = Cassette.load(cassette) if cassette else None
    return RunConfig(
        tasks=_parse_csv(tasks, META_TASKS, "tasks"),
        levels=_parse_csv(levels, LEVELS, "levels"),
        episodes_per_cell=50 if full else episodes,
        seeds=tuple(int(s) for s in seeds.split(",")),
        mode=mode,
        prompt_arm=prompt_arm,
        modality=modality,
        perception=perception,
        max_trials=max_trials,
        cassette=cassette_obj,
        failure_dir=failure_dir,
        dump_dir=dump_perception,
    )


_shared_options = [
    click.option("--tasks", default=",".join(META_TASKS), show_default=True),
    click.option("--levels", default=",".join(LEVELS), show_default=True),
    click.option("--episodes", default=20, show_default=True, type=int),
    click.option("--seeds", default="0,1,2", show_default=True),
    click.option("--mode", default="oracle", show_default=True,
                 type=click.Choice(["oracle", "replay", "live"])),
    click.option("--prompt-arm", default="full", show_default=True,
                 type=click.Choice(["full", "api_only", "examples_only"])),
    click.option("--modality", default="multimodal", show_default=True,
                 type=click.Choice(["pure_language", "multimodal", "pointing"])),
    click.option("--noise", default="off", show_default=True,
                 type=click.Choice(["on", "off"])),
    click.option("--pre-process", default="on", show_default=True,
                 type=click.Choice(["on", "off"])),
    click.option("--post-process", default="on", show_default=True,
                 type=click.Choice(["on", "off"])),
    click.option("--max-trials", default=1, show_default=True, type=int),
    click.option("--cassette", default=None, type=click.Path(exists=True)),
    click.option("--failure-dir", default=None, type=click.Path()),
    click.option("--dump-perception", default=None, type=click.Path(),
                 help="Write before/after perception panels to this directory."),
    click.option("--full", is_flag=True, help="150 instances per cell (50 x 3 seeds)."),
]


def _apply_options(fn):
    for opt in reversed(_shared_options):
        fn = opt(fn)
    return fn


@click.group()
@click.option("-v", "--verbose", is_flag=True)
def main(verbose):
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command()
@_apply_options
@click.option("--out", default=None, type=click.Path(), help="Canonical JSON report path.")
@click.option("--markdown", default=None, type=click.Path(), help="Markdown table path.")
@click.option("--record-cassette", default=None, type=click.Path(),
              help="Append live responses to this cassette file (live mode).")
def run(out, markdown, record_cassette, **kwargs):
    """Run a benchmark sweep and write the report."""
    cfg = _build_config(**kwargs)
    if record_cassette:
        import os

        recorder = (
            Cassette.load(record_cassette)
            if os.path.exists(record_cassette)
            else Cassette()
        )
        cfg = RunConfig(**{**cfg.__dict__, "record_to": recorder})
    report = run_benchmark(cfg)
    if record_cassette and cfg.record_to is not None:
        cfg.record_to.save(record_cassette)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(report.to_canonical_json())
        click.echo(f"report written to {out}", err=True)
    if markdown:
        with open(markdown, "w", encoding="utf-8") as fh:
            fh.write(report.to_markdown())
    click.echo(report.to_markdown())
    click.echo(
        f"average success rate {report.average_rate():.1f}% over "
        f"{report.episodes_total} episodes in {report.wall_clock_s:.1f}s",
        err=True,
    )


@main.command()
@_apply_options
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8008, show_default=True, type=int)
@click.option("--idle-timeout", default=120.0, show_default=True, type=float)
@click.option("--debug-targets", is_flag=True,
              help="Expose ground-truth click targets in /status (testing).")
def serve(host, port, idle_timeout, debug_targets, **kwargs):
    """Serve the pointing-console endpoints and run episodes on user clicks."""
    from .service import serve as _serve

    cfg = _build_config(**kwargs)
    cfg = RunConfig(**{**cfg.__dict__, "modality": "pointing"})
    click.echo(f"pointing service on http://{host}:{port}", err=True)
    _serve(cfg, host=host, port=port, idle_timeout_s=idle_timeout,
           expose_debug_targets=debug_targets)


@main.command("embed-serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8009, show_default=True, type=int)
def embed_serve(host, port):
    """Serve the remote-embedder protocol backed by the local embedder."""
    import uvicorn

    from .service import build_embed_app

    uvicorn.run(build_embed_app(), host=host, port=port, log_level="warning")


if __name__ == "__main__":
    sys.exit(main())
