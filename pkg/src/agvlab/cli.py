"""Command-line entry points: sim runs, batch drop-point solving, datasets.

Machine-readable JSON goes to stdout; human-readable summaries go to
stderr so stdout stays parseable.  Exit codes are a stable contract:

* ``sim``      — 0 all jobs succeeded, 1 some failed, 2 invalid input.
* ``dropcalc`` — 0 ok, 2 unreadable input, 3 no drop zone,
  4 markers insufficient, 5 ambiguous.
* ``dataset``  — 0 ok, 2 invalid input.
"""

from __future__ import annotations

import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

from agvlab import imaging, perception, simworld
from agvlab.navigation import (
    NavConfig,
    NavigationError,
    plan_route,
    run_onboard_pipeline,
)

log = logging.getLogger("agvlab")


def _setup_logging() -> None:
    level = os.environ.get("AGVLAB_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _load_config(path: str | None) -> NavConfig:
    if path is None:
        return NavConfig()
    return NavConfig.from_file(path)


@click.group()
def main() -> None:
    """Desk-scale AGV lab: simulator, edge pipeline, dataset tooling."""
    _setup_logging()


# --- sim ---------------------------------------------------------------------


def _load_scene(path: str | None, seed: int) -> simworld.SceneSpec:
    if path is None:
        return simworld.default_scene(seed=seed)
    return simworld.SceneSpec.load(path)


def _pipeline_stats(scene: simworld.SceneSpec, cfg: NavConfig,
                    frames: int = 200) -> tuple[float, float]:
    """Mean onboard-pipeline latency (ms) and frames/s over rendered frames."""
    src = scene.track.source
    pose = simworld.Pose2D(src.pos[0], src.pos[1], math.pi / 2)
    frame = simworld.render_onboard(scene, pose, cfg)
    t0 = time.perf_counter()
    for _ in range(frames):
        run_onboard_pipeline(frame, cfg)
    elapsed = time.perf_counter() - t0
    latency_ms = elapsed / frames * 1000.0
    return latency_ms, frames / elapsed


@main.command("sim")
@click.argument("scene_path", required=False, type=click.Path())
@click.option("--headless/--serve", default=True,
              help="Run jobs to completion, or host the HTTP services.")
@click.option("--seed", default=0, show_default=True, help="RNG seed.")
@click.option("--jobs", default=4, show_default=True, help="Number of jobs.")
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="NavConfig overrides (key = value file).")
@click.option("--trace", "trace_path", type=click.Path(),
              help="Write the per-step trace as JSON lines.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def cmd_sim(scene_path, headless, seed, jobs, config_path, trace_path,
            host, port) -> None:
    """Run pick->deliver->return jobs on a scene (default: built-in track)."""
    try:
        cfg = _load_config(config_path)
        scene = _load_scene(scene_path, seed)
    except (OSError, ValueError, NavigationError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)

    if not headless:
        from agvlab import services

        server = services.LabServer(scene=scene, cfg=cfg)
        click.echo(f"serving on http://{host}:{port}", err=True)
        services.run(services.create_app(server), host=host, port=port)
        return

    rng = np.random.default_rng(seed)
    sim = simworld.Simulator(scene, cfg)
    t0 = time.perf_counter()
    results = []
    errors_mm = []
    planned_junctions = 0
    executed_junctions = 0
    for _ in range(jobs):
        dest = int(rng.integers(0, 4))
        simworld.stage_job(scene, dest, rng)
        seen_before = sim.nav.junctions_seen
        res = sim.run_job()
        executed_junctions += sim.nav.junctions_seen - seen_before
        plan = plan_route(dest, scene.track)
        planned_junctions += len(plan.outbound) + len(plan.inbound)
        gt = scene.true_drop_point(dest)
        err = (math.hypot(res.placed[0] - gt.x, res.placed[1] - gt.y)
               if res.placed is not None else None)
        if err is not None:
            errors_mm.append(err)
        results.append(res)
    wall = time.perf_counter() - t0

    latency_ms, fps = _pipeline_stats(scene, cfg)
    succeeded = sum(1 for r in results if r.completed)
    report = {
        "jobs_attempted": jobs,
        "jobs_succeeded": succeeded,
        "mean_placement_error_mm": (
            float(np.mean(errors_mm)) if errors_mm else None),
        "junction_success_rate": (
            1.0 if planned_junctions == 0
            else min(planned_junctions, executed_junctions) / planned_junctions),
        "mean_pipeline_latency_ms": latency_ms,
        "frames_per_second": fps,
        "wall_time_s": wall,
        "seed": seed,
    }
    if trace_path:
        simworld.SimTrace(sim.records, results).write_jsonl(trace_path)
    click.echo(json.dumps(report, indent=2))
    click.echo(
        f"{succeeded}/{jobs} jobs succeeded in {wall:.1f}s; "
        f"pipeline {fps:.0f} fps", err=True)
    sys.exit(0 if succeeded == jobs else 1)


# --- dropcalc ------------------------------------------------------------------


@main.command("dropcalc")
@click.argument("image_path", type=click.Path())
@click.option("--destination", type=click.IntRange(0, 3), default=None,
              help="Restrict the search to one destination square.")
def cmd_dropcalc(image_path, destination) -> None:
    """Compute delivery info from an overhead image; JSON on stdout."""
    from agvlab.services import delivery_payload, _rfc3339_now

    try:
        img = imaging.read_png(image_path)
    except (OSError, ValueError) as exc:
        click.echo(f"error: cannot read {image_path}: {exc}", err=True)
        sys.exit(2)
    try:
        info = perception.compute_delivery(img, destination=destination)
    except perception.AssignmentError as exc:
        click.echo(f"error: markers insufficient "
                   f"({exc.markers_detected} detected)", err=True)
        sys.exit(4)
    except perception.NoJobError:
        click.echo("error: no drop zone found", err=True)
        sys.exit(3)
    except perception.AmbiguityError as exc:
        click.echo(f"error: ambiguous destinations {exc.destinations}", err=True)
        sys.exit(5)
    click.echo(json.dumps(delivery_payload(info, _rfc3339_now()), indent=2))


# --- dataset -------------------------------------------------------------------


@main.command("dataset")
@click.argument("master_path", type=click.Path())
@click.argument("label_path", type=click.Path())
@click.option("--out", "out_dir", type=click.Path(), default="dataset",
              show_default=True)
@click.option("--train", default=1024, show_default=True)
@click.option("--test", "test_count", default=128, show_default=True)
@click.option("--seed", default=0, show_default=True)
def cmd_dataset(master_path, label_path, out_dir, train, test_count, seed) -> None:
    """Generate an augmented crop dataset from a master image and its label."""
    try:
        master = imaging.read_png(master_path)
        label = imaging.read_png(label_path)
        spec = perception.AugmentationSpec(train_count=train,
                                           test_count=test_count, seed=seed)
        train_pairs, test_pairs = perception.augment_dataset(master, label, spec)
    except (OSError, ValueError, perception.GenerationError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)

    root = Path(out_dir)
    manifest = {"seed": seed, "train": [], "test": []}
    for split, pairs in (("train", train_pairs), ("test", test_pairs)):
        d = root / split
        d.mkdir(parents=True, exist_ok=True)
        for i, pair in enumerate(pairs):
            img_name = f"{i:04d}.png"
            lab_name = f"{i:04d}_label.png"
            imaging.write_png(d / img_name, pair.image)
            imaging.write_png(d / lab_name, pair.label)
            manifest[split].append({
                "image": f"{split}/{img_name}",
                "label": f"{split}/{lab_name}",
                "transform": pair.transform,
            })
    with open(root / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    click.echo(json.dumps({
        "out": str(root),
        "train": len(train_pairs),
        "test": len(test_pairs),
    }))
    click.echo(f"wrote {len(train_pairs)}+{len(test_pairs)} pairs to {root}",
               err=True)


if __name__ == "__main__":
    main()
