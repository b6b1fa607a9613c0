"""Command-line surface: run episode batches, render maps, report metrics.

Exit codes: 0 on completion (even with failed episodes), 2 on configuration
errors, 3 on I/O errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .envgen import EnvGenConfig, generate_environment
from .episode import (
    EpisodeConfig,
    EpisodeResult,
    FailureReason,
    PlannerConfig,
    SensorConfig,
    compute_metrics,
    run_episode,
)
from .grid import FovSpec
from .mapping import load_snapshot, save_snapshot
from .planner import Strategy
from .render import LAYERS, render_layer, render_trajectory, write_pgm, write_ppm

ENDPOINT_ENV_VAR = "BANDITNAV_SENSOR_ENDPOINT"

REPORT_COLUMNS = ("strategy", "episodes", "sr", "spl", "mean_steps", "mean_path_m")


class ConfigError(Exception):
    """Bad manifest, config file, or flag value; maps to exit code 2."""


@dataclass(frozen=True)
class RunManifest:
    """One batch: which seeds and strategies to run, where results go."""

    seeds: tuple[int, ...]
    strategies: tuple[Strategy, ...]
    out_dir: Path
    env_config: EnvGenConfig
    episode_config: EpisodeConfig
    jobs: int = 1

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ConfigError("seeds: at least one seed is required")
        if not self.strategies:
            raise ConfigError("strategies: at least one strategy is required")


def parse_seed_spec(spec: str) -> tuple[int, ...]:
    """Parse ``a..b`` (inclusive) or a comma-separated list of seeds."""
    spec = spec.strip()
    if ".." in spec:
        lo_text, _, hi_text = spec.partition("..")
        try:
            lo, hi = int(lo_text), int(hi_text)
        except ValueError as exc:
            raise ConfigError(f"seeds: cannot parse range {spec!r}") from exc
        if hi < lo:
            raise ConfigError(f"seeds: empty range {spec!r}")
        return tuple(range(lo, hi + 1))
    try:
        return tuple(int(part) for part in spec.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"seeds: cannot parse {spec!r}") from exc


def parse_strategies(spec: str) -> tuple[Strategy, ...]:
    out = []
    for name in spec.split(","):
        name = name.strip()
        if not name:
            continue
        try:
            out.append(Strategy(name))
        except ValueError as exc:
            valid = ", ".join(s.value for s in Strategy)
            raise ConfigError(
                f"strategies: unknown strategy {name!r} (expected one of {valid})"
            ) from exc
    return tuple(out)


def _build_configs(raw: dict) -> tuple[EnvGenConfig, EpisodeConfig]:
    for table in raw:
        if table not in ("env", "episode", "sensor", "planner"):
            raise ConfigError(f"config: unknown table [{table}]")
    try:
        env_cfg = EnvGenConfig(**raw.get("env", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config [env]: {exc}") from exc

    episode_raw = dict(raw.get("episode", {}))
    fov_kwargs = {}
    for key, target in (
        ("fov_degrees", "horizontal_fov"),
        ("max_range", "max_range"),
        ("ray_count", "ray_count"),
    ):
        if key in episode_raw:
            value = episode_raw.pop(key)
            fov_kwargs[target] = math.radians(value) if key == "fov_degrees" else value
    if "turn_degrees" in episode_raw:
        episode_raw["turn_angle"] = math.radians(episode_raw.pop("turn_degrees"))

    try:
        sensor_raw = dict(raw.get("sensor", {}))
        if "prompt_biases" in sensor_raw:
            sensor_raw["prompt_biases"] = tuple(sensor_raw["prompt_biases"])
        if "prompts" in sensor_raw:
            sensor_raw["prompts"] = tuple(sensor_raw["prompts"])
        sensor = SensorConfig(**sensor_raw)
        planner = PlannerConfig(**raw.get("planner", {}))
        defaults = EpisodeConfig()
        fov = replace(defaults.fov, **fov_kwargs) if fov_kwargs else defaults.fov
        episode_cfg = EpisodeConfig(fov=fov, sensor=sensor, planner=planner, **episode_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config: {exc}") from exc
    return env_cfg, episode_cfg


def load_manifest(args: argparse.Namespace) -> RunManifest:
    raw: dict = {}
    if args.config is not None:
        try:
            with open(args.config, "rb") as fh:
                raw = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config: no such file {args.config!r}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config: {exc}") from exc
    env_cfg, episode_cfg = _build_configs(raw)

    endpoint = os.environ.get(ENDPOINT_ENV_VAR)
    if endpoint:
        episode_cfg = replace(episode_cfg, sensor=replace(episode_cfg.sensor, endpoint=endpoint))

    return RunManifest(
        seeds=parse_seed_spec(args.seeds),
        strategies=parse_strategies(args.strategies),
        out_dir=Path(args.out),
        env_config=env_cfg,
        episode_config=episode_cfg,
        jobs=max(1, args.jobs),
    )


def _run_one(task) -> tuple[dict, bytes]:
    """Run a single (strategy, seed) episode; returns the record and snapshot."""
    env_cfg, episode_cfg, strategy, seed = task
    env = generate_environment(env_cfg, seed)
    config = replace(
        episode_cfg,
        rng_seed=seed,
        planner=replace(episode_cfg.planner, strategy=strategy, rng_seed=seed),
    )
    rollout = run_episode(env, config, episode_id=seed)
    result = rollout.result
    record = {
        "strategy": strategy.value,
        "seed": seed,
        "success": result.success,
        "steps_used": result.steps_used,
        "path_length_m": result.path_length,
        "spl_term": result.spl_term,
        "failure_reason": result.failure_reason.value if result.failure_reason else None,
        "shortest_path_m": env.shortest_path_len,
        "category": env.category,
        "snapshot": f"../../snapshots/{strategy.value}/seed_{seed}.gsmap",
        "trajectory": [[p.position[0], p.position[1], p.heading] for p in rollout.poses],
    }
    buffer = io.BytesIO()
    save_snapshot(rollout.occupancy, rollout.semantic, buffer)
    return record, buffer.getvalue()


def cmd_run(manifest: RunManifest) -> int:
    tasks = [
        (manifest.env_config, manifest.episode_config, strategy, seed)
        for strategy in manifest.strategies
        for seed in manifest.seeds
    ]
    if manifest.jobs > 1:
        with ProcessPoolExecutor(max_workers=manifest.jobs) as pool:
            outcomes = list(pool.map(_run_one, tasks))
    else:
        outcomes = [_run_one(task) for task in tasks]

    out = manifest.out_dir
    records_by_strategy: dict[str, list[dict]] = {}
    for (env_cfg, episode_cfg, strategy, seed), (record, snapshot) in zip(tasks, outcomes):
        record_dir = out / "records" / strategy.value
        snap_dir = out / "snapshots" / strategy.value
        record_dir.mkdir(parents=True, exist_ok=True)
        snap_dir.mkdir(parents=True, exist_ok=True)
        (record_dir / f"seed_{seed}.json").write_text(
            json.dumps(record, sort_keys=True) + "\n", encoding="utf-8"
        )
        (snap_dir / f"seed_{seed}.gsmap").write_bytes(snapshot)
        records_by_strategy.setdefault(strategy.value, []).append(record)

    _write_metrics_csv(out / "metrics.csv", records_by_strategy)
    return 0


def _records_to_rows(records_by_strategy: dict[str, list[dict]]) -> list[dict]:
    rows = []
    for strategy in sorted(records_by_strategy):
        records = records_by_strategy[strategy]
        results = [
            EpisodeResult(
                success=r["success"],
                steps_used=r["steps_used"],
                path_length=r["path_length_m"],
                spl_term=r["spl_term"],
                failure_reason=FailureReason(r["failure_reason"])
                if r["failure_reason"]
                else None,
            )
            for r in records
        ]
        shortest = [r["shortest_path_m"] for r in records]
        sr, spl = compute_metrics(results, shortest)
        rows.append(
            {
                "strategy": strategy,
                "episodes": len(records),
                "sr": sr,
                "spl": spl,
                "mean_steps": float(sum(r["steps_used"] for r in records)) / len(records),
                "mean_path_m": float(sum(r["path_length_m"] for r in records)) / len(records),
            }
        )
    return rows


def _write_metrics_csv(path: Path, records_by_strategy: dict[str, list[dict]]) -> None:
    rows = _records_to_rows(records_by_strategy)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row["strategy"],
                    row["episodes"],
                    f"{row['sr']:.6f}",
                    f"{row['spl']:.6f}",
                    f"{row['mean_steps']:.6f}",
                    f"{row['mean_path_m']:.6f}",
                ]
            )


def cmd_report(results_dir: Path, stream=None) -> int:
    stream = stream or sys.stdout
    records_root = results_dir / "records"
    if not records_root.is_dir():
        raise FileNotFoundError(f"no records directory under {results_dir}")
    records_by_strategy: dict[str, list[dict]] = {}
    for strategy_dir in sorted(records_root.iterdir()):
        if not strategy_dir.is_dir():
            continue
        records = [
            json.loads(p.read_text(encoding="utf-8"))
            for p in sorted(strategy_dir.glob("*.json"))
        ]
        if records:
            records_by_strategy[strategy_dir.name] = records
    if not records_by_strategy:
        raise FileNotFoundError(f"no episode records under {records_root}")

    rows = _records_to_rows(records_by_strategy)
    header = f"{'strategy':<10} {'episodes':>8} {'sr':>8} {'spl':>8} {'steps':>8} {'path_m':>8}"
    stream.write(header + "\n")
    for row in rows:
        stream.write(
            f"{row['strategy']:<10} {row['episodes']:>8d} {row['sr']:>8.2f} "
            f"{row['spl']:>8.2f} {row['mean_steps']:>8.1f} {row['mean_path_m']:>8.2f}\n"
        )
    _write_metrics_csv(results_dir / "report.csv", records_by_strategy)
    return 0


def cmd_render(in_path: Path, layer: str, out_path: Path) -> int:
    if layer not in LAYERS:
        raise ConfigError(f"layer: unknown layer {layer!r}; expected one of {LAYERS}")
    if layer == "trajectory":
        if in_path.suffix != ".json":
            raise ConfigError("layer trajectory needs an episode record (.json) as input")
        record = json.loads(in_path.read_text(encoding="utf-8"))
        snapshot_path = (in_path.parent / record["snapshot"]).resolve()
        occ, sem = load_snapshot(snapshot_path)
        positions = [(x, y) for x, y, _ in record["trajectory"]]
        write_ppm(out_path, render_trajectory(occ, positions))
        return 0
    occ, sem = load_snapshot(in_path)
    write_pgm(out_path, render_layer(occ, sem, layer))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="banditnav",
        description="Run object-search episodes, render maps, and report SR/SPL metrics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a batch of episodes")
    run.add_argument("--config", default=None, help="TOML config file")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--seeds", default="0", help="seed range a..b (inclusive) or csv list")
    run.add_argument("--strategies", default="ifbe2", help="comma-separated strategy names")
    run.add_argument("--jobs", type=int, default=1, help="parallel episode workers")

    render = sub.add_parser("render", help="render a snapshot or episode record to an image")
    render.add_argument("--in", dest="in_path", required=True)
    render.add_argument("--layer", required=True, help=f"one of {', '.join(LAYERS)}")
    render.add_argument("--out", required=True)

    report = sub.add_parser("report", help="aggregate episode records into a metrics table")
    report.add_argument("--in", dest="in_path", required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            manifest = load_manifest(args)
            manifest.out_dir.mkdir(parents=True, exist_ok=True)
            return cmd_run(manifest)
        if args.command == "render":
            return cmd_render(Path(args.in_path), args.layer, Path(args.out))
        return cmd_report(Path(args.in_path))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
