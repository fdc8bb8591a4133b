"""Command-line front end: validate scenes, optimize configurations, render
coverage maps, and run the twin-gap benchmark.

Every command writes a run manifest next to its outputs; rerunning with the
manifest's parameters reproduces every data file byte-identically. All
randomness comes from explicit seed flags. Exit codes: 0 success, 1
validation or guard failure, 2 I/O failure.
"""

import argparse
import json
import math
import statistics
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .scene import (SceneParseError, SceneValidationError, load_scene,
                    validate_scene, with_receiver)
from .channel import channel_snapshot, snapshot_to_json, snapshot_from_json
from .ris import (ONE_BIT, all_zero, bit_grid, config_to_json, config_from_json,
                  apply_config)
from .optimize import (dt_dpo, dt_cir, iterative_search, exhaustive_search,
                       random_search, report_to_json, candidates_to_json)
from .evaluate import (PerturbationSpec, coverage_map, coverage_to_csv,
                       coverage_to_ppm, default_grid, perturb_scene,
                       rsrp_gain_db, twin_gap_experiment, twin_gap_to_csv,
                       twin_gap_to_json, received_power)
from . import report as figures


class _CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _read_text(path):
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise _CliError(f"cannot read {path}: {exc}", 2) from exc


def _load_scene_file(path):
    text = _read_text(path)
    try:
        return load_scene(text)
    except SceneValidationError:
        raise
    except SceneParseError as exc:
        raise _CliError(f"{path}: {exc}", 1) from exc


def _apply_overrides(scene, args):
    if getattr(args, "pattern_q", None) is not None:
        panel = replace(scene.deployment.ris, pattern_exponent=args.pattern_q)
        scene = replace(scene, deployment=replace(scene.deployment, ris=panel))
    return scene


def _resolve_outdir(args):
    if args.out:
        out = Path(args.out)
    else:
        stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
        out = Path("runs") / f"{args.command}-{stamp}"
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(outdir, args, parameters):
    manifest = {
        "command": args.command,
        "scene_path": args.scene,
        "parameters": parameters,
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def manifest_to_argv(manifest, out=None):
    """Rebuild the command line that reproduces a manifest's outputs."""
    argv = [manifest["command"], "--scene", manifest["scene_path"]]
    for key, value in manifest["parameters"].items():
        flag = "--" + key.replace("_", "-")
        if isinstance(value, bool):
            if value:
                argv.append(flag)
        elif isinstance(value, list):
            for item in value:
                argv.extend([flag, str(item)])
        elif value is not None:
            argv.extend([flag, repr(value) if isinstance(value, float) else str(value)])
    if out is not None:
        argv.extend(["--out", str(out)])
    return argv


# ---------------------------------------------------------------------------
# subcommands

def _cmd_validate(args):
    text = _read_text(args.scene)
    try:
        scene = load_scene(text)
    except SceneParseError as exc:
        print(f"parse error: {exc}")
        return 1
    except SceneValidationError as exc:
        for v in exc.violations:
            print(f"{v.context}: {v.rule}: {v.message}")
        return 1
    for v in validate_scene(scene):
        print(f"{v.context}: {v.rule}: {v.message}")
        return 1
    return 0


def _method_candidates(scene, snapshot, args):
    """Returns (candidate set or None, search report or None)."""
    if args.method == "dt-dpo":
        return dt_dpo(snapshot, args.max_passes), None
    if args.method == "dt-cir":
        return dt_cir(snapshot), None
    if args.method == "iterative":
        return None, iterative_search(snapshot, all_zero(snapshot.n), args.max_passes)
    if args.method == "exhaustive":
        return None, exhaustive_search(snapshot)
    if args.method == "random":
        return None, random_search(snapshot, args.trials, args.seed)
    raise _CliError(f"unknown method {args.method!r}", 1)


def _cmd_optimize(args):
    scene = _apply_overrides(_load_scene_file(args.scene), args)
    panel = scene.deployment.ris

    if args.snapshot_in:
        snapshot = snapshot_from_json(_read_text(args.snapshot_in))
        if snapshot.n != panel.n_elements:
            raise _CliError(f"snapshot has {snapshot.n} elements, panel has "
                            f"{panel.n_elements}", 1)
    else:
        snapshot = channel_snapshot(scene, args.max_bounces)
    if args.snapshot_out:
        Path(args.snapshot_out).write_text(snapshot_to_json(snapshot))

    candidates, search = _method_candidates(scene, snapshot, args)
    outdir = _resolve_outdir(args)

    if search is not None:
        configs = [search.best_config]
        (outdir / "report.json").write_text(report_to_json(search))
    else:
        configs = list(candidates.configs)
        (outdir / "candidates.json").write_text(candidates_to_json(candidates))
        summary = {
            "method": candidates.method_label,
            "n": snapshot.n,
            "ops": len(configs),
            "candidate_powers_linear": [received_power(snapshot, c) for c in configs],
        }
        (outdir / "report.json").write_text(json.dumps(summary, indent=2) + "\n")

    best_gain = max(rsrp_gain_db(snapshot, c) for c in configs)
    for k, config in enumerate(configs):
        (outdir / f"config_{k}.json").write_text(
            config_to_json(config, invert_polarity=args.invert_polarity))
        if config.quantization == ONE_BIT:
            bits = config.bits if not args.invert_polarity else 1 - config.bits
            (outdir / f"grid_{k}.txt").write_text(
                bit_grid(config, panel.rows, panel.cols, args.invert_polarity))
            figures.save_bits_figure(bits, panel.rows, panel.cols,
                                     outdir / f"fig_config_{k}.png",
                                     title=f"{args.method} candidate {k}")

    _write_manifest(outdir, args, {
        "method": args.method,
        "max_passes": args.max_passes,
        "max_bounces": args.max_bounces,
        "pattern_q": args.pattern_q,
        "invert_polarity": args.invert_polarity,
        "trials": args.trials,
        "seed": args.seed,
        "snapshot_in": args.snapshot_in,
        "snapshot_out": args.snapshot_out,
    })
    print(f"best gain over all-zero: {best_gain:.2f} dB")
    return 0


def _parse_grid(text, scene):
    if text is None:
        return default_grid(scene, 50, 50)
    parts = text.split(",")
    if len(parts) != 3:
        raise _CliError("--grid expects nx,ny,cell_size", 1)
    try:
        nx, ny, cell = int(parts[0]), int(parts[1]), float(parts[2])
    except ValueError as exc:
        raise _CliError(f"bad --grid value {text!r}: {exc}", 1) from exc
    return default_grid(scene, nx, ny, cell)


def _load_config_arg(args, panel):
    if args.all_zero:
        return all_zero(panel.n_elements)
    if not args.config:
        raise _CliError("coverage needs --config FILE or --all-zero", 1)
    config = config_from_json(_read_text(args.config))
    if config.n != panel.n_elements:
        raise _CliError(f"config has {config.n} elements, panel has "
                        f"{panel.n_elements}", 1)
    return config


def _cmd_coverage(args):
    scene = _apply_overrides(_load_scene_file(args.scene), args)
    panel = scene.deployment.ris
    config = _load_config_arg(args, panel)
    grid = _parse_grid(args.grid, scene)
    outdir = _resolve_outdir(args)

    cov = coverage_map(scene, config, grid, args.max_bounces, args.threads)
    (outdir / "coverage.csv").write_text(coverage_to_csv(cov))
    figures.save_coverage_figure(cov, outdir / "coverage.png", scene)
    if args.ppm:
        (outdir / "coverage.ppm").write_bytes(
            coverage_to_ppm(cov, args.ppm_floor, args.ppm_ceil))

    if args.compare:
        other = config_from_json(_read_text(args.compare))
        if other.n != panel.n_elements:
            raise _CliError(f"compare config has {other.n} elements, panel has "
                            f"{panel.n_elements}", 1)
        cov2 = coverage_map(scene, other, grid, args.max_bounces, args.threads)
        diff = cov.rsrp_db - cov2.rsrp_db
        lines = ["," + ",".join(f"{x:.6f}" for x in grid.x_coords())]
        for iy, y in enumerate(grid.y_coords()):
            row = ",".join(f"{v:.4f}" if math.isfinite(v) else "NA" for v in diff[iy])
            lines.append(f"{y:.6f},{row}")
        (outdir / "coverage_diff.csv").write_text("\n".join(lines) + "\n")

    ix, iy = cov.nearest_cell(scene.deployment.rx.position)
    _write_manifest(outdir, args, {
        "config": args.config,
        "all_zero": args.all_zero,
        "compare": args.compare,
        "grid": args.grid,
        "max_bounces": args.max_bounces,
        "pattern_q": args.pattern_q,
        "threads": args.threads,
        "ppm": args.ppm,
        "ppm_floor": args.ppm_floor,
        "ppm_ceil": args.ppm_ceil,
    })
    val = cov.rsrp_db[iy, ix]
    print(f"rsrp at rx cell ({ix}, {iy}): "
          + (f"{val:.4f} dBm" if math.isfinite(val) else "NA"))
    return 0


def _parse_rx_list(values, scene):
    if not values:
        return [scene.deployment.rx.position]
    out = []
    for v in values:
        parts = v.split(",")
        if len(parts) != 3:
            raise _CliError(f"--rx expects x,y,z, got {v!r}", 1)
        out.append(np.array([float(p) for p in parts]))
    return out


def _median(values):
    finite = [v for v in values if math.isfinite(v)]
    return statistics.median(finite) if finite else float("nan")


def _cmd_benchmark(args):
    scene = _apply_overrides(_load_scene_file(args.scene), args)
    rx_list = _parse_rx_list(args.rx, scene)
    outdir = _resolve_outdir(args)

    seeds = [args.seed + k for k in range(args.seeds)]
    reports = []
    for seed in seeds:
        spec = PerturbationSpec(
            geometry_jitter_sigma=args.sigma,
            pattern_exponent_delta=args.pattern_q_delta,
            reflection_delta=args.reflection_delta,
            seed=seed,
        )
        phys = perturb_scene(scene, spec)
        reports.append(twin_gap_experiment(scene, phys, rx_list,
                                           args.max_passes, args.max_bounces))

    doc = {"seeds": [{"seed": seed, **json.loads(twin_gap_to_json(rep))}
                     for seed, rep in zip(seeds, reports)]}
    (outdir / "twin_gap.json").write_text(json.dumps(doc, indent=2) + "\n")

    lines = ["seed,rx_id,method,gain_db,ops"]
    for seed, rep in zip(seeds, reports):
        for row in twin_gap_to_csv(rep).splitlines()[1:]:
            lines.append(f"{seed},{row}")
    (outdir / "twin_gap.csv").write_text("\n".join(lines) + "\n")

    methods = ("benchmark", "dt_dpo", "dt_cir")
    medians = {m: [] for m in methods}
    print(f"{'rx':>4} {'benchmark':>12} {'dt_dpo':>12} {'dt_cir':>12} {'ops':>14}")
    for rx_id in range(len(rx_list)):
        per = {
            "benchmark": _median([r.records[rx_id].gain_db_benchmark for r in reports]),
            "dt_dpo": _median([r.records[rx_id].gain_db_dt_dpo for r in reports]),
            "dt_cir": _median([r.records[rx_id].gain_db_dt_cir for r in reports]),
        }
        for m in methods:
            medians[m].append(per[m])
        rec = reports[0].records[rx_id]
        print(f"{rx_id:>4} {per['benchmark']:>12.2f} {per['dt_dpo']:>12.2f} "
              f"{per['dt_cir']:>12.2f} {rec.ops_benchmark:>6}/{rec.ops_dt_dpo}/{rec.ops_dt_cir}")

    figures.save_gain_bars(list(range(len(rx_list))), medians,
                           outdir / "gains.png", title="Median RSRP gain over all-zero")
    _write_manifest(outdir, args, {
        "sigma": args.sigma,
        "pattern_q_delta": args.pattern_q_delta,
        "reflection_delta": args.reflection_delta,
        "seed": args.seed,
        "seeds": args.seeds,
        "rx": list(args.rx) if args.rx else None,
        "max_passes": args.max_passes,
        "max_bounces": args.max_bounces,
        "pattern_q": args.pattern_q,
        "threads": args.threads,
    })
    return 0


# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="ristwin",
        description="Digital-twin ray tracing and 1-bit RIS phase optimization")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, threads=False):
        p.add_argument("--scene", required=True, help="scene JSON file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--max-bounces", type=int, default=2,
                       help="direct-link reflection depth (default 2)")
        p.add_argument("--pattern-q", type=float, default=None,
                       help="override the panel's cos^q pattern exponent")
        if threads:
            p.add_argument("--threads", type=int, default=1,
                           help="worker processes; results are identical for any value")

    p = sub.add_parser("validate", help="check a scene file against every invariant")
    p.add_argument("--scene", required=True)

    p = sub.add_parser("optimize", help="compute a phase configuration")
    common(p)
    p.add_argument("--method", required=True,
                   choices=["dt-dpo", "dt-cir", "iterative", "exhaustive", "random"])
    p.add_argument("--max-passes", type=int, default=10)
    p.add_argument("--trials", type=int, default=256, help="random-search trials")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--invert-polarity", action="store_true",
                   help="flip exported bits (hardware 0/1 polarity)")
    p.add_argument("--snapshot-in", default=None, help="reuse a solver snapshot")
    p.add_argument("--snapshot-out", default=None, help="dump the solver snapshot")

    p = sub.add_parser("coverage", help="render an RSRP coverage map")
    common(p, threads=True)
    p.add_argument("--config", default=None, help="phase config JSON")
    p.add_argument("--all-zero", action="store_true", help="use the all-zero baseline")
    p.add_argument("--compare", default=None, help="second config for a dB-difference map")
    p.add_argument("--grid", default=None, help="nx,ny,cell_size (default 50,50,lambda/2)")
    p.add_argument("--ppm", action="store_true", help="also write a P6 heatmap")
    p.add_argument("--ppm-floor", type=float, default=-120.0)
    p.add_argument("--ppm-ceil", type=float, default=-30.0)

    p = sub.add_parser("benchmark", help="twin-gap experiment over perturbed scenes")
    common(p, threads=True)
    p.add_argument("--sigma", type=float, default=0.0,
                   help="geometry jitter sigma in meters")
    p.add_argument("--pattern-q-delta", type=float, default=0.0)
    p.add_argument("--reflection-delta", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0, help="base seed")
    p.add_argument("--seeds", type=int, default=1, help="number of seeds")
    p.add_argument("--rx", action="append", default=None,
                   help="receiver position x,y,z (repeatable; default scene rx)")
    p.add_argument("--max-passes", type=int, default=10)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "validate": _cmd_validate,
        "optimize": _cmd_optimize,
        "coverage": _cmd_coverage,
        "benchmark": _cmd_benchmark,
    }
    try:
        return handlers[args.command](args)
    except _CliError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    except SceneValidationError as exc:
        for v in exc.violations:
            print(f"{v.context}: {v.rule}: {v.message}", file=sys.stderr)
        return 1
    except (SceneParseError, ValueError) as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
