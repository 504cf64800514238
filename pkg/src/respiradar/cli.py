"""Command-line workflow: simulate -> process -> evaluate, plus parameter sweeps.

Every command writes its artifacts into ``--out`` together with a
``manifest.json`` that records the configuration snapshot, seed, tool
version and the list of files produced.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import itertools
import json
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import SWEEP_KEYS, RunConfig, load_config, parse_seeds
from .errors import ConfigError, DegenerateVariance, NoOverlap, RespiradarError
from .eval_harness import align_series, correlation, process_scene, report_for, reports_from_processed
from .fileio import (format_reports, read_cube, read_ground_truth, read_interval_csv, write_cube,
                     write_image, write_intensity_csv, write_interval_csv, write_metrics_csv,
                     write_scatter_csv)
from .imaging import form_image, suppress_clutter, taylor_weights
from .pipeline import process_cube
from .sim_core import range_transform, synthesize_cube

METHODS = ("conventional", "proposed")


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None
    artifacts: list = field(default_factory=list)
    version: str = __version__
    timestamp: str = ""

    def write(self, out_dir: Path) -> Path:
        self.timestamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        path = out_dir / "manifest.json"
        path.write_text(json.dumps(dataclasses.asdict(self), indent=2) + "\n")
        return path


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "eps_th", None) is not None:
        if args.eps_th <= 0:
            raise ConfigError("--eps-th must be positive")
        cfg = dataclasses.replace(cfg, pipeline=dataclasses.replace(cfg.pipeline, eps_th=args.eps_th),
                                  eps_th_list=(args.eps_th,))
    return cfg


# -- simulate ------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _config(args)
    out = _out_dir(args.out)
    layout = cfg.layout()
    manifest = RunManifest("simulate", cfg.snapshot(), cfg.scene.seed)
    for i in range(len(cfg.scene.radar_positions)):
        cube = synthesize_cube(cfg.scene, layout, cfg.radar, i)
        name = f"radar{i + 1}.rcub"
        write_cube(out / name, cube)
        manifest.artifacts.append(name)
        print(f"wrote {out / name}: {cube.samples.shape[0]} frames x {cube.samples.shape[1]} samples "
              f"x {cube.samples.shape[2]} channels")
    manifest.write(out)
    return 0


# -- process -------------------------------------------------------------------

def _process_file(task):
    path, pipeline, methods, eps_th, out, save_image = task
    cube = read_cube(path)
    stem = Path(path).stem
    written = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = process_cube(cube, pipeline)
        for method in methods:
            series = res.conventional() if method == "conventional" else res.proposed(eps_th)
            name = f"{stem}_{method}.csv"
            write_interval_csv(out / name, series)
            written.append(name)
    name = f"{stem}_intensity.csv"
    write_intensity_csv(out / name, res.intensity)
    written.append(name)
    if save_image:
        rows, cols = np.nonzero(res.region.mask)
        grid = res.intensity.grid.subgrid(slice(rows.min(), rows.max() + 1),
                                          slice(cols.min(), cols.max() + 1))
        img = suppress_clutter(form_image(range_transform(cube), cube.layout, grid,
                                          taylor_weights(cube.layout.K)))
        name = f"{stem}_region.rimg"
        write_image(out / name, img)
        written.append(name)
    notes = sorted({str(w.message) for w in caught})
    return written, res.region.M, res.region.anchor_position, notes


def cmd_process(args) -> int:
    cfg = _config(args)
    out = _out_dir(args.out)
    methods = METHODS if args.method == "both" else (args.method,)
    eps_th = cfg.pipeline.eps_th
    tasks = [(p, cfg.pipeline, methods, eps_th, out, args.save_image) for p in args.cubes]
    manifest = RunManifest("process", cfg.snapshot(), None)
    manifest.config["inputs"] = [str(p) for p in args.cubes]
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            results = list(ex.map(_process_file, tasks))
    else:
        results = [_process_file(t) for t in tasks]
    for path, (written, M, anchor, notes) in zip(args.cubes, results):
        for note in notes:
            print(f"warning: {path}: {note}", file=sys.stderr)
        print(f"{path}: target at {anchor[0]:.3f} m, {anchor[1]:.1f} deg; region of {M} pixels")
        manifest.artifacts.extend(written)
    manifest.write(out)
    return 0


# -- evaluate ------------------------------------------------------------------

def _truth_at(times, truth_path):
    axis, tau, _ = read_ground_truth(truth_path)
    dt = axis[1] - axis[0]
    idx = np.rint((np.asarray(times) - axis[0]) / dt).astype(int)
    if np.any(idx < 0) or np.any(idx >= axis.size):
        raise RespiradarError(f"{truth_path}: hop times fall outside the recorded span")
    return tau[idx]


def cmd_evaluate(args) -> int:
    if len(args.series) > 2:
        raise ConfigError("evaluate takes one or two interval CSVs")
    if args.truth and len(args.truth) != len(args.series):
        raise ConfigError("--truth needs one cube per interval CSV")
    out = _out_dir(args.out)
    series = [read_interval_csv(p) for p in args.series]
    truths = ([_truth_at(s.times, t) for s, t in zip(series, args.truth)] if args.truth
              else [None] * len(series))
    method = args.method or next((m for m in METHODS if m in Path(args.series[0]).stem), "series")
    manifest = RunManifest("evaluate", {"inputs": [str(p) for p in args.series],
                                        "truth": [str(p) for p in (args.truth or [])],
                                        "method": method, "eps_th": args.eps_th}, None)
    if len(series) == 2:
        try:
            pairs = align_series(*series)
        except NoOverlap as exc:
            counts = ", ".join(f"{p}: {int(np.sum(s.accepted))}/{len(s)} accepted"
                               for p, s in zip(args.series, series))
            raise NoOverlap(f"{exc}; {counts}") from exc
        try:
            correlation(pairs)
        except DegenerateVariance as exc:
            print(f"note: correlation undefined ({exc})", file=sys.stderr)
        write_scatter_csv(out / "scatter.csv", *series)
        manifest.artifacts.append("scatter.csv")
    report = report_for(series, truths, method, args.eps_th)
    write_metrics_csv(out / "metrics.csv", [report])
    text = format_reports([report])
    (out / "metrics.txt").write_text(text + "\n")
    manifest.artifacts += ["metrics.csv", "metrics.txt"]
    manifest.write(out)
    print(text)
    return 0


# -- sweep ---------------------------------------------------------------------

def parse_grid(text: str) -> dict:
    """``"eps_th=0.5,0.2;tau0=1.5,2,2.5"`` -> ``{"eps_th": (0.5, 0.2), "tau0": (1.5, 2.0, 2.5)}``."""
    grid = {}
    for part in text.split(";"):
        if not part.strip():
            continue
        if "=" not in part:
            raise ConfigError(f"grid entry {part!r} is not key=values")
        key, vals = (s.strip() for s in part.split("=", 1))
        if key not in SWEEP_KEYS:
            raise ConfigError(f"grid key {key!r} not sweepable (choose from {', '.join(SWEEP_KEYS)})")
        try:
            values = tuple(float(v) for v in vals.split(",") if v.strip())
        except ValueError as exc:
            raise ConfigError(f"grid values for {key!r}: {exc}") from exc
        if not values:
            raise ConfigError(f"grid key {key!r} has no values")
        grid[key] = values
    return grid


def _sweep_task(task):
    cfg, seed, pipe_over = task
    try:
        pipeline = dataclasses.replace(cfg.pipeline, **pipe_over)
        scene = dataclasses.replace(cfg.scene, seed=seed)
        return process_scene(scene, pipeline, cfg.radar, cfg.layout()), None
    except (RespiradarError, ValueError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


_METRICS = ("rms_inter_radar", "rms_inter_radar_ungated", "correlation", "acquisition_rate",
            "rms_vs_truth", "n_common")


def cmd_sweep(args) -> int:
    cfg = _config(args)
    grid = parse_grid(args.grid) if args.grid is not None else dict(cfg.sweep_grid)
    if not grid:
        raise ConfigError("empty parameter grid (set [sweep] keys or pass --grid)")
    seeds = (args.seed,) if args.seed is not None else (
        parse_seeds(args.seeds) if args.seeds else cfg.sweep_seeds)
    out = _out_dir(args.out)

    keys = list(grid)
    points = [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]
    # eps_th only gates; everything else needs its own processing pass
    pipe_points = []
    for pt in points:
        over = {k: v for k, v in pt.items() if k != "eps_th"}
        if over not in pipe_points:
            pipe_points.append(over)
    tasks = [(cfg, s, over) for s in seeds for over in pipe_points]
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            results = list(ex.map(_sweep_task, tasks))
    else:
        results = [_sweep_task(t) for t in tasks]
    done = {(t[1], tuple(sorted(t[2].items()))): r for t, r in zip(tasks, results)}

    rows, failures = [], []
    for seed in seeds:
        for pt in points:
            over = tuple(sorted((k, v) for k, v in pt.items() if k != "eps_th"))
            processed, err = done[(seed, over)]
            eps_th = pt.get("eps_th", cfg.pipeline.eps_th)
            reports = [None, None]
            if processed is not None:
                try:
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore", RuntimeWarning)
                        reports = reports_from_processed(processed, (eps_th,))
                except (RespiradarError, ValueError) as exc:
                    err = f"{type(exc).__name__}: {exc}"
            for method, rep in zip(METHODS, reports):
                rows.append({"seed": seed, **pt, "method": method,
                             "status": "ok" if err is None else "failed", "error": err or "",
                             **{m: (getattr(rep, m) if rep is not None else None) for m in _METRICS}})
            if err is not None:
                failures.append(f"seed {seed}, {pt}: {err}")
    for msg in dict.fromkeys(failures):
        print(f"warning: {msg}", file=sys.stderr)

    columns = ["seed", *keys, "method", "status", "error", *_METRICS]
    _write_rows(out / "sweep.csv", columns, rows)

    summary = []
    for pt in points:
        for method in METHODS:
            group = [r for r in rows if r["method"] == method and all(r[k] == pt[k] for k in keys)]
            ok = [r for r in group if r["status"] == "ok"]
            entry = {**pt, "method": method, "n_ok": len(ok), "n_failed": len(group) - len(ok)}
            for m in _METRICS[:-1]:
                vals = np.array([r[m] for r in ok if r[m] is not None], dtype=float)
                entry[f"{m}_mean"] = float(vals.mean()) if vals.size else None
                entry[f"{m}_std"] = float(vals.std()) if vals.size else None
            summary.append(entry)
    sum_cols = [*keys, "method", "n_ok", "n_failed",
                *[f"{m}_{s}" for m in _METRICS[:-1] for s in ("mean", "std")]]
    _write_rows(out / "summary.csv", sum_cols, summary)

    manifest = RunManifest("sweep", cfg.snapshot(), None, ["sweep.csv", "summary.csv"])
    manifest.config["grid"] = {k: list(v) for k, v in grid.items()}
    manifest.config["seeds"] = list(seeds)
    manifest.write(out)
    _print_summary(summary, keys)
    n_fail = sum(r["status"] != "ok" for r in rows)
    if n_fail:
        print(f"{n_fail} of {len(rows)} rows failed; see the status column of sweep.csv", file=sys.stderr)
    return 0


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer, str)):
        return str(v)
    v = float(v)
    return format(v, ".10g") if np.isfinite(v) else ""


def _write_rows(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r.get(c)) for c in columns])


def _print_summary(summary, keys):
    def f(v, spec):
        return "-" if v is None else format(v, spec)
    head = "".join(f"{k:>8}" for k in keys) + f"  {'method':<13}{'ok':>4}{'rms_ir[s]':>11}{'C_cor':>8}{'acq':>8}"
    print(head)
    for e in summary:
        print("".join(f"{e[k]:>8.3g}" for k in keys) + f"  {e['method']:<13}{e['n_ok']:>4}"
              f"{f(e['rms_inter_radar_mean'], '.3f'):>11}{f(e['correlation_mean'], '.3f'):>8}"
              f"{f(e['acquisition_rate_mean'], '.3f'):>8}")


# -- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="respiradar", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", help="INI configuration file (default: built-in scene)")
        sp.add_argument("--out", required=True, help="output directory")
        if seed:
            sp.add_argument("--seed", type=int, help="override the scene seed")

    sp = sub.add_parser("simulate", help="synthesize one data cube per radar unit")
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("process", help="estimate respiratory intervals from data cubes")
    sp.add_argument("cubes", nargs="+", help="cube files written by simulate")
    common(sp, seed=False)
    sp.add_argument("--method", choices=(*METHODS, "both"), default="both")
    sp.add_argument("--eps-th", type=float, help="residual threshold for the proposed method")
    sp.add_argument("--save-image", action="store_true", help="also export the region image sequence")
    sp.add_argument("--jobs", type=int, default=1, help="worker processes (one cube each)")
    sp.set_defaults(func=cmd_process)

    sp = sub.add_parser("evaluate", help="dual-radar agreement metrics from interval CSVs")
    sp.add_argument("series", nargs="+", help="one or two interval CSVs")
    sp.add_argument("--truth", nargs="+", help="cube file per series, for error against ground truth")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--method", help="label for the metrics row")
    sp.add_argument("--eps-th", type=float, help="threshold label for the metrics row")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("sweep", help="metrics over a parameter grid and several seeds")
    common(sp)
    sp.add_argument("--grid", help='e.g. "eps_th=0.5,0.2;tau0=1.5,2.0,2.5" (default: [sweep] section)')
    sp.add_argument("--seeds", help='"10" for 0..9, "3-7", or "1,4,9" (default: [sweep] seeds)')
    sp.add_argument("--jobs", type=int, default=1, help="worker processes")
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (RespiradarError, ValueError, OSError) as exc:
        print(f"respiradar {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
