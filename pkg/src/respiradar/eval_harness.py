"""Dual-radar agreement metrics for respiratory-interval series."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegenerateVariance, NoOverlap
from .pipeline import ProcessedRadar, process_cube
from .respiration import IntervalSeries, PipelineConfig
from .sim_core import ArrayLayout, RadarParams, SceneConfig, default_layout, synthesize_cube


@dataclass
class MetricsReport:
    method: str
    eps_th: float | None
    rms_inter_radar: float | None
    rms_inter_radar_ungated: float | None
    correlation: float | None
    acquisition_rate: float
    rms_vs_truth: float | None
    n_common: int

    def as_row(self) -> dict:
        return asdict(self)


def align_series(a: IntervalSeries, b: IntervalSeries) -> np.ndarray:
    """``(n, 2)`` array of estimates at hops where both series are accepted."""
    if len(a.times) != len(b.times) or not np.allclose(a.times, b.times, rtol=0, atol=1e-9):
        raise ValueError("series do not share a hop cadence")
    both = np.asarray(a.accepted, bool) & np.asarray(b.accepted, bool)
    if not np.any(both):
        raise NoOverlap(f"no common accepted hops ({int(np.sum(a.accepted))} vs {int(np.sum(b.accepted))} accepted)")
    return np.column_stack([a.tau_hat[both], b.tau_hat[both]])


def rms_error(pairs) -> float:
    pairs = np.asarray(pairs, dtype=float).reshape(-1, 2)
    if pairs.shape[0] == 0:
        raise NoOverlap("no pairs to compare")
    d = pairs[:, 0] - pairs[:, 1]
    return float(np.sqrt(np.mean(d * d)))


def correlation(pairs) -> float:
    """Pearson correlation of the two columns."""
    pairs = np.asarray(pairs, dtype=float).reshape(-1, 2)
    if pairs.shape[0] < 2:
        raise DegenerateVariance("need at least two pairs")
    # checked on the range: centring a constant column can leave rounding residue
    if np.any(np.ptp(pairs, axis=0) == 0):
        raise DegenerateVariance("one side of the pairs is constant")
    x = pairs[:, 0] - pairs[:, 0].mean()
    y = pairs[:, 1] - pairs[:, 1].mean()
    sxx, syy = np.dot(x, x), np.dot(y, y)
    return float(np.clip(np.dot(x, y) / np.sqrt(sxx * syy), -1.0, 1.0))


def acquisition_rate(series: IntervalSeries) -> float:
    if len(series.accepted) == 0:
        raise ValueError("empty series")
    return float(np.count_nonzero(series.accepted)) / len(series.accepted)


def _truth_sq_errors(series: IntervalSeries, tau_true) -> np.ndarray:
    if tau_true is None:
        return np.empty(0)
    ok = np.asarray(series.accepted, bool) & np.isfinite(tau_true)
    return (series.tau_hat[ok] - np.asarray(tau_true)[ok]) ** 2


def report_for(series: list[IntervalSeries], truths: list, method: str,
               eps_th: float | None) -> MetricsReport:
    """Metrics for one method over one or two radars' series."""
    acq = float(np.mean([acquisition_rate(s) for s in series]))
    sq = np.concatenate([_truth_sq_errors(s, t) for s, t in zip(series, truths)])
    rms_truth = float(np.sqrt(sq.mean())) if sq.size else None
    rms_ir = rms_ug = cc = None
    n_common = 0
    if len(series) == 2:
        a, b = series
        try:
            pairs = align_series(a, b)
        except NoOverlap:
            pairs = np.empty((0, 2))
        n_common = pairs.shape[0]
        if n_common:
            rms_ir = rms_error(pairs)
            try:
                cc = correlation(pairs)
            except DegenerateVariance:
                cc = None
        if a.tau_raw is not None and b.tau_raw is not None:
            ok = np.isfinite(a.tau_raw) & np.isfinite(b.tau_raw)
            if np.any(ok):
                rms_ug = rms_error(np.column_stack([a.tau_raw[ok], b.tau_raw[ok]]))
    else:
        n_common = int(np.count_nonzero(series[0].accepted))
    return MetricsReport(method, eps_th, rms_ir, rms_ug, cc, acq, rms_truth, n_common)


def reports_from_processed(processed: list[ProcessedRadar], eps_th_list) -> list[MetricsReport]:
    truths = [p.tau_true for p in processed]
    out = [report_for([p.conventional() for p in processed], truths, "conventional", None)]
    for eps_th in eps_th_list:
        out.append(report_for([p.proposed(eps_th) for p in processed], truths, "proposed", float(eps_th)))
    return out


def _process_one(args):
    scene, layout, params, cfg, radar_index = args
    return process_cube(synthesize_cube(scene, layout, params, radar_index), cfg)


def process_scene(scene: SceneConfig, cfg: PipelineConfig, params: RadarParams | None = None,
                  layout: ArrayLayout | None = None, jobs: int = 1) -> list[ProcessedRadar]:
    """Simulate and process every radar unit of ``scene``."""
    params = RadarParams() if params is None else params
    layout = default_layout(params.wavelength) if layout is None else layout
    tasks = [(scene, layout, params, cfg, i) for i in range(len(scene.radar_positions))]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_process_one, tasks))
    return [_process_one(t) for t in tasks]


def compare_methods(scene: SceneConfig, cfg: PipelineConfig, eps_th_list=(0.5, 0.2),
                    params: RadarParams | None = None, layout: ArrayLayout | None = None,
                    jobs: int = 1) -> list[MetricsReport]:
    """Conventional plus one proposed report per ``eps_th``, in that order."""
    return reports_from_processed(process_scene(scene, cfg, params, layout, jobs), eps_th_list)
