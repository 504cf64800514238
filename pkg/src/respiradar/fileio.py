"""Binary containers for cubes and images, and CSV exports.

Cube file (little-endian)::

    b"RCUB1"
    u64 n_slow, n_fast, K
    f64 slow_start, slow_step, fast_start, fast_step
    f64 wavelength, bandwidth
    u64 K_T, K_R; f64[K_T] tx positions; f64[K_R] rx positions
    complex64[n_slow * n_fast * K]   (slow, fast, channel) order
    f64[n_slow] tau_true; f64[n_slow] motion mask (0/1)

Image file::

    b"RIMG1"
    u64 n_slow, n_range, n_angle
    f64 slow_start, slow_step, wavelength
    u64 clutter_removed
    f64[n_range] range bins; f64[n_angle] angle bins (deg)
    complex64[n_slow * n_range * n_angle]
"""
from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .errors import CorruptFile
from .imaging import ImageSequence, IntensityMap, PolarGrid
from .respiration import IntervalSeries
from .sim_core import C, DataCube, GroundTruth, RadarParams, build_virtual_array

CUBE_MAGIC = b"RCUB1"
IMAGE_MAGIC = b"RIMG1"


def _fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    return "" if not np.isfinite(x) else format(x, ".10g")


def write_cube(path, cube: DataCube) -> None:
    n_slow, n_fast, K = cube.samples.shape
    st, ft = np.asarray(cube.slow_time_axis), np.asarray(cube.fast_time_axis)
    lay = cube.layout
    gt = cube.ground_truth
    with open(path, "wb") as fh:
        fh.write(CUBE_MAGIC)
        fh.write(struct.pack("<3Q", n_slow, n_fast, K))
        fh.write(struct.pack("<4d", st[0], st[1] - st[0], ft[0], ft[1] - ft[0]))
        fh.write(struct.pack("<2d", lay.wavelength, cube.params.bandwidth))
        fh.write(struct.pack("<2Q", lay.tx_positions.size, lay.rx_positions.size))
        fh.write(lay.tx_positions.astype("<f8").tobytes())
        fh.write(lay.rx_positions.astype("<f8").tobytes())
        fh.write(np.ascontiguousarray(cube.samples, dtype="<c8").tobytes())
        tau = np.full(n_slow, np.nan) if gt.tau_true is None else np.asarray(gt.tau_true, float)
        mask = np.zeros(n_slow) if gt.motion_mask is None else np.asarray(gt.motion_mask, float)
        fh.write(tau.astype("<f8").tobytes())
        fh.write(mask.astype("<f8").tobytes())


def read_cube(path) -> DataCube:
    raw = Path(path).read_bytes()
    if raw[:5] != CUBE_MAGIC:
        raise CorruptFile(f"{path}: not a cube file (bad magic)")
    try:
        n_slow, n_fast, K = struct.unpack_from("<3Q", raw, 5)
        s0, ds, f0, df = struct.unpack_from("<4d", raw, 29)
        lam, bw = struct.unpack_from("<2d", raw, 61)
        kt, kr = struct.unpack_from("<2Q", raw, 77)
    except struct.error as exc:
        raise CorruptFile(f"{path}: truncated header") from exc
    off = 93
    expected = off + 8 * (kt + kr) + 8 * n_slow * n_fast * K + 16 * n_slow
    if len(raw) != expected:
        raise CorruptFile(f"{path}: size {len(raw)} bytes, header implies {expected}")
    tx = np.frombuffer(raw, "<f8", kt, off)
    rx = np.frombuffer(raw, "<f8", kr, off + 8 * kt)
    off += 8 * (kt + kr)
    if kt * kr != K:
        raise CorruptFile(f"{path}: {kt} x {kr} elements but {K} channels")
    samples = np.frombuffer(raw, "<c8", n_slow * n_fast * K, off).reshape(n_slow, n_fast, K)
    off += 8 * samples.size
    tau = np.frombuffer(raw, "<f8", n_slow, off).copy()
    mask = np.frombuffer(raw, "<f8", n_slow, off + 8 * n_slow) != 0

    params = RadarParams(center_frequency=C / lam, bandwidth=bw, chirp_duration=n_fast * df,
                         fast_time_samples=int(n_fast), slow_time_rate=1.0 / ds,
                         duration=round(n_slow * ds, 9))
    layout = build_virtual_array(tx, rx, lam)
    return DataCube(samples.astype(complex), s0 + ds * np.arange(n_slow), f0 + df * np.arange(n_fast),
                    layout, params, GroundTruth(tau, mask))


def read_ground_truth(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(slow_time_axis, tau_true, motion_mask)`` without loading the samples."""
    p = Path(path)
    with open(p, "rb") as fh:
        head = fh.read(93)
        if head[:5] != CUBE_MAGIC:
            raise CorruptFile(f"{path}: not a cube file (bad magic)")
        if len(head) < 93:
            raise CorruptFile(f"{path}: truncated header")
        n_slow, n_fast, K = struct.unpack_from("<3Q", head, 5)
        s0, ds, _, _ = struct.unpack_from("<4d", head, 29)
        kt, kr = struct.unpack_from("<2Q", head, 77)
        expected = 93 + 8 * (kt + kr) + 8 * n_slow * n_fast * K + 16 * n_slow
        size = p.stat().st_size
        if size != expected:
            raise CorruptFile(f"{path}: size {size} bytes, header implies {expected}")
        fh.seek(expected - 16 * n_slow)
        tail = fh.read(16 * n_slow)
    tau = np.frombuffer(tail, "<f8", n_slow, 0).copy()
    mask = np.frombuffer(tail, "<f8", n_slow, 8 * n_slow) != 0
    return s0 + ds * np.arange(n_slow), tau, mask


def write_image(path, img: ImageSequence) -> None:
    n, nr, na = img.values.shape
    st = np.asarray(img.slow_time_axis)
    with open(path, "wb") as fh:
        fh.write(IMAGE_MAGIC)
        fh.write(struct.pack("<3Q", n, nr, na))
        fh.write(struct.pack("<3d", st[0], st[1] - st[0], img.wavelength))
        fh.write(struct.pack("<Q", int(img.clutter_removed)))
        fh.write(img.grid.range_bins.astype("<f8").tobytes())
        fh.write(img.grid.angle_bins.astype("<f8").tobytes())
        fh.write(np.ascontiguousarray(img.values, dtype="<c8").tobytes())


def read_image(path) -> ImageSequence:
    raw = Path(path).read_bytes()
    if raw[:5] != IMAGE_MAGIC:
        raise CorruptFile(f"{path}: not an image file (bad magic)")
    try:
        n, nr, na = struct.unpack_from("<3Q", raw, 5)
        s0, ds, lam = struct.unpack_from("<3d", raw, 29)
        (removed,) = struct.unpack_from("<Q", raw, 53)
    except struct.error as exc:
        raise CorruptFile(f"{path}: truncated header") from exc
    off = 61
    expected = off + 8 * (nr + na) + 8 * n * nr * na
    if len(raw) != expected:
        raise CorruptFile(f"{path}: size {len(raw)} bytes, header implies {expected}")
    r = np.frombuffer(raw, "<f8", nr, off)
    a = np.frombuffer(raw, "<f8", na, off + 8 * nr)
    off += 8 * (nr + na)
    values = np.frombuffer(raw, "<c8", n * nr * na, off).reshape(n, nr, na).astype(complex)
    return ImageSequence(values, PolarGrid(r.copy(), a.copy()), s0 + ds * np.arange(n), lam, bool(removed))


def write_intensity_csv(path, intensity: IntensityMap) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["range_m", "angle_deg", "value"])
        for i, r in enumerate(intensity.grid.range_bins):
            for j, a in enumerate(intensity.grid.angle_bins):
                w.writerow([_fmt(r), _fmt(a), _fmt(intensity.values[i, j])])


INTERVAL_COLUMNS = ["time_s", "tau_hat_s", "accepted", "weight_sum", "M"]


def write_interval_csv(path, series: IntervalSeries) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(INTERVAL_COLUMNS)
        for t, tau, acc, ws, m in zip(series.times, series.tau_hat, series.accepted,
                                      series.weight_sum, series.M):
            w.writerow([_fmt(t), _fmt(tau) if acc else "", int(bool(acc)), _fmt(ws), int(m)])


def read_interval_csv(path, method: str = "") -> IntervalSeries:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != INTERVAL_COLUMNS:
            raise CorruptFile(f"{path}: expected columns {INTERVAL_COLUMNS}, got {reader.fieldnames}")
        rows = list(reader)

    def num(s):
        return float(s) if s != "" else np.nan

    times = np.array([num(r["time_s"]) for r in rows])
    tau = np.array([num(r["tau_hat_s"]) for r in rows])
    acc = np.array([r["accepted"] == "1" for r in rows], dtype=bool)
    ws = np.array([num(r["weight_sum"]) for r in rows])
    M = np.array([int(r["M"]) for r in rows], dtype=int)
    return IntervalSeries(times, tau, acc, ws, M, method)


def write_metrics_csv(path, reports, extra_columns: dict | None = None) -> None:
    """One row per report; ``extra_columns`` maps name -> per-report values."""
    rows = [r.as_row() for r in reports]
    extra = extra_columns or {}
    columns = list(extra) + (list(rows[0]) if rows else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for k, row in enumerate(rows):
            vals = [extra[c][k] for c in extra] + list(row.values())
            w.writerow([v if isinstance(v, str) else ("" if v is None else
                        (str(v) if isinstance(v, (int, np.integer)) else _fmt(v))) for v in vals])


def format_reports(reports) -> str:
    def f(x, spec):
        return "-" if x is None else format(x, spec)

    lines = [f"{'method':<13}{'eps_th':>7}{'rms_ir[s]':>11}{'C_cor':>8}{'acq':>8}{'rms_true[s]':>13}{'n':>7}"]
    for r in reports:
        lines.append(f"{r.method:<13}{f(r.eps_th, '.2f'):>7}{f(r.rms_inter_radar, '.3f'):>11}"
                     f"{f(r.correlation, '.3f'):>8}{f(r.acquisition_rate, '.3f'):>8}"
                     f"{f(r.rms_vs_truth, '.3f'):>13}{r.n_common:>7}")
    return "\n".join(lines)


def write_scatter_csv(path, a: IntervalSeries, b: IntervalSeries) -> None:
    both = np.asarray(a.accepted, bool) & np.asarray(b.accepted, bool)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s", "tau_radar1_s", "tau_radar2_s"])
        for t, x, y in zip(a.times[both], a.tau_hat[both], b.tau_hat[both]):
            w.writerow([_fmt(t), _fmt(x), _fmt(y)])
