"""Respiratory-interval estimation from clutter-suppressed radar images.

Each pixel's echo phase is unwrapped into a displacement, differentiated
into a line-of-sight velocity, and turned into a short-time normalized
autocorrelation. The interval is the lag of the Tukey-weighted peak inside
``[tau_S, tau_L]``; a cosine fit to the autocorrelation gives a residual
``eps`` that measures how periodic the pixel looks. The conventional
estimate uses the brightest pixel only. The proposed estimate averages all
pixels of the analysis region with weights ``1 / eps`` and discards hops
whose total weight falls below ``M / eps_th``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft as sfft
from scipy.signal import windows

from ._kernels import block_lag_products, golden_cosine_fit
from .errors import DegenerateWindow, EmptyRegion, NoPeak, PhaseUndefined
from .imaging import ImageSequence, extract_region, locate_target, mean_intensity

ENERGY_FLOOR = 1e-20
_INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0
_ROW_CHUNK = 8192
_ACF_BLOCK = 128


@dataclass(frozen=True)
class PipelineConfig:
    eta_db: float = -20.0
    T0: float = 2.0
    tau_S: float = 0.8
    tau_L: float = 2.0
    tau0: float = 2.0
    eps_th: float = 0.5
    hop: float = 0.1
    tukey_alpha: float = 0.25
    refine_peak: bool = True
    fit_grid_step: float = 0.005
    fit_tol: float = 0.0005
    eps_floor: float = 1e-12

    def __post_init__(self):
        if not 0 < self.tau_S < self.tau_L <= self.T0:
            raise ValueError("require 0 < tau_S < tau_L <= T0")
        if not self.eps_th > 0:
            raise ValueError("eps_th must be positive")
        if not (self.hop > 0 and self.tau0 > 0):
            raise ValueError("hop and tau0 must be positive")

    @property
    def max_lag(self) -> float:
        return max(self.tau_L, self.tau0)


@dataclass
class DisplacementTrack:
    """Unwrapped phase displacement in metres; positive means approaching."""

    values: np.ndarray
    pixel: tuple[int, int] | None
    slow_time_axis: np.ndarray
    undefined: np.ndarray = None


@dataclass
class VelocityTrack:
    values: np.ndarray
    pixel: tuple[int, int] | None
    slow_time_axis: np.ndarray

    @property
    def dt(self) -> float:
        return float(self.slow_time_axis[1] - self.slow_time_axis[0])


@dataclass
class AcfSlice:
    center_time: float
    lags: np.ndarray
    values: np.ndarray


@dataclass
class IntervalEstimate:
    time: float
    tau_hat: float | None
    contributions: list
    weight_sum: float
    accepted: bool
    M: int


@dataclass
class IntervalSeries:
    """Per-hop interval estimates.

    ``tau_hat`` is NaN on rejected hops; ``tau_raw`` keeps the ungated value
    wherever one could be formed.
    """

    times: np.ndarray
    tau_hat: np.ndarray
    accepted: np.ndarray
    weight_sum: np.ndarray
    M: np.ndarray
    method: str = "proposed"
    tau_raw: np.ndarray = None
    degenerate: np.ndarray = None

    def __len__(self):
        return len(self.times)


# -- tracks -------------------------------------------------------------------

def _unwrapped_displacement(x: np.ndarray, wavelength: float) -> tuple[np.ndarray, np.ndarray]:
    """Columnwise phase-unwrapped displacement of complex samples ``x`` (n, ...)."""
    phase = np.angle(x)
    undefined = x == 0
    if np.any(undefined):
        warnings.warn(f"{int(undefined.sum())} zero-magnitude samples; holding previous phase",
                      PhaseUndefined, stacklevel=3)
        n = x.shape[0]
        idx = np.where(undefined, 0, np.arange(n).reshape((n,) + (1,) * (x.ndim - 1)))
        idx = np.maximum.accumulate(idx, axis=0)
        phase = np.take_along_axis(phase, idx, axis=0)
    return wavelength / (4 * np.pi) * np.unwrap(phase, axis=0), undefined


def displacement(img: ImageSequence, pixel: tuple[int, int]) -> DisplacementTrack:
    if not img.clutter_removed:
        raise ValueError("displacement expects a clutter-suppressed image")
    i, j = pixel
    d, undefined = _unwrapped_displacement(img.values[:, i, j], img.wavelength)
    return DisplacementTrack(d, (i, j), img.slow_time_axis, undefined)


def velocity(track: DisplacementTrack) -> VelocityTrack:
    """Central differences inside, one-sided differences at the two ends."""
    if len(track.values) < 3:
        raise ValueError("velocity needs at least 3 samples")
    dt = track.slow_time_axis[1] - track.slow_time_axis[0]
    return VelocityTrack(np.gradient(track.values, dt), track.pixel, track.slow_time_axis)


# -- short-time autocorrelation -------------------------------------------------

def _samples(seconds: float, dt: float) -> int:
    return int(round(seconds / dt))


def _trapezoid(n: int) -> np.ndarray:
    w = np.ones(n)
    w[0] = w[-1] = 0.5
    return w


def acf_matrix(v: np.ndarray, centers: np.ndarray, half: int, n_lag: int, dt: float):
    """Normalized short-time autocorrelation at every center index.

    Window ``A`` spans ``v[c - half : c + half]`` and the lagged window
    ``B(l)`` spans ``v[c - half - l : c + half - l]``, both with trapezoid
    weights. Returns ``rho`` of shape (n_centers, n_lag + 1) and a boolean
    mask of centers whose window energy is below the floor (their rows are
    NaN).
    """
    v = np.ascontiguousarray(v, dtype=float)
    centers = np.asarray(centers, dtype=int)
    width = 2 * half + 1
    if centers.size and (centers.min() - half - n_lag < 0 or centers.max() + half >= v.size):
        raise ValueError("autocorrelation window extends beyond the record")
    step = np.diff(centers)
    if centers.size > 1 and np.all(step == step[0]) and step[0] > 0 and half > 0 \
            and (2 * half) % step[0] == 0:
        num = _lagged_products(v, centers, half, n_lag, int(step[0]))
    else:
        num = _lagged_products_fft(v, centers, half, n_lag)

    # energies below ENERGY_FLOOR / dt are exactly those with 1/sqrt(e) above this
    limit = 1.0 / np.sqrt(ENERGY_FLOOR / dt)
    with np.errstate(divide="ignore"):
        inv_root = 1.0 / np.sqrt(np.maximum(_window_energy(v, width), 0.0))
    inv_root = np.lib.stride_tricks.sliding_window_view(inv_root, n_lag + 1)
    rho = num
    degenerate = np.empty(centers.size, dtype=bool)
    for lo in range(0, centers.size, _ACF_BLOCK):
        inv_b = inv_root[centers[lo:lo + _ACF_BLOCK] - half - n_lag][:, ::-1]
        bad = np.max(inv_b, axis=1) > limit
        r = rho[lo:lo + _ACF_BLOCK]
        with np.errstate(invalid="ignore"):
            r *= inv_b
            r *= inv_b[:, :1]
        r[bad] = np.nan
        degenerate[lo:lo + _ACF_BLOCK] = bad
    return rho, degenerate


def _lagged_products(v, centers, half, n_lag, step):
    """Trapezoid-weighted ``sum v[n] v[n - l]`` over each window, by direct summation.

    Requires centers spaced by ``step`` with ``2 * half`` a multiple of it,
    so each window is ``2 * half / step`` whole blocks of ``step`` samples
    plus the first sample of the next block.
    """
    m = 2 * half // step
    return block_lag_products(v, int(centers[0] - half), centers.size + m - 1, step, n_lag, m)


def _lagged_products_fft(v, centers, half, n_lag):
    """Same numerators as :func:`_lagged_products` for arbitrary centers, via FFT correlation."""
    width = 2 * half + 1
    seg_len = width + n_lag
    windows_ = np.lib.stride_tricks.sliding_window_view(v, seg_len)
    w = _trapezoid(width)
    nfft = sfft.next_fast_len(seg_len, real=True)
    out = np.empty((centers.size, n_lag + 1))
    for lo in range(0, centers.size, _ACF_BLOCK):
        seg = windows_[centers[lo:lo + _ACF_BLOCK] - half - n_lag]
        a = seg[:, n_lag:] * w
        corr = sfft.irfft(np.conj(sfft.rfft(a, nfft, axis=1)) * sfft.rfft(seg, nfft, axis=1), nfft, axis=1)
        out[lo:lo + _ACF_BLOCK] = corr[:, n_lag::-1]
    return out


def _window_energy(v: np.ndarray, width: int) -> np.ndarray:
    """Trapezoid-weighted energy of every length-``width`` window of ``v``.

    Running sums restart every ``width`` samples so each window is the
    tail of one block plus the head of the next, which keeps the rounding
    error proportional to the local energy rather than the whole record.
    """
    sq = v * v
    n_win = v.size - width + 1
    n_blk = -(-v.size // width)
    blocks = np.zeros((n_blk + 1, width))
    blocks.ravel()[:v.size] = sq
    head = np.zeros((n_blk + 1, width))  # sum of the first o samples of a block
    np.cumsum(blocks[:, :-1], axis=1, out=head[:, 1:])
    tail = blocks.sum(axis=1)[:, None] - head  # samples o .. width-1
    rect = (tail[:-1] + head[1:]).ravel()[:n_win]
    return rect - 0.5 * (sq[:n_win] + sq[width - 1:])


def _center_index(axis: np.ndarray, t: float) -> int:
    dt = axis[1] - axis[0]
    return int(round((t - axis[0]) / dt))


def short_time_acf(v: VelocityTrack, t: float, cfg: PipelineConfig) -> AcfSlice:
    """Autocorrelation slice centered at time ``t`` on lags ``0 .. max(tau_L, tau0)``."""
    dt = v.dt
    half, n_lag = _samples(cfg.T0 / 2, dt), _samples(cfg.max_lag, dt)
    c = _center_index(v.slow_time_axis, t)
    rho, degenerate = acf_matrix(v.values, np.array([c]), half, n_lag, dt)
    if degenerate[0]:
        raise DegenerateWindow(f"windowed velocity energy below {ENERGY_FLOOR:g} at t = {t:g} s")
    return AcfSlice(float(v.slow_time_axis[c]), np.arange(n_lag + 1) * dt, rho[0])


def hop_centers(slow_time_axis: np.ndarray, cfg: PipelineConfig) -> np.ndarray:
    """Sample indices of every hop whose full window lies inside the record."""
    dt = slow_time_axis[1] - slow_time_axis[0]
    half, n_lag = _samples(cfg.T0 / 2, dt), _samples(cfg.max_lag, dt)
    step = max(1, _samples(cfg.hop, dt))
    return np.arange(half + n_lag, len(slow_time_axis) - half, step)


# -- interval and periodicity --------------------------------------------------

def tukey_taper(dt: float, cfg: PipelineConfig) -> tuple[int, np.ndarray]:
    """First lag index of the search band and the Tukey window over it."""
    i_s, i_l = _samples(cfg.tau_S, dt), _samples(cfg.tau_L, dt)
    return i_s, windows.tukey(i_l - i_s + 1, cfg.tukey_alpha)


def intervals_from_acf(rho: np.ndarray, dt: float, cfg: PipelineConfig):
    """Row-wise Tukey-weighted peak lag. Returns ``(tau, no_peak)``.

    ``tau`` is the argmax lag even where the tapered curve has no positive
    value; ``no_peak`` flags those rows. Rows containing NaN give NaN.
    """
    rho = np.atleast_2d(rho)
    i_s, h = tukey_taper(dt, cfg)
    y = h * rho[:, i_s:i_s + h.size]
    y = np.where(np.isnan(y), -np.inf, y)
    k = np.argmax(y, axis=1)
    rows = np.arange(y.shape[0])
    peak = y[rows, k]
    no_peak = ~(peak > 0)
    offset = np.zeros(y.shape[0])
    if cfg.refine_peak:
        inner = (k > 0) & (k < h.size - 1) & ~no_peak
        km = np.clip(k - 1, 0, h.size - 1)
        kp = np.clip(k + 1, 0, h.size - 1)
        ym, yp = y[rows, km], y[rows, kp]
        with np.errstate(invalid="ignore", divide="ignore"):
            denom = ym - 2 * peak + yp
            delta = 0.5 * (ym - yp) / denom
        ok = inner & (denom < 0) & np.isfinite(delta)
        offset[ok] = np.clip(delta[ok], -0.5, 0.5)
    tau = (i_s + k + offset) * dt
    tau[np.isneginf(peak)] = np.nan
    return tau, no_peak


def estimate_interval(acf: AcfSlice, cfg: PipelineConfig) -> float:
    dt = float(acf.lags[1] - acf.lags[0])
    tau, no_peak = intervals_from_acf(acf.values[None, :], dt, cfg)
    if no_peak[0]:
        raise NoPeak("tapered autocorrelation is non-positive over the search band")
    return float(tau[0])


def _fit_weights(dt: float, cfg: PipelineConfig) -> tuple[np.ndarray, np.ndarray]:
    n0 = _samples(cfg.tau0, dt)
    lags = np.arange(n0 + 1) * dt
    w = _trapezoid(n0 + 1) * dt / cfg.tau0
    return lags, w


def residuals_from_acf(rho: np.ndarray, dt: float, cfg: PipelineConfig):
    """Cosine-fit residual per row: grid search then golden-section refinement.

    Returns ``(eps, tau_fit)``; rows containing NaN give NaN.
    """
    rho = np.atleast_2d(rho)
    lags, w = _fit_weights(dt, cfg)
    if rho.shape[1] < lags.size:
        raise ValueError("autocorrelation does not reach tau0")
    eps = np.full(rho.shape[0], np.nan)
    tau_fit = np.full(rho.shape[0], np.nan)
    n_grid = int(round((cfg.tau_L - cfg.tau_S) / cfg.fit_grid_step)) + 1
    grid = np.linspace(cfg.tau_S, cfg.tau_L, n_grid)
    cos_grid = np.cos(2 * np.pi * lags[:, None] / grid[None, :])
    q_grid = w @ cos_grid ** 2
    good = ~np.isnan(rho[:, :lags.size].sum(axis=1))
    for lo in range(0, rho.shape[0], _ROW_CHUNK):
        block = rho[lo:lo + _ROW_CHUNK, :lags.size]
        ok = good[lo:lo + _ROW_CHUNK]
        if not np.all(ok):
            block = block[ok]
        if block.shape[0] == 0:
            continue
        e, tf = _fit_rows(block, lags, w, grid, cos_grid, q_grid, cfg)
        eps[lo:lo + _ROW_CHUNK][ok], tau_fit[lo:lo + _ROW_CHUNK][ok] = e, tf
    return eps, tau_fit


def _fit_rows(r, lags, w, grid, cos_grid, q_grid, cfg):
    rw = r * w
    s = np.einsum("ij,ij->i", rw, r)
    # coarse search in single precision (argmax of rw.c - q / 2); the winner
    # is re-evaluated in double precision by the refinement
    score = rw.astype(np.float32) @ cos_grid.astype(np.float32)
    score -= (0.5 * q_grid).astype(np.float32)
    best_tau = grid[np.argmax(score, axis=1)]
    cost, tau = golden_cosine_fit(rw, s, float(w[1]), float(lags[1] - lags[0]), best_tau,
                                  cfg.fit_grid_step, cfg.tau_S, cfg.tau_L, cfg.fit_tol, _INV_PHI)
    return np.maximum(cost, 0.0), tau


@dataclass
class ResidualFit:
    eps: float
    tau_fit: float


def periodicity_residual(acf: AcfSlice, cfg: PipelineConfig) -> ResidualFit:
    dt = float(acf.lags[1] - acf.lags[0])
    eps, tau_fit = residuals_from_acf(acf.values[None, :], dt, cfg)
    return ResidualFit(float(eps[0]), float(tau_fit[0]))


# -- fusion --------------------------------------------------------------------

def fuse_intervals(contributions, M: int, cfg: PipelineConfig, time: float = np.nan) -> IntervalEstimate:
    """Weighted average of ``(tau_m, eps_m)`` pairs with weights ``1 / eps_m``.

    Rejected when the weight sum is below ``M / eps_th``. ``eps_m`` is
    clamped from below at ``cfg.eps_floor``.
    """
    contributions = list(contributions)
    if not contributions:
        raise ValueError("no contributions to fuse")
    tau = np.array([c[0] for c in contributions], dtype=float)
    eps = np.array([c[1] for c in contributions], dtype=float)
    tau_raw, wsum, accepted = fuse_arrays(tau[None, :], eps[None, :], np.ones((1, tau.size), bool),
                                          M, cfg.eps_th, cfg.eps_floor)
    return IntervalEstimate(float(time), float(tau_raw[0]) if accepted[0] else None,
                            contributions, float(wsum[0]), bool(accepted[0]), int(M))


def fuse_arrays(tau, eps, valid, M, eps_th: float, eps_floor: float = 1e-12):
    """Vectorized fusion over the last axis; invalid entries carry zero weight."""
    weight = np.where(valid, 1.0 / np.maximum(np.where(valid, eps, 1.0), eps_floor), 0.0)
    wsum = np.sum(weight, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        tau_raw = np.sum(weight * np.where(valid, tau, 0.0), axis=-1) / wsum
    tau_raw = np.where(wsum > 0, tau_raw, np.nan)
    accepted = (wsum > 0) & (wsum >= np.asarray(M) / eps_th)
    return tau_raw, wsum, accepted


# -- per-pixel tables and the two estimators --------------------------------------

@dataclass
class ContributionTable:
    """Per-hop, per-pixel intervals and residuals for one analysis region."""

    times: np.ndarray
    centers: np.ndarray
    pixels: list
    tau: np.ndarray
    eps: np.ndarray
    tau_fit: np.ndarray
    degenerate: np.ndarray
    no_peak: np.ndarray
    anchor_column: int
    M: int
    cfg: PipelineConfig = field(repr=False, default=None)

    @property
    def valid(self) -> np.ndarray:
        return ~self.degenerate


def pixel_contributions(img: ImageSequence, pixels, cfg: PipelineConfig,
                        anchor: tuple[int, int] | None = None,
                        with_residual: bool = True) -> ContributionTable:
    """Interval and residual for every pixel in ``pixels`` at every hop."""
    if not img.clutter_removed:
        raise ValueError("expected a clutter-suppressed image")
    pixels = [tuple(int(v) for v in p) for p in pixels]
    axis = np.asarray(img.slow_time_axis)
    dt = float(axis[1] - axis[0])
    half, n_lag = _samples(cfg.T0 / 2, dt), _samples(cfg.max_lag, dt)
    centers = hop_centers(axis, cfg)
    rows = np.array([p[0] for p in pixels])
    cols = np.array([p[1] for p in pixels])
    d, _ = _unwrapped_displacement(img.values[:, rows, cols], img.wavelength)
    v = np.gradient(d, dt, axis=0)

    H, P = centers.size, len(pixels)
    tau = np.full((H, P), np.nan)
    eps = np.full((H, P), np.nan)
    tau_fit = np.full((H, P), np.nan)
    degenerate = np.zeros((H, P), bool)
    no_peak = np.zeros((H, P), bool)
    # pixels are handled in groups so the autocorrelations of one group fit
    # a single residual batch
    group = max(1, _ROW_CHUNK // max(H, 1))
    rho_buf = np.empty((min(group, P), H, n_lag + 1))
    for lo in range(0, P, group):
        cols_ = range(lo, min(P, lo + group))
        for k, p in enumerate(cols_):
            rho, deg = acf_matrix(v[:, p], centers, half, n_lag, dt)
            t_p, np_p = intervals_from_acf(rho, dt, cfg)
            tau[:, p], degenerate[:, p], no_peak[:, p] = t_p, deg, np_p & ~deg
            rho_buf[k] = rho
        if with_residual:
            n = len(cols_)
            e, tf = residuals_from_acf(rho_buf[:n].reshape(n * H, -1), dt, cfg)
            eps[:, lo:lo + n], tau_fit[:, lo:lo + n] = e.reshape(n, H).T, tf.reshape(n, H).T
    anchor_col = pixels.index(tuple(anchor)) if anchor is not None else -1
    return ContributionTable(axis[centers], centers, pixels, tau, eps, tau_fit, degenerate,
                             no_peak, anchor_col, P, cfg)


def fuse_table(table: ContributionTable, eps_th: float | None = None) -> IntervalSeries:
    cfg = table.cfg
    eps_th = cfg.eps_th if eps_th is None else eps_th
    tau_raw, wsum, accepted = fuse_arrays(table.tau, table.eps, table.valid, table.M,
                                          eps_th, cfg.eps_floor)
    tau_hat = np.where(accepted, tau_raw, np.nan)
    H = len(table.times)
    return IntervalSeries(table.times, tau_hat, accepted, wsum, np.full(H, table.M),
                          "proposed", tau_raw, np.all(table.degenerate, axis=1))


def conventional_from_table(table: ContributionTable) -> IntervalSeries:
    """Ungated series from the anchor pixel column of ``table``."""
    col = table.anchor_column
    if col < 0:
        raise ValueError("table has no anchor pixel")
    tau = table.tau[:, col]
    degenerate = table.degenerate[:, col]
    accepted = ~degenerate
    if np.any(degenerate):
        warnings.warn(f"DegenerateWindow on {int(degenerate.sum())} of {degenerate.size} hops",
                      RuntimeWarning, stacklevel=2)
    H = len(table.times)
    return IntervalSeries(table.times, np.where(accepted, tau, np.nan), accepted,
                          np.full(H, np.nan), np.ones(H, int), "conventional", tau.copy(), degenerate)


def conventional_estimate(img: ImageSequence, r0: tuple[int, int], cfg: PipelineConfig) -> IntervalSeries:
    """Single-pixel estimate at ``r0`` for every hop; never gated."""
    table = pixel_contributions(img, [r0], cfg, anchor=r0, with_residual=False)
    return conventional_from_table(table)


def region_table(img: ImageSequence, cfg: PipelineConfig) -> ContributionTable:
    """Localize, extract the analysis region and tabulate its pixels."""
    intensity = mean_intensity(img)
    r0 = locate_target(intensity)
    region = extract_region(intensity, r0, cfg.eta_db)
    table = pixel_contributions(img, region.pixels, cfg, anchor=r0)
    if not np.any(table.valid):
        raise EmptyRegion("no pixel of the analysis region yields a usable autocorrelation")
    return table


def run_proposed(img: ImageSequence, cfg: PipelineConfig) -> IntervalSeries:
    return fuse_table(region_table(img, cfg))


def with_eps_th(cfg: PipelineConfig, eps_th: float) -> PipelineConfig:
    return replace(cfg, eps_th=eps_th)
