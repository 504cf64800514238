"""FMCW MIMO radar simulator for a breathing, occasionally moving point target.

The simulator produces dechirped complex beat samples laid out as
``(slow time, fast time, virtual channel)``, together with the ground truth
needed to score respiration estimators: the instantaneous respiratory
interval and a mask of samples during which body motion is active.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy.interpolate import PchipInterpolator
from scipy.signal import windows

from .errors import OverlappingVirtualElements, TargetOutOfUnambiguousRange

C = 299_792_458.0

# Independent random streams derived from the scene seed.
STREAM_RESPIRATION = 1
STREAM_BODY_MOTION = 2
STREAM_NOISE = 100

# frames per synthesis/transform block; small enough to stay in cache
_CHUNK_FRAMES = 32


@dataclass(frozen=True)
class ArrayLayout:
    """Transmit/receive element positions and the resulting virtual array.

    ``pairs[k]`` holds the (tx index, rx index) that produce
    ``virtual_positions[k]``.
    """

    tx_positions: np.ndarray
    rx_positions: np.ndarray
    virtual_positions: np.ndarray
    pairs: np.ndarray
    wavelength: float

    @property
    def K(self) -> int:
        return len(self.virtual_positions)


def build_virtual_array(tx_positions, rx_positions, wavelength: float) -> ArrayLayout:
    """Form the sum-coordinate virtual array ``x_t + x_r`` of a MIMO layout.

    Raises
    ------
    OverlappingVirtualElements
        If two transmitter/receiver pairs land within 1e-9 m of each other.
    """
    tx = np.asarray(tx_positions, dtype=float).ravel()
    rx = np.asarray(rx_positions, dtype=float).ravel()
    if tx.size == 0 or rx.size == 0:
        raise ValueError("tx_positions and rx_positions must be non-empty")
    if not (np.all(np.isfinite(tx)) and np.all(np.isfinite(rx))):
        raise ValueError("element positions must be finite")
    if not (np.isfinite(wavelength) and wavelength > 0):
        raise ValueError("wavelength must be positive")

    ti, ri = np.meshgrid(np.arange(tx.size), np.arange(rx.size), indexing="ij")
    ti, ri = ti.ravel(), ri.ravel()
    sums = tx[ti] + rx[ri]
    order = np.argsort(sums, kind="stable")
    sums = sums[order]
    gaps = np.diff(sums)
    if np.any(gaps <= 1e-9):
        k = int(np.argmax(gaps <= 1e-9))
        raise OverlappingVirtualElements(
            f"virtual elements {k} and {k + 1} coincide at x = {sums[k]:.6g} m"
        )
    pairs = np.stack([ti[order], ri[order]], axis=1)
    return ArrayLayout(tx, rx, sums, pairs, float(wavelength))


def default_layout(wavelength: float) -> ArrayLayout:
    """3 Tx at 2-wavelength pitch, 4 Rx at half-wavelength pitch: 12 virtual elements."""
    tx = np.arange(3) * 2.0 * wavelength
    rx = np.arange(4) * 0.5 * wavelength
    return build_virtual_array(tx, rx, wavelength)


@dataclass(frozen=True)
class RadarParams:
    center_frequency: float = 79e9
    bandwidth: float = 3.6e9
    chirp_duration: float = 100e-6
    fast_time_samples: int = 256
    slow_time_rate: float = 100.0
    duration: float = 120.0

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if not self.center_frequency > 0:
            raise ValueError("center_frequency must be positive")
        if not self.chirp_duration > 0:
            raise ValueError("chirp_duration must be positive")
        if int(self.fast_time_samples) < 2:
            raise ValueError("fast_time_samples must be at least 2")
        if not self.slow_time_rate > 0:
            raise ValueError("slow_time_rate must be positive")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        n = self.duration * self.slow_time_rate
        if abs(n - round(n)) > 1e-6:
            raise ValueError("duration * slow_time_rate must be an integer sample count")

    @property
    def wavelength(self) -> float:
        return C / self.center_frequency

    @property
    def range_resolution(self) -> float:
        return C / (2.0 * self.bandwidth)

    @property
    def n_slow(self) -> int:
        return int(round(self.duration * self.slow_time_rate))

    @property
    def fast_sample_rate(self) -> float:
        return self.fast_time_samples / self.chirp_duration

    @property
    def max_range(self) -> float:
        """Range of the last beat-frequency bin."""
        return (self.fast_time_samples - 1) * self.range_resolution

    def slow_time_axis(self) -> np.ndarray:
        return np.arange(self.n_slow) / self.slow_time_rate

    def fast_time_axis(self) -> np.ndarray:
        # referenced to mid-chirp so the beat term adds no range-dependent
        # phase at the window centre
        n = self.fast_time_samples
        return (np.arange(n) - n // 2) / self.fast_sample_rate


@dataclass(frozen=True)
class MotionModel:
    """Parameters of one motion component.

    ``kind`` is ``"respiration"``, ``"transient-bursts"`` or ``"none"``.
    Respiration moves the target along ``direction_deg``; bursts use a random
    direction per event. ``interval_drift`` bounds the fractional wander of
    the respiratory interval, which is re-drawn every ``drift_timescale``
    seconds and smoothly interpolated in between.
    """

    kind: str = "none"
    amplitude: float = 0.0
    base_interval: float = 1.25
    interval_drift: float = 0.0
    drift_timescale: float = 10.0
    direction_deg: float = 90.0
    burst_rate: float = 0.0
    burst_duration: float = 1.0
    burst_amplitude: float = 0.0
    duration_spread: float = 0.0

    def __post_init__(self):
        if self.kind not in ("respiration", "transient-bursts", "none"):
            raise ValueError(f"unknown motion kind {self.kind!r}")
        if self.amplitude < 0 or self.burst_amplitude < 0:
            raise ValueError("amplitudes must be non-negative")
        if self.kind == "respiration" and not 0.5 < self.base_interval < 3.0:
            raise ValueError("base_interval must lie in (0.5 s, 3.0 s)")
        if self.interval_drift < 0:
            raise ValueError("interval_drift must be non-negative")
        if self.kind == "transient-bursts":
            if self.burst_rate < 0 or self.burst_duration <= 0:
                raise ValueError("burst_rate must be >= 0 and burst_duration > 0")
            if not 0 <= self.duration_spread < 1:
                raise ValueError("duration_spread must lie in [0, 1)")


@dataclass
class MotionTrack:
    """Sampled motion: 2-D displacement (m), true interval (s) and burst mask."""

    displacement: np.ndarray
    tau_true: np.ndarray
    mask: np.ndarray
    events: list = field(default_factory=list)


def sample_motion(model: MotionModel, slow_time_axis, seed) -> MotionTrack:
    """Draw a displacement history for ``model`` on ``slow_time_axis``.

    ``seed`` is anything accepted by :func:`numpy.random.default_rng`.
    ``tau_true`` is NaN for kinds other than respiration. ``events`` lists
    ``(start, duration)`` of each burst.
    """
    t = np.asarray(slow_time_axis, dtype=float)
    n = t.size
    if n >= 2:
        dt = np.diff(t)
        if np.any(dt <= 0) or np.ptp(dt) > 1e-9 * max(1.0, abs(dt[0])):
            raise ValueError("slow_time_axis must be strictly increasing and uniform")
    disp = np.zeros((n, 2))
    tau = np.full(n, np.nan)
    mask = np.zeros(n, dtype=bool)
    rng = np.random.default_rng(seed)

    if model.kind == "respiration":
        tau = _interval_history(model, t, rng)
        if model.interval_drift == 0:
            cycles = t / model.base_interval
        else:
            inv = 1.0 / tau
            cycles = np.concatenate([[0.0], np.cumsum(0.5 * (inv[1:] + inv[:-1]) * np.diff(t))])
        d = model.amplitude * np.sin(2 * np.pi * cycles)
        ang = np.deg2rad(model.direction_deg)
        disp[:, 0] = d * np.cos(ang)
        disp[:, 1] = d * np.sin(ang)
        return MotionTrack(disp, tau, mask)

    if model.kind == "transient-bursts" and model.burst_rate > 0 and n > 0:
        span = t[-1] - t[0] + (t[1] - t[0] if n > 1 else 0.0)
        events = []
        start = t[0] + rng.exponential(1.0 / model.burst_rate)
        while start < t[0] + span:
            scale = model.burst_amplitude * rng.uniform(0.5, 1.5)
            theta = rng.uniform(0.0, 2 * np.pi)
            is_step = rng.random() < 0.5
            dur = model.burst_duration * rng.uniform(1.0 - model.duration_spread, 1.0 + model.duration_spread)
            events.append((start, dur))
            x = np.clip((t - start) / dur, 0.0, 1.0)
            if is_step:
                shape = 0.5 * (1.0 - np.cos(np.pi * x))
            else:
                shape = np.sin(np.pi * x) ** 2
            disp[:, 0] += scale * np.cos(theta) * shape
            disp[:, 1] += scale * np.sin(theta) * shape
            mask |= (t >= start) & (t <= start + dur)
            start += rng.exponential(1.0 / model.burst_rate)
        return MotionTrack(disp, tau, mask, events)

    return MotionTrack(disp, tau, mask)


def _interval_history(model: MotionModel, t: np.ndarray, rng) -> np.ndarray:
    base = model.base_interval
    if model.interval_drift == 0 or t.size < 2:
        return np.full(t.size, base)
    lo, hi = base * (1 - model.interval_drift), base * (1 + model.interval_drift)
    n_knots = int(np.ceil((t[-1] - t[0]) / model.drift_timescale)) + 2
    knots_t = t[0] + model.drift_timescale * np.arange(n_knots)
    steps = rng.normal(0.0, 0.5 * model.interval_drift * base, n_knots)
    knots = np.empty(n_knots)
    knots[0] = base
    for i in range(1, n_knots):
        knots[i] = np.clip(knots[i - 1] + steps[i], lo, hi)
    # PCHIP never overshoots its knots, so the clamp survives interpolation.
    return PchipInterpolator(knots_t, knots)(t)


@dataclass(frozen=True)
class SceneConfig:
    """A single target (plus static clutter) observed by one or two radars.

    Target and clutter positions are polar ``(range m, angle deg)`` about
    the scene origin; angles are measured from the +x baseline. Each radar's
    array lies along +x starting at its ``radar_positions`` entry.
    """

    target_range: float = 6.0
    target_angle: float = 80.0
    respiration: MotionModel = field(
        default_factory=lambda: MotionModel(kind="respiration", amplitude=2e-3, base_interval=1.25)
    )
    body_motion: MotionModel = field(default_factory=MotionModel)
    clutter_scatterers: tuple = ()
    target_rcs_amplitude: float = 1.0
    noise_std: float = 0.0
    seed: int = 0
    radar_positions: tuple = ((0.0, 0.0),)

    def __post_init__(self):
        if not 0.0 <= self.target_angle <= 180.0:
            raise ValueError("target must lie in the half-plane y >= 0")
        if not 1 <= len(self.radar_positions) <= 2:
            raise ValueError("scene supports one or two radar units")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")
        for rng_, ang, _amp in self.clutter_scatterers:
            if not 0.0 <= ang <= 180.0:
                raise ValueError("clutter must lie in the half-plane y >= 0")


@dataclass
class GroundTruth:
    tau_true: np.ndarray
    motion_mask: np.ndarray
    los_displacement: np.ndarray | None = None
    target_range: float | None = None
    target_angle: float | None = None


@dataclass
class DataCube:
    samples: np.ndarray
    slow_time_axis: np.ndarray
    fast_time_axis: np.ndarray
    layout: ArrayLayout
    params: RadarParams
    ground_truth: GroundTruth


@dataclass
class RangeProfiles:
    values: np.ndarray
    range_axis: np.ndarray
    slow_time_axis: np.ndarray
    layout: ArrayLayout
    params: RadarParams


def _polar(r, deg):
    a = np.deg2rad(deg)
    return np.array([r * np.cos(a), r * np.sin(a)])


def _pair_ranges(points, radar_xy, layout: ArrayLayout) -> np.ndarray:
    """Half round-trip path from every virtual pair to each point, shape (n, K)."""
    pts = np.atleast_2d(points)
    rx0, ry0 = radar_xy
    dy = pts[:, 1:2] - ry0
    d_tx = np.hypot(pts[:, 0:1] - (rx0 + layout.tx_positions[None, :]), dy)
    d_rx = np.hypot(pts[:, 0:1] - (rx0 + layout.rx_positions[None, :]), dy)
    return 0.5 * (d_tx[:, layout.pairs[:, 0]] + d_rx[:, layout.pairs[:, 1]])


def _beat(amplitude, ranges, params: RadarParams) -> np.ndarray:
    """Beat samples for scatterers at ``ranges`` (n, K) -> (n, n_fast, K).

    The fast-time phasor is built by a cumulative product of the per-sample
    rotation, starting from the first (negative) mid-chirp fast time.
    """
    slope = params.bandwidth / params.chirp_duration
    lam = params.wavelength
    f_b = slope * 2.0 * ranges / C
    out = np.empty((ranges.shape[0], params.fast_time_samples, ranges.shape[1]), complex)
    t0 = params.fast_time_axis()[0]
    out[:, 0, :] = amplitude * np.exp(-1j * 4 * np.pi * ranges / lam + 2j * np.pi * f_b * t0)
    out[:, 1:, :] = np.exp(1j * 2 * np.pi * f_b / params.fast_sample_rate)[:, None, :]
    np.cumprod(out, axis=1, out=out)
    return out


class _NoiseSource:
    """Circular complex Gaussian noise by the Box-Muller transform.

    ``std * sqrt(-ln u1) * exp(2j pi u2)`` has independent N(0, std^2 / 2)
    real and imaginary parts and needs one uniform pair per sample, about
    half the cost of two ziggurat normals.
    """

    def __init__(self, rng, shape, dtype):
        self.rng = rng
        self.real = np.float32 if dtype == np.complex64 else np.float64
        self.uniform = np.empty(tuple(shape) + (2,), self.real)
        self.radius = np.empty(shape, self.real)
        self.out = np.empty(shape, dtype)

    def draw(self, n, std):
        u = self.uniform[:n]
        self.rng.random(dtype=self.real, out=u)
        r, angle = self.radius[:n], u[..., 1]
        np.subtract(1.0, u[..., 0], out=r)  # (0, 1], so the log is finite
        np.log(r, out=r)
        r *= -(std * std)
        np.sqrt(r, out=r)
        angle *= self.real(2 * np.pi)
        out = self.out[:n]
        parts = out.view(self.real).reshape(out.shape + (2,))
        np.cos(angle, out=parts[..., 0])
        np.sin(angle, out=parts[..., 1])
        parts *= r[..., None]
        return out


def synthesize_cube(scene: SceneConfig, layout: ArrayLayout, params: RadarParams,
                    radar_index: int = 0, dtype=np.complex64) -> DataCube:
    """Simulate the dechirped beat signal seen by radar ``radar_index``.

    Deterministic in ``(scene, radar_index, dtype)``. Motion is shared
    between radars; receiver noise is drawn from a per-radar stream.
    Samples default to complex64, the precision of the cube file format;
    pass ``dtype=np.complex128`` for full double precision.
    """
    dtype = np.dtype(dtype)
    if dtype not in (np.complex64, np.complex128):
        raise ValueError("dtype must be complex64 or complex128")
    if not 0 <= radar_index < len(scene.radar_positions):
        raise ValueError(f"radar_index {radar_index} out of range")
    if abs(layout.wavelength - params.wavelength) > 1e-12:
        raise ValueError("layout wavelength does not match radar center frequency")
    radar_xy = tuple(float(v) for v in scene.radar_positions[radar_index])
    t = params.slow_time_axis()
    n = t.size

    resp = sample_motion(scene.respiration, t, np.random.SeedSequence([scene.seed, STREAM_RESPIRATION]))
    body = sample_motion(scene.body_motion, t, np.random.SeedSequence([scene.seed, STREAM_BODY_MOTION]))
    p0 = _polar(scene.target_range, scene.target_angle)
    positions = p0[None, :] + resp.displacement + body.displacement
    if np.any(positions[:, 1] < 0):
        raise ValueError("target leaves the half-plane y >= 0")

    target_r = _pair_ranges(positions, radar_xy, layout)
    clutter_r = [(_pair_ranges(_polar(r, a), radar_xy, layout), amp)
                 for r, a, amp in scene.clutter_scatterers]
    r_all = [target_r.max()] + [cr.max() for cr, _ in clutter_r]
    if max(r_all) > params.max_range:
        raise TargetOutOfUnambiguousRange(
            f"scatterer at {max(r_all):.3f} m beyond {params.max_range:.3f} m"
        )

    clutter = np.zeros((1, params.fast_time_samples, layout.K), complex)
    for cr, amp in clutter_r:
        clutter = clutter + _beat(amp, cr, params)
    clutter = clutter.astype(dtype)

    samples = np.empty((n, params.fast_time_samples, layout.K), dtype)
    noise_rng = np.random.Generator(np.random.SFC64(
        np.random.SeedSequence([scene.seed, STREAM_NOISE + radar_index])))
    noise = _NoiseSource(noise_rng, (min(n, _CHUNK_FRAMES), params.fast_time_samples, layout.K), dtype)
    for lo in range(0, n, _CHUNK_FRAMES):
        hi = min(n, lo + _CHUNK_FRAMES)
        block = samples[lo:hi]
        block[...] = _beat(scene.target_rcs_amplitude, target_r[lo:hi], params)
        if clutter_r:
            block += clutter
        if scene.noise_std > 0:
            block += noise.draw(hi - lo, scene.noise_std)

    target_polar = p0 - np.asarray(radar_xy)
    mean_r = target_r.mean(axis=1)
    truth = GroundTruth(
        tau_true=resp.tau_true,
        motion_mask=body.mask,
        los_displacement=mean_r - mean_r[0],
        target_range=float(np.hypot(*target_polar)),
        target_angle=float(np.rad2deg(np.arctan2(target_polar[1], target_polar[0]))),
    )
    return DataCube(samples, t, params.fast_time_axis(), layout, params, truth)


def range_transform(cube: DataCube, window: str | None = "hann") -> RangeProfiles:
    """Windowed FFT along fast time; bin ``b`` maps to range ``b * c / (2B)``.

    The output is scaled by the window sum so a unit-amplitude on-bin tone
    has unit peak magnitude. ``window=None`` selects a rectangular window.
    """
    n_fast = cube.samples.shape[1]
    ft = np.asarray(cube.fast_time_axis)
    if n_fast > 2 and np.ptp(np.diff(ft)) > 1e-6 * (ft[1] - ft[0]):
        raise ValueError("fast-time sampling must be uniform")
    if window in (None, "rect", "boxcar"):
        w = np.ones(n_fast)
    else:
        w = windows.get_window(window, n_fast, fftbins=True)
    w = (w / w.sum()).astype(cube.samples.real.dtype)[None, :, None]
    values = np.empty(cube.samples.shape, np.result_type(cube.samples.dtype, np.complex64))
    for lo in range(0, values.shape[0], _CHUNK_FRAMES):
        block = values[lo:lo + _CHUNK_FRAMES]
        np.multiply(cube.samples[lo:lo + _CHUNK_FRAMES], w, out=block)
        block[...] = sfft.fft(block, axis=1, overwrite_x=True)
    r_axis = np.arange(n_fast) * cube.params.range_resolution
    return RangeProfiles(values, r_axis, np.asarray(cube.slow_time_axis), cube.layout, cube.params)
