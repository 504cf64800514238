"""Polar radar imaging, static clutter removal and target region extraction."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.signal import windows

from .errors import AllZeroImage, ClutterAlreadyRemoved, GridMismatch
from .sim_core import ArrayLayout, RangeProfiles


@dataclass(frozen=True)
class PolarGrid:
    range_bins: np.ndarray
    angle_bins: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.range_bins, dtype=float)
        a = np.asarray(self.angle_bins, dtype=float)
        if r.ndim != 1 or a.ndim != 1 or r.size == 0 or a.size == 0:
            raise ValueError("grid axes must be non-empty 1-D arrays")
        if np.any(np.diff(r) <= 0) or np.any(np.diff(a) <= 0):
            raise ValueError("grid axes must be strictly increasing")
        if a[0] <= 0 or a[-1] >= 180:
            raise ValueError("angles must lie in (0, 180) degrees")
        object.__setattr__(self, "range_bins", r)
        object.__setattr__(self, "angle_bins", a)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.range_bins.size, self.angle_bins.size)

    def subgrid(self, rows: slice, cols: slice) -> "PolarGrid":
        return PolarGrid(self.range_bins[rows], self.angle_bins[cols])


def default_grid(range_axis, angle_step: float = 1.0, angle_span=(30.0, 150.0)) -> PolarGrid:
    """Native range bins (excluding the DC bin) and a uniform angle grid."""
    lo, hi = angle_span
    n = int(round((hi - lo) / angle_step)) + 1
    return PolarGrid(np.asarray(range_axis)[1:], lo + angle_step * np.arange(n))


@dataclass
class ImageSequence:
    values: np.ndarray
    grid: PolarGrid
    slow_time_axis: np.ndarray
    wavelength: float
    clutter_removed: bool = False

    def __post_init__(self):
        if self.values.shape != (len(self.slow_time_axis),) + self.grid.shape:
            raise GridMismatch(
                f"image shape {self.values.shape} inconsistent with axis/grid "
                f"{(len(self.slow_time_axis),) + self.grid.shape}"
            )


@dataclass
class IntensityMap:
    values: np.ndarray
    grid: PolarGrid


@dataclass
class RegionMask:
    mask: np.ndarray
    anchor: tuple[int, int]
    grid: PolarGrid

    @property
    def M(self) -> int:
        return int(self.mask.sum())

    @property
    def pixels(self) -> list[tuple[int, int]]:
        """Member cells in row-major (range, angle) order."""
        return [tuple(int(i) for i in p) for p in np.argwhere(self.mask)]

    @property
    def anchor_position(self) -> tuple[float, float]:
        i, j = self.anchor
        return float(self.grid.range_bins[i]), float(self.grid.angle_bins[j])


def taylor_weights(K: int, sidelobe_level: float = -30.0, nbar: int = 4) -> np.ndarray:
    """Taylor array taper scaled to unit maximum."""
    if K < 1:
        raise ValueError("K must be >= 1")
    if K == 1:
        return np.ones(1)
    w = windows.taylor(K, nbar=nbar, sll=abs(sidelobe_level), norm=False)
    return w / w.max()


def steering_weights(layout: ArrayLayout, angles_deg, taper) -> np.ndarray:
    """Beamformer weights ``alpha_k exp(j 2 pi x_k cos(theta) / lambda)``, shape (n_angle, K)."""
    cos_t = np.cos(np.deg2rad(np.asarray(angles_deg, dtype=float)))
    phase = 2 * np.pi * np.outer(cos_t, layout.virtual_positions) / layout.wavelength
    return np.asarray(taper, dtype=float)[None, :] * np.exp(1j * phase)


def _range_index(profiles: RangeProfiles, grid: PolarGrid) -> np.ndarray:
    axis = profiles.range_axis
    idx = np.searchsorted(axis, grid.range_bins)
    idx = np.clip(idx, 0, axis.size - 1)
    lower = np.clip(idx - 1, 0, axis.size - 1)
    idx = np.where(np.abs(axis[lower] - grid.range_bins) < np.abs(axis[idx] - grid.range_bins), lower, idx)
    tol = 1e-6 * (axis[1] - axis[0]) if axis.size > 1 else 1e-9
    if np.any(np.abs(axis[idx] - grid.range_bins) > tol):
        raise GridMismatch("grid range bins do not coincide with profile range bins")
    return idx


def form_image(profiles: RangeProfiles, layout: ArrayLayout, grid: PolarGrid, taper) -> ImageSequence:
    """Delay-and-sum image ``I'(t, r, theta) = w(theta)^H s(t, r)``."""
    if profiles.values.shape[2] != layout.K or len(taper) != layout.K:
        raise GridMismatch(
            f"{profiles.values.shape[2]} channels vs {layout.K} elements / {len(taper)} taper"
        )
    idx = _range_index(profiles, grid)
    w = steering_weights(layout, grid.angle_bins, taper)
    values = profiles.values[:, idx, :] @ w.conj().T
    return ImageSequence(values, grid, np.asarray(profiles.slow_time_axis), layout.wavelength)


def suppress_clutter(img: ImageSequence) -> ImageSequence:
    """Subtract each pixel's mean over the full record."""
    if img.clutter_removed:
        raise ClutterAlreadyRemoved("static clutter has already been subtracted")
    values = img.values - img.values.mean(axis=0, keepdims=True)
    return ImageSequence(values, img.grid, img.slow_time_axis, img.wavelength, clutter_removed=True)


def mean_intensity(img: ImageSequence) -> IntensityMap:
    if not img.clutter_removed:
        raise ValueError("mean_intensity expects a clutter-suppressed image")
    v = img.values
    return IntensityMap(np.mean(v.real ** 2 + v.imag ** 2, axis=0), img.grid)


def clutter_free_intensity(profiles: RangeProfiles, layout: ArrayLayout, grid: PolarGrid,
                           taper) -> IntensityMap:
    """Same map as ``mean_intensity(suppress_clutter(form_image(...)))``.

    Uses the per-range-bin channel covariance ``C(r)`` so that
    ``Ibar(r, theta) = w^H C(r) w`` without materializing the image.
    """
    idx = _range_index(profiles, grid)
    n, K = profiles.values.shape[0], profiles.values.shape[2]
    second = np.zeros((idx.size, K, K), complex)
    total = np.zeros((idx.size, K), complex)
    for lo in range(0, n, _COV_CHUNK):
        block = profiles.values[lo:lo + _COV_CHUNK, idx, :].transpose(1, 2, 0).astype(complex)
        second += block @ block.conj().transpose(0, 2, 1)
        total += block.sum(axis=2)
    mean = total / n
    cov = second / n - mean[:, :, None] * mean.conj()[:, None, :]  # E[s s^H] - mu mu^H
    w = steering_weights(layout, grid.angle_bins, taper)
    vals = np.einsum("ak,rkl,al->ra", w.conj(), cov, w, optimize=True).real
    return IntensityMap(np.maximum(vals, 0.0), grid)


def locate_target(intensity: IntensityMap) -> tuple[int, int]:
    """Grid index of the global maximum; ties go to smaller range, then smaller angle."""
    v = intensity.values
    if v.size == 0:
        raise ValueError("empty intensity map")
    if not np.any(v):
        raise AllZeroImage("intensity map is identically zero")
    i, j = np.unravel_index(int(np.argmax(v)), v.shape)
    return int(i), int(j)


_EIGHT = np.ones((3, 3), dtype=bool)
_COV_CHUNK = 40


def extract_region(intensity: IntensityMap, anchor: tuple[int, int], eta_db: float) -> RegionMask:
    """8-connected component of cells with intensity >= eta * Ibar(anchor) containing ``anchor``."""
    v = intensity.values
    i, j = anchor
    if not (0 <= i < v.shape[0] and 0 <= j < v.shape[1]):
        raise ValueError(f"anchor {anchor} outside the grid")
    thresh = 0.0 if np.isneginf(eta_db) else 10.0 ** (eta_db / 10.0) * v[i, j]
    above = v >= thresh
    above[i, j] = True
    labels, _ = ndimage.label(above, structure=_EIGHT)
    return RegionMask(labels == labels[i, j], (int(i), int(j)), intensity.grid)
