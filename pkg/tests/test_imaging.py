from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from respiradar.errors import AllZeroImage, ClutterAlreadyRemoved, GridMismatch
from respiradar.imaging import (ImageSequence, IntensityMap, PolarGrid, clutter_free_intensity,
                                default_grid, extract_region, form_image, locate_target,
                                mean_intensity, steering_weights, suppress_clutter, taylor_weights)
from respiradar.sim_core import (MotionModel, RadarParams, RangeProfiles, SceneConfig, range_transform,
                                 synthesize_cube)

from conftest import breathing_scene


# -- oracles ------------------------------------------------------------------------

def peak_sidelobe_db(taper, n_grid=200001):
    """Brute-force peak sidelobe of a half-wavelength array over the whole visible region."""
    u = np.linspace(-1.0, 1.0, n_grid)
    k = np.arange(len(taper))
    af = np.abs(np.exp(1j * np.pi * np.outer(u, k)) @ taper)
    centre = n_grid // 2
    # walk out from the main-lobe peak to the first minimum on each side
    right = centre
    while right + 1 < n_grid and af[right + 1] < af[right]:
        right += 1
    left = centre
    while left > 0 and af[left - 1] < af[left]:
        left -= 1
    side = np.concatenate([af[:left], af[right + 1:]])
    return 20 * np.log10(side.max() / af[centre])


def flood_fill(values, anchor, threshold):
    """Breadth-first 8-connected region of cells >= threshold containing anchor."""
    n, m = values.shape
    seen = np.zeros(values.shape, bool)
    seen[anchor] = True
    queue = deque([anchor])
    while queue:
        i, j = queue.popleft()
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                a, b = i + di, j + dj
                if 0 <= a < n and 0 <= b < m and not seen[a, b] and values[a, b] >= threshold:
                    seen[a, b] = True
                    queue.append((a, b))
    return seen


def _profiles(values, layout, params=None, range_axis=None):
    params = params or RadarParams()
    n, nr, _ = values.shape
    r_axis = np.arange(nr) * params.range_resolution if range_axis is None else range_axis
    return RangeProfiles(values, r_axis, np.arange(n) / params.slow_time_rate, layout, params)


# -- taper ---------------------------------------------------------------------------

def test_single_element_taper():
    np.testing.assert_array_equal(taylor_weights(1), [1.0])


def test_twelve_element_taper_is_symmetric_and_normalized():
    w = taylor_weights(12, -30.0, 4)
    assert w.shape == (12,)
    np.testing.assert_allclose(w, w[::-1], rtol=0, atol=1e-15)
    assert np.all(w > 0) and w.max() == 1.0


def test_taper_sidelobes_by_brute_force_array_factor():
    assert peak_sidelobe_db(taylor_weights(12)) <= -29.0
    # without the taper a 12-element array sits near -13 dB
    assert peak_sidelobe_db(np.ones(12)) > -14.0


def test_taper_rejects_empty_array():
    with pytest.raises(ValueError):
        taylor_weights(0)


# -- beamforming ------------------------------------------------------------------------

def test_broadside_weights_are_the_real_taper(layout):
    taper = taylor_weights(layout.K)
    w = steering_weights(layout, [90.0], taper)[0]
    np.testing.assert_allclose(w, taper, rtol=0, atol=1e-12)


def test_matched_steering_vector_gives_coherent_gain(layout):
    taper = taylor_weights(layout.K)
    grid = PolarGrid(np.array([1.0]), np.array([37.0, 60.0, 123.0]))
    s = np.exp(2j * np.pi * layout.virtual_positions * np.cos(np.deg2rad(60.0)) / layout.wavelength)
    prof = _profiles(np.broadcast_to(s, (4, 2, layout.K)).copy(), layout,
                     range_axis=np.array([0.0, 1.0]))
    img = form_image(prof, layout, grid, taper)
    np.testing.assert_allclose(img.values[:, 0, 1], taper.sum(), rtol=1e-12)


def test_steering_vector_argmax_is_exact_at_every_grid_angle(layout):
    grid = default_grid(np.arange(3) * 0.05)
    angles = grid.angle_bins
    taper = taylor_weights(layout.K)
    steer = np.exp(2j * np.pi * np.outer(np.cos(np.deg2rad(angles)), layout.virtual_positions)
                   / layout.wavelength)
    vals = np.zeros((angles.size, 3, layout.K), complex)
    vals[:, 1, :] = steer  # frame j holds the steering vector of grid angle j
    img = form_image(_profiles(vals, layout, range_axis=np.arange(3) * 0.05), layout, grid, taper)
    np.testing.assert_array_equal(np.argmax(np.abs(img.values[:, 0, :]), axis=1), np.arange(angles.size))


def test_beamformer_is_linear(layout, rng):
    grid = PolarGrid(np.arange(1, 6) * 0.1, np.linspace(40, 140, 21))
    taper = taylor_weights(layout.K)
    shape = (7, 6, layout.K)
    s1 = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    s2 = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    a, b = 0.7 - 2.0j, 3.1
    axis = np.arange(6) * 0.1

    def img(s):
        return form_image(_profiles(s, layout, range_axis=axis), layout, grid, taper).values

    lhs = img(a * s1 + b * s2)
    rhs = a * img(s1) + b * img(s2)
    assert np.abs(lhs - rhs).max() <= 1e-12 * np.abs(lhs).max()


def test_form_image_checks_shapes(layout):
    taper = taylor_weights(layout.K)
    prof = _profiles(np.zeros((2, 4, layout.K - 1), complex), layout, range_axis=np.arange(4) * 0.1)
    with pytest.raises(GridMismatch):
        form_image(prof, layout, PolarGrid(np.array([0.1]), np.array([90.0])), taper)
    prof = _profiles(np.zeros((2, 4, layout.K), complex), layout, range_axis=np.arange(4) * 0.1)
    with pytest.raises(GridMismatch):
        form_image(prof, layout, PolarGrid(np.array([0.15]), np.array([90.0])), taper)


def test_grid_validation():
    with pytest.raises(ValueError):
        PolarGrid(np.array([1.0, 0.5]), np.array([90.0]))
    with pytest.raises(ValueError):
        PolarGrid(np.array([1.0]), np.array([0.0, 90.0]))


def test_point_scatterer_peaks_at_nearest_cell(layout):
    params = RadarParams(duration=0.1)
    scene = SceneConfig(target_range=6.0, target_angle=60.0, respiration=MotionModel(), noise_std=0.0)
    prof = range_transform(synthesize_cube(scene, layout, params))
    grid = default_grid(prof.range_axis)
    img = form_image(prof, layout, grid, taylor_weights(layout.K))
    i, j = np.unravel_index(np.argmax(np.abs(img.values[0])), grid.shape)
    assert i == np.argmin(np.abs(grid.range_bins - 6.0))
    assert j == np.argmin(np.abs(grid.angle_bins - 60.0))


# -- clutter suppression ----------------------------------------------------------------

def _static_image(layout, duration=1.0):
    params = RadarParams(duration=duration)
    scene = SceneConfig(target_range=6.0, target_angle=70.0, respiration=MotionModel(), noise_std=0.0,
                        clutter_scatterers=((4.0, 60.0, 5.0), (8.0, 120.0, 8.0)))
    prof = range_transform(synthesize_cube(scene, layout, params))
    grid = default_grid(prof.range_axis)
    return form_image(prof, layout, grid, taylor_weights(layout.K))


def test_static_scene_is_removed(layout):
    img = _static_image(layout)
    out = suppress_clutter(img)
    assert out.clutter_removed and not img.clutter_removed
    assert np.abs(out.values).max() < 1e-10 * np.abs(img.values).max()
    before = np.mean(np.abs(img.values) ** 2)
    after = np.mean(np.abs(out.values) ** 2)
    assert 10 * np.log10(after / before) <= -40.0


def test_zero_mean_sinusoid_passes_unchanged(rng):
    n = 200
    t = np.arange(n)
    amp = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    vals = amp[None] * np.exp(2j * np.pi * 7 * t / n)[:, None, None]
    img = ImageSequence(vals, PolarGrid(np.arange(1, 4.0), np.arange(4) * 10 + 50.0), t / 100.0, 3.8e-3)
    np.testing.assert_allclose(suppress_clutter(img).values, vals, rtol=0, atol=1e-12)


def test_second_suppression_is_rejected_and_would_be_a_no_op(layout):
    out = suppress_clutter(_static_image(layout, 0.2))
    with pytest.raises(ClutterAlreadyRemoved):
        suppress_clutter(out)
    again = out.values - out.values.mean(axis=0, keepdims=True)
    np.testing.assert_allclose(again, out.values, rtol=0, atol=1e-12)


def test_breathing_target_outshines_stronger_static_clutter(layout):
    params = RadarParams(duration=10.0)
    # clutter amplitude 10 is 20 dB above the unit-amplitude target
    scene = breathing_scene(noise_std=0.0, clutter_scatterers=((8.0, 120.0, 10.0),))
    prof = range_transform(synthesize_cube(scene, layout, params))
    grid = default_grid(prof.range_axis)
    img = form_image(prof, layout, grid, taylor_weights(layout.K))
    raw = np.mean(np.abs(img.values) ** 2, axis=0)
    i, j = np.unravel_index(np.argmax(raw), grid.shape)
    assert abs(grid.range_bins[i] - 8.0) < 0.05 and abs(grid.angle_bins[j] - 120.0) <= 1
    i, j = locate_target(mean_intensity(suppress_clutter(img)))
    assert abs(grid.range_bins[i] - 6.0) < 0.05 and abs(grid.angle_bins[j] - 80.0) <= 1


# -- intensity ----------------------------------------------------------------------------

def _img(vals, removed=True):
    n, nr, na = vals.shape
    grid = PolarGrid(np.arange(1, nr + 1) * 0.1, np.linspace(30, 150, na))
    return ImageSequence(vals, grid, np.arange(n) / 100.0, 3.8e-3, clutter_removed=removed)


def test_zero_image_has_zero_intensity():
    assert not np.any(mean_intensity(_img(np.zeros((5, 2, 3), complex))).values)


def test_constant_magnitude_intensity(rng):
    phase = rng.uniform(0, 2 * np.pi, (50, 2, 3))
    np.testing.assert_allclose(mean_intensity(_img(2.5 * np.exp(1j * phase))).values, 6.25, rtol=1e-14)


def test_intensity_matches_direct_sum(rng):
    vals = rng.standard_normal((40, 3, 4)) + 1j * rng.standard_normal((40, 3, 4))
    got = mean_intensity(_img(vals)).values
    oracle = np.zeros((3, 4))
    for i in range(3):
        for j in range(4):
            oracle[i, j] = sum(abs(vals[t, i, j]) ** 2 for t in range(40)) / 40
    np.testing.assert_allclose(got, oracle, rtol=1e-12)


def test_intensity_requires_suppressed_image():
    with pytest.raises(ValueError):
        mean_intensity(_img(np.zeros((2, 1, 1), complex), removed=False))


def test_covariance_intensity_matches_image_route(layout):
    params = RadarParams(duration=5.0)
    scene = breathing_scene(noise_std=1.0, clutter_scatterers=((4.0, 60.0, 5.0),))
    prof = range_transform(synthesize_cube(scene, layout, params, dtype=np.complex128))
    grid = default_grid(prof.range_axis)
    taper = taylor_weights(layout.K)
    direct = mean_intensity(suppress_clutter(form_image(prof, layout, grid, taper))).values
    fast = clutter_free_intensity(prof, layout, grid, taper).values
    assert np.abs(fast - direct).max() <= 1e-9 * direct.max()


# -- localization and region ----------------------------------------------------------------

def _map(values):
    v = np.asarray(values, float)
    return IntensityMap(v, PolarGrid(np.arange(1, v.shape[0] + 1.0), np.linspace(30, 150, v.shape[1])))


def test_single_nonzero_cell_is_located():
    v = np.zeros((5, 6))
    v[3, 2] = 1e-6
    assert locate_target(_map(v)) == (3, 2)


def test_ties_go_to_smaller_range_then_angle():
    grid = PolarGrid(np.array([5.0, 6.0]), np.array([30.0, 40.0]))
    v = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert locate_target(IntensityMap(v, grid)) == (0, 1)
    v = np.array([[1.0, 0.0], [1.0, 0.0]])  # (5 m, 30 deg) and (6 m, 30 deg)
    assert locate_target(IntensityMap(v, grid)) == (0, 0)
    v = np.array([[0.0, 0.0], [1.0, 1.0]])
    assert locate_target(IntensityMap(v, grid)) == (1, 0)


def test_all_zero_map_is_rejected():
    with pytest.raises(AllZeroImage):
        locate_target(_map(np.zeros((3, 3))))


def test_zero_db_threshold_keeps_equal_connected_cells():
    v = np.array([[1, 3, 0], [0, 3, 0], [3, 0, 0], [0, 0, 3.0]])
    reg = extract_region(_map(v), (0, 1), 0.0)
    expected = np.zeros(v.shape, bool)
    expected[[0, 1, 2], [1, 1, 0]] = True  # the (3, 2) cell is not connected
    np.testing.assert_array_equal(reg.mask, expected)
    assert reg.M == 3 and reg.anchor == (0, 1)


def test_unbounded_threshold_takes_whole_grid(rng):
    v = rng.uniform(0, 1, (6, 7))
    reg = extract_region(_map(v), locate_target(_map(v)), -np.inf)
    assert reg.M == v.size


def test_region_of_simulated_target_matches_exhaustive_fill(layout):
    params = RadarParams(duration=10.0)
    scene = breathing_scene(noise_std=0.5, clutter_scatterers=((4.0, 60.0, 5.0),))
    prof = range_transform(synthesize_cube(scene, layout, params))
    grid = default_grid(prof.range_axis)
    inten = clutter_free_intensity(prof, layout, grid, taylor_weights(layout.K))
    r0 = locate_target(inten)
    reg = extract_region(inten, r0, -20.0)
    oracle = flood_fill(inten.values, r0, 0.01 * inten.values[r0])
    np.testing.assert_array_equal(reg.mask, oracle)
    assert reg.M == oracle.sum() > 1


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-30, 0), st.integers(2, 12), st.integers(2, 12))
def test_region_is_one_component_containing_anchor(seed, eta, n, m):
    v = np.random.default_rng(seed).exponential(size=(n, m)) ** 3
    inten = _map(v)
    r0 = locate_target(inten)
    reg = extract_region(inten, r0, eta)
    assert reg.mask[r0]
    np.testing.assert_array_equal(reg.mask, flood_fill(v, r0, 10 ** (eta / 10) * v[r0]))


@pytest.mark.parametrize("radar_x", [-0.35, 0.35])
def test_simulated_target_is_localized_within_one_bin(layout, radar_x):
    params = RadarParams(duration=20.0)
    scene = breathing_scene(noise_std=2.0, radar_positions=((radar_x, 0.0),),
                            clutter_scatterers=((4.0, 60.0, 5.0), (8.0, 120.0, 8.0), (9.0, 95.0, 3.0)))
    cube = synthesize_cube(scene, layout, params)
    prof = range_transform(cube)
    grid = default_grid(prof.range_axis)
    i, j = locate_target(clutter_free_intensity(prof, layout, grid, taylor_weights(layout.K)))
    gt = cube.ground_truth
    assert abs(i - np.argmin(np.abs(grid.range_bins - gt.target_range))) <= 1
    assert abs(j - np.argmin(np.abs(grid.angle_bins - gt.target_angle))) <= 1
