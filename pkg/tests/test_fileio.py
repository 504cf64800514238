import csv

import numpy as np
import pytest

from respiradar.errors import CorruptFile
from respiradar.eval_harness import MetricsReport
from respiradar.fileio import (format_reports, read_cube, read_ground_truth, read_image, read_interval_csv,
                               write_cube, write_image, write_intensity_csv, write_interval_csv,
                               write_metrics_csv, write_scatter_csv)
from respiradar.imaging import ImageSequence, IntensityMap, PolarGrid
from respiradar.respiration import IntervalSeries
from respiradar.sim_core import MotionModel, RadarParams, synthesize_cube

from conftest import breathing_scene


@pytest.fixture(scope="module")
def cube(layout):
    motion = MotionModel(kind="transient-bursts", burst_rate=2.0, burst_duration=0.2, burst_amplitude=0.01)
    return synthesize_cube(breathing_scene(body_motion=motion), layout, RadarParams(duration=1.0))


def test_cube_round_trip(tmp_path, cube):
    path = tmp_path / "a.rcub"
    write_cube(path, cube)
    back = read_cube(path)
    np.testing.assert_array_equal(back.samples, cube.samples)
    np.testing.assert_allclose(back.slow_time_axis, cube.slow_time_axis, rtol=0, atol=1e-12)
    np.testing.assert_allclose(back.fast_time_axis, cube.fast_time_axis, rtol=0, atol=1e-15)
    np.testing.assert_array_equal(back.layout.virtual_positions, cube.layout.virtual_positions)
    assert back.params.wavelength == pytest.approx(cube.params.wavelength, rel=1e-15)
    assert back.params.bandwidth == cube.params.bandwidth
    assert back.params.chirp_duration == pytest.approx(cube.params.chirp_duration, rel=1e-12)
    np.testing.assert_array_equal(back.ground_truth.tau_true, cube.ground_truth.tau_true)
    np.testing.assert_array_equal(back.ground_truth.motion_mask, cube.ground_truth.motion_mask)
    assert back.ground_truth.motion_mask.any()


def test_ground_truth_reads_without_samples(tmp_path, cube):
    path = tmp_path / "a.rcub"
    write_cube(path, cube)
    axis, tau, mask = read_ground_truth(path)
    np.testing.assert_allclose(axis, cube.slow_time_axis, atol=1e-12)
    np.testing.assert_array_equal(tau, cube.ground_truth.tau_true)
    np.testing.assert_array_equal(mask, cube.ground_truth.motion_mask)


def test_identical_cubes_write_identical_bytes(tmp_path, cube, layout):
    again = synthesize_cube(breathing_scene(body_motion=MotionModel(
        kind="transient-bursts", burst_rate=2.0, burst_duration=0.2, burst_amplitude=0.01)),
        layout, RadarParams(duration=1.0))
    write_cube(tmp_path / "a.rcub", cube)
    write_cube(tmp_path / "b.rcub", again)
    assert (tmp_path / "a.rcub").read_bytes() == (tmp_path / "b.rcub").read_bytes()


@pytest.mark.parametrize("damage", ["magic", "truncate", "header", "extra"])
def test_damaged_cube_is_rejected(tmp_path, cube, damage):
    path = tmp_path / "a.rcub"
    write_cube(path, cube)
    raw = path.read_bytes()
    raw = {"magic": b"XXXXX" + raw[5:], "truncate": raw[:-100], "header": raw[:40],
           "extra": raw + b"\0"}[damage]
    path.write_bytes(raw)
    with pytest.raises(CorruptFile):
        read_cube(path)
    with pytest.raises(CorruptFile):
        read_ground_truth(path)


def test_image_round_trip(tmp_path, rng):
    vals = (rng.standard_normal((6, 3, 4)) + 1j * rng.standard_normal((6, 3, 4))).astype(np.complex64)
    img = ImageSequence(vals.astype(complex), PolarGrid(np.array([5.9, 6.0, 6.1]), np.array([70., 80, 90, 100])),
                        np.arange(6) * 0.01, 3.8e-3, clutter_removed=True)
    write_image(tmp_path / "i.rimg", img)
    back = read_image(tmp_path / "i.rimg")
    np.testing.assert_array_equal(back.values, img.values)
    np.testing.assert_array_equal(back.grid.range_bins, img.grid.range_bins)
    np.testing.assert_array_equal(back.grid.angle_bins, img.grid.angle_bins)
    assert back.clutter_removed and back.wavelength == img.wavelength
    (tmp_path / "j.rimg").write_bytes((tmp_path / "i.rimg").read_bytes()[:-8])
    with pytest.raises(CorruptFile):
        read_image(tmp_path / "j.rimg")
    (tmp_path / "k.rimg").write_bytes(b"RCUB1" + bytes(100))
    with pytest.raises(CorruptFile):
        read_image(tmp_path / "k.rimg")


def test_interval_csv_round_trip(tmp_path):
    acc = np.array([True, False, True])
    series = IntervalSeries(np.array([2.1, 2.2, 2.3]), np.array([1.25, np.nan, 1.3125]), acc,
                            np.array([12.5, 3.0, 40.0]), np.array([7, 7, 7]), "proposed")
    path = tmp_path / "s.csv"
    write_interval_csv(path, series)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["time_s", "tau_hat_s", "accepted", "weight_sum", "M"]
    assert rows[2][1] == "" and rows[2][2] == "0"
    back = read_interval_csv(path)
    np.testing.assert_array_equal(back.accepted, acc)
    np.testing.assert_array_equal(back.tau_hat, series.tau_hat)
    np.testing.assert_array_equal(back.M, series.M)


def test_interval_csv_with_wrong_columns_is_rejected(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("time,tau\n1,2\n")
    with pytest.raises(CorruptFile):
        read_interval_csv(path)


def test_intensity_and_metrics_exports(tmp_path):
    inten = IntensityMap(np.array([[1.0, 2.0], [3.0, 0.5]]), PolarGrid(np.array([1.0, 2.0]), np.array([80., 90.])))
    write_intensity_csv(tmp_path / "m.csv", inten)
    rows = list(csv.reader(open(tmp_path / "m.csv")))
    assert rows[0] == ["range_m", "angle_deg", "value"] and len(rows) == 5
    assert rows[3] == ["2", "80", "3"]

    reports = [MetricsReport("conventional", None, 0.25, 0.25, 0.55, 1.0, None, 1200),
               MetricsReport("proposed", 0.5, 0.08, 0.1, 0.72, 0.844, 0.05, 1000)]
    write_metrics_csv(tmp_path / "r.csv", reports, {"seed": [3, 3]})
    rows = list(csv.reader(open(tmp_path / "r.csv")))
    assert rows[0][:3] == ["seed", "method", "eps_th"]
    assert rows[1][2] == "" and rows[2][2] == "0.5" and rows[1][-1] == "1200"
    text = format_reports(reports)
    assert "conventional" in text and "0.844" in text


def test_scatter_csv_keeps_common_hops(tmp_path):
    t = np.arange(4) * 0.1
    a = IntervalSeries(t, np.array([1.0, 1.1, 1.2, 1.3]), np.array([1, 1, 0, 1], bool), np.ones(4), np.ones(4))
    b = IntervalSeries(t, np.array([1.0, 1.2, 1.2, 1.4]), np.array([1, 0, 1, 1], bool), np.ones(4), np.ones(4))
    write_scatter_csv(tmp_path / "x.csv", a, b)
    rows = list(csv.reader(open(tmp_path / "x.csv")))
    assert rows[1:] == [["0", "1", "1"], ["0.3", "1.3", "1.4"]]
