import numpy as np
import pytest
from hypothesis import given, strategies as st

from builders import make_series, raw_row, rows_csv, write_csv
from hmdpose.errors import MalformedRow, MissingColumn, MultiPersonFrame, NonMonotonicTime, OutOfRange
from hmdpose.ingest import (
    CSV_COLUMNS, cut_windows, displacement, displacement_matrix, load_pose_csv, load_pose_dir,
    pixel_from_normalized,
)
from hmdpose.taxonomy import Landmark


def test_three_rows_infer_fps(tmp_path):
    p = rows_csv(tmp_path / "a.csv", [raw_row(t, i, hi=0.1) for i, t in enumerate((0.0, 0.033, 0.066))])
    s = load_pose_csv(p)
    assert s.n_frames == 3
    assert s.fps == pytest.approx(30.3, abs=0.1)
    assert s.window_bounds == [(0.0, 0.1)]


def test_fps_header_wins_over_inference(tmp_path):
    p = rows_csv(tmp_path / "a.csv", [raw_row(t, i) for i, t in enumerate((0.0, 0.04, 0.08))], comment="# fps: 30")
    assert load_pose_csv(p).fps == 30.0


def test_annotation_out_of_domain(tmp_path):
    rows = [raw_row(0.0, 0), raw_row(0.033, 1, label_tremor=3)]
    with pytest.raises(MalformedRow) as err:
        load_pose_csv(rows_csv(tmp_path / "a.csv", rows))
    assert err.value.line == 3


def test_shuffled_time(tmp_path):
    rows = [raw_row(t, i) for i, t in enumerate((0.0, 0.066, 0.033))]
    with pytest.raises(NonMonotonicTime):
        load_pose_csv(rows_csv(tmp_path / "a.csv", rows))


def test_repeated_frame_is_multi_person(tmp_path):
    rows = [raw_row(0.0, 0), raw_row(0.0, 0)]
    with pytest.raises(MultiPersonFrame):
        load_pose_csv(rows_csv(tmp_path / "a.csv", rows))


def test_missing_column_named(tmp_path):
    header = [c for c in CSV_COLUMNS if c != "nose_x"]
    with pytest.raises(MissingColumn, match="nose_x"):
        load_pose_csv(rows_csv(tmp_path / "a.csv", [raw_row(0.0, 0), raw_row(0.1, 1)], header=header))


def test_schema_mapping(tmp_path):
    header = ["time" if c == "timestamp" else c for c in CSV_COLUMNS]
    rows = [dict(raw_row(t, i), time=t) for i, t in enumerate((0.0, 0.5, 1.0))]
    s = load_pose_csv(rows_csv(tmp_path / "a.csv", rows, header=header), schema={"timestamp": "time"})
    assert s.fps == pytest.approx(2.0)


def test_empty_coordinate_is_nan(tmp_path):
    rows = [raw_row(0.0, 0), raw_row(0.1, 1, nose_x="")]
    s = load_pose_csv(rows_csv(tmp_path / "a.csv", rows))
    assert np.isnan(s.coords[1, Landmark.NOSE.index, 0])
    assert np.isnan(displacement(s, Landmark.NOSE).samples[1])


def test_negative_pixel_rejected(tmp_path):
    with pytest.raises(MalformedRow):
        load_pose_csv(rows_csv(tmp_path / "a.csv", [raw_row(0.0, 0), raw_row(0.1, 1, nose_y=-1)]))


@pytest.mark.parametrize("xn,yn,w,h,want", [
    (0.5, 0.5, 1920, 1080, (960, 540)),
    (1.0, 1.0, 1920, 1080, (1920, 1080)),
    (0.333, 0.75, 100, 200, (33, 150)),
])
def test_pixel_from_normalized(xn, yn, w, h, want):
    assert pixel_from_normalized(xn, yn, w, h) == want


def test_pixel_out_of_range():
    with pytest.raises(OutOfRange):
        pixel_from_normalized(1.2, 0.5, 10, 10)


@given(st.floats(0, 1), st.floats(0, 1), st.integers(1, 4000), st.integers(1, 4000))
def test_pixel_inside_frame(xn, yn, w, h):
    x, y = pixel_from_normalized(xn, yn, w, h)
    assert 0 <= x <= w and 0 <= y <= h


def test_displacement_is_hypot():
    s = make_series(n_windows=1)
    s.coords[0, 0] = (3.0, 4.0)
    s.coords[1, 0] = (0.0, 0.0)
    d = displacement_matrix(s)
    assert d[0, 0] == 5.0 and d[1, 0] == 0.0
    assert np.array_equal(displacement(s, Landmark.NOSE).samples, d[:, 0])


def test_window_of_300_frames():
    s = make_series(n_windows=2, window_s=10.0)
    windows, report = cut_windows(s)
    assert [w.n_frames for w in windows] == [300, 300]
    assert windows[0].stop == windows[1].start
    assert not report.counts


def test_window_past_end_dropped():
    s = make_series(n_windows=1, window_s=2.0)
    s.window_bounds.append((50.0, 60.0))
    windows, report = cut_windows(s)
    assert len(windows) == 1 and report.counts["empty"] == 1


@given(st.lists(st.floats(0.1, 3.0), min_size=1, max_size=6))
def test_windows_are_half_open_and_disjoint(lengths):
    s = make_series(n_windows=1, window_s=20.0)
    edges = np.concatenate([[0.0], np.cumsum(lengths)])
    s.window_bounds[:] = list(zip(edges[:-1], edges[1:]))
    windows, _ = cut_windows(s)
    covered = np.concatenate([np.arange(w.start, w.stop) for w in windows]) if windows else np.array([])
    assert covered.size == np.unique(covered).size
    for w in windows:
        t = s.timestamps[w.start:w.stop]
        assert t.min() >= w.bounds[0] and t.max() < w.bounds[1]


def test_csv_round_trip(tmp_path):
    s = make_series(labels={1: {"tremor": 1}, 2: {"chorea": 2}}, control=False)
    back = load_pose_csv(write_csv(s, tmp_path / "s.csv", digits=6))
    assert back.fps == s.fps and back.window_bounds == s.window_bounds
    np.testing.assert_allclose(back.coords, s.coords, atol=1e-6)
    assert np.array_equal(back.annotations, s.annotations)
    assert load_pose_dir(tmp_path)[0].video_id == "s"
