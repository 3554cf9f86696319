import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import make_recording, random_full_recording
from oculo.ingest import (
    CANONICAL_COLUMNS,
    GazeSample,
    IngestConfig,
    IngestError,
    MalformedRow,
    MissingRequiredColumn,
    MovementType,
    NonMonotonicTime,
    Recording,
    Strictness,
    ViolationKind,
    load_header_map,
    parse_gaze_export,
    serialize_recording,
    validate_recording,
)

BASIC = (
    "event_index\tstart_time_us\tend_time_us\tgaze_x_px\tgaze_y_px\n"
    "0\t0\t20000\t100\t100\n"
    "0\t20000\t40000\t110\t105\n"
    "1\t40000\t60000\t500\t480\n"
)


def test_three_rows_in_order():
    rec = parse_gaze_export(BASIC.encode())
    assert [(s.start_time_us, s.gaze_x_px, s.gaze_y_px) for s in rec.samples] == [
        (0, 100.0, 100.0), (20000, 110.0, 105.0), (40000, 500.0, 480.0)
    ]
    assert rec.frame_width_px == 1920 and rec.frame_height_px == 1080
    assert rec.sample_rate_hz == 50
    assert rec.source_lines == (2, 3, 4)


@pytest.mark.parametrize("column", ["event_index", "start_time_us", "end_time_us", "gaze_x_px", "gaze_y_px"])
def test_missing_required_column(column):
    lines = BASIC.splitlines()
    header = lines[0].split("\t")
    idx = header.index(column)
    rows = ["\t".join(c for k, c in enumerate(line.split("\t")) if k != idx) for line in lines]
    with pytest.raises(MissingRequiredColumn) as err:
        parse_gaze_export("\n".join(rows))
    assert err.value.name == column


def test_empty_cell_is_absent_not_zero():
    text = "event_index\tstart_time_us\tend_time_us\tgaze_x_px\tgaze_y_px\n0\t0\t20000\t\t0\n"
    s = parse_gaze_export(text).samples[0]
    assert s.gaze_x_px is None
    assert s.gaze_y_px == 0.0
    assert not s.has_gaze


def test_unknown_columns_counted():
    text = (
        "event_index\tstart_time_us\tend_time_us\tgaze_x_px\tgaze_y_px\tvendor_blob\tother\n"
        "0\t0\t20000\t1\t2\tzz\t3\n"
    )
    rec = parse_gaze_export(text)
    assert rec.unknown_column_count == 2
    assert rec.unknown_columns == ("vendor_blob", "other")
    assert len(rec.samples) == 1


def test_movement_type_case_insensitive():
    text = (
        "event_index\tstart_time_us\tend_time_us\tgaze_x_px\tgaze_y_px\tmovement_type\n"
        "0\t0\t1\t1\t1\tfixation\n1\t1\t2\t1\t1\tSACCADE\n2\t2\t3\t1\t1\tUnclassified\n"
    )
    rec = parse_gaze_export(text, IngestConfig(sample_rate_hz=100))
    assert [s.movement_type for s in rec.samples] == list(MovementType)


def test_malformed_row_fails_fast_by_default():
    bad = BASIC + "2\t60000\tnot-a-number\t1\t1\n"
    with pytest.raises(MalformedRow) as err:
        parse_gaze_export(bad)
    assert err.value.line_no == 5


def test_lenient_skips_and_counts():
    bad = BASIC + "2\t60000\n" + "3\t80000\t100000\t1\t1\n"
    rec = parse_gaze_export(bad, IngestConfig(strictness=Strictness.LENIENT))
    assert len(rec.samples) == 4
    assert rec.skipped_rows == (5,)


def test_strict_rejects_decreasing_time():
    text = BASIC + "2\t10000\t30000\t1\t1\n"
    with pytest.raises(NonMonotonicTime) as err:
        parse_gaze_export(text, IngestConfig(strictness=Strictness.STRICT))
    assert err.value.line_no == 5
    # default mode keeps the row; validation reports it
    rec = parse_gaze_export(text)
    assert len(rec.samples) == 4
    kinds = validate_recording(rec).by_kind()
    assert kinds[ViolationKind.NON_MONOTONIC] == 1


def test_metadata_lines_and_overrides():
    text = "# recording_id=abc\n# frame_width_px=3840\n# frame_height_px=1920\n# sample_rate_hz=100\n" + BASIC
    rec = parse_gaze_export(text)
    assert (rec.recording_id, rec.frame_width_px, rec.frame_height_px, rec.sample_rate_hz) == ("abc", 3840, 1920, 100)
    rec = parse_gaze_export(text, IngestConfig(frame_width_px=1000, frame_height_px=500))
    assert (rec.frame_width_px, rec.frame_height_px) == (1000, 500)


def test_sample_rate_inferred_and_checked():
    text = BASIC.replace("20000", "10000").replace("40000", "20000").replace("60000", "30000")
    assert parse_gaze_export(text).sample_rate_hz == 100
    with pytest.raises(IngestError):
        parse_gaze_export("# sample_rate_hz=60\n" + BASIC)
    assert parse_gaze_export("# sample_rate_hz=60\n" + BASIC, IngestConfig(allowed_sample_rates=(60,))).sample_rate_hz == 60


def test_header_map():
    mapping = load_header_map("Recording timestamp\tstart_time_us\nGaze point X\tgaze_x_px\nGaze point Y\tgaze_y_px\n")
    text = (
        "event_index\tRecording timestamp\tend_time_us\tGaze point X\tGaze point Y\n"
        "0\t0\t20000\t5\t6\n"
    )
    rec = parse_gaze_export(text, IngestConfig(header_map=mapping))
    assert (rec.samples[0].gaze_x_px, rec.samples[0].gaze_y_px) == (5.0, 6.0)
    with pytest.raises(IngestError):
        load_header_map("a\tnot_a_column\n")


def test_round_trip_1000_rows():
    rec = random_full_recording(random.Random(7), 1000)
    text = serialize_recording(rec)
    back = parse_gaze_export(text)
    assert len(back.samples) == 1000
    assert back.samples == rec.samples
    for key in ("recording_id", "participant_id", "sample_rate_hz", "frame_width_px", "frame_height_px"):
        assert getattr(back, key) == getattr(rec, key)
    # and the serialized form is a fixed point
    assert serialize_recording(back) == text


def _sig9(v):
    return float(f"{v:.9g}")


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=0, max_value=2**31), st.integers(min_value=1, max_value=60))
def test_lossless_for_recognized_columns(seed, n):
    rec = random_full_recording(random.Random(seed), n)
    back = parse_gaze_export(serialize_recording(rec))
    for a, b in zip(rec.samples, back.samples):
        for col in CANONICAL_COLUMNS:
            va, vb = getattr(a, col), getattr(b, col)
            if isinstance(va, float):
                assert _sig9(va) == _sig9(vb)
            else:
                assert va == vb


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 10**6), st.integers(0, 1000)), min_size=1, max_size=40))
def test_row_count_and_order_preserved(rows):
    starts = sorted(r[0] for r in rows)
    lines = ["event_index\tstart_time_us\tend_time_us\tgaze_x_px\tgaze_y_px"]
    for k, (t, x) in enumerate(zip(starts, (r[1] for r in rows))):
        lines.append(f"{k}\t{t}\t{t + 100}\t{x}\t{x}")
    rec = parse_gaze_export("\n".join(lines), IngestConfig(strictness=Strictness.STRICT, sample_rate_hz=50))
    assert len(rec.samples) == len(rows)
    assert [s.event_index for s in rec.samples] == list(range(len(rows)))


# --- validation -----------------------------------------------------------


def test_end_before_start_is_time_order_violation():
    s = GazeSample(event_index=0, start_time_us=100, end_time_us=50, gaze_x_px=10.0, gaze_y_px=10.0)
    rec = Recording("r", "p", 50, 1920, 1080, (s,))
    report = validate_recording(rec, Strictness.STRICT)
    assert [v.kind for v in report.violations] == [ViolationKind.TIME_ORDER]
    assert not report.ok


def test_clean_fixture_has_no_violations():
    rec = make_recording([(100.0 + i, 200.0) for i in range(100)])
    assert validate_recording(rec, Strictness.STRICT).violations == ()


def test_out_of_frame_warning():
    pts = [(100.0, 100.0)] * 5
    pts[3] = (-5.0, 100.0)
    rec = make_recording(pts, width=640, height=480)
    report = validate_recording(rec, Strictness.LENIENT)
    assert len(report.violations) == 1
    v = report.violations[0]
    assert v.kind == ViolationKind.OUT_OF_FRAME and v.severity == "warning" and v.line_no == 5
    assert report.ok
    # the frame bound is exclusive on the right: x == width is outside
    rec = make_recording([(640.0, 0.0), (639.0, 479.0)], width=640, height=480)
    assert [v.line_no for v in validate_recording(rec).violations] == [2]


def test_duration_mismatch_only_for_single_sample_events():
    a = GazeSample(0, 0, 20000, 1.0, 1.0, movement_type=MovementType.FIXATION, event_duration_us=20000)
    b = GazeSample(1, 20000, 40000, 1.0, 1.0, movement_type=MovementType.FIXATION, event_duration_us=5)
    c1 = GazeSample(2, 40000, 60000, 1.0, 1.0, movement_type=MovementType.SACCADE, event_duration_us=40000)
    c2 = GazeSample(2, 60000, 80000, 1.0, 1.0, movement_type=MovementType.SACCADE, event_duration_us=40000)
    d = GazeSample(3, 80000, 100000, 1.0, 1.0, event_duration_us=-1)
    rec = Recording("r", "p", 50, 1920, 1080, (a, b, c1, c2, d))
    found = [(v.kind, v.line_no) for v in validate_recording(rec).violations]
    assert found == [(ViolationKind.DURATION_MISMATCH, 3), (ViolationKind.DURATION_MISMATCH, 6)]


def test_gaze_direction_norm():
    good = GazeSample(0, 0, 1, 1.0, 1.0, gaze_dir_left_x=0.0, gaze_dir_left_y=0.0, gaze_dir_left_z=1.05)
    bad = GazeSample(1, 1, 2, 1.0, 1.0, gaze_dir_right_x=0.5, gaze_dir_right_y=0.5, gaze_dir_right_z=0.0)
    partial = GazeSample(2, 2, 3, 1.0, 1.0, gaze_dir_right_x=5.0)
    rec = Recording("r", "p", 100, 1920, 1080, (good, bad, partial))
    found = validate_recording(rec).violations
    assert [(v.kind, v.line_no) for v in found] == [(ViolationKind.GAZE_DIR_NORM, 3)]
