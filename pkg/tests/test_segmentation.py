import itertools

import numpy as np
import pytest

from gesturempc.segmentation import (
    MotionEvent,
    MotionTrace,
    PauseConfig,
    PauseEvent,
    SessionState,
    TraceError,
    calibrate_threshold,
    detect_pauses,
    is_pause_sample,
    read_trace_csv,
    segment,
    step,
    windows_report,
    write_trace_csv,
)
from gesturempc.synthetic import synthesize_trace


CFG = PauseConfig()


def _trace(g, rate=60.0):
    g = np.asarray(g, dtype=float)
    return MotionTrace(t=np.arange(len(g)) / rate, gx=g[:, 0], gy=g[:, 1], gz=g[:, 2])


def test_is_pause_sample_cases():
    assert is_pause_sample(0.0, 0.0, 0.0, CFG)
    assert not is_pause_sample(0.5, 0.0, 0.0, CFG)
    # the band is a closed interval: |g| == threshold still counts as pause
    assert is_pause_sample(CFG.threshold, 0.0, 0.0, CFG)
    assert not is_pause_sample(0.0, np.nextafter(CFG.threshold, 1.0), 0.0, CFG)


def test_detect_pauses_all_motion():
    trace = _trace(np.full((100, 3), 0.8))
    assert detect_pauses(trace, CFG) == []


def test_detect_pauses_all_still():
    trace = _trace(np.zeros((120, 3)))
    intervals = detect_pauses(trace, CFG)
    assert len(intervals) == 1
    lo, hi, dur = intervals[0]
    assert (lo, hi) == (0, 120)
    assert dur == pytest.approx(119 / 60)


def test_detect_pauses_constructed_fixture():
    still = np.zeros((120, 3))
    t = np.arange(60) / 60.0
    burst = np.column_stack([np.sin(2 * np.pi * 5 * t) + 0.5] * 3)
    trace = _trace(np.vstack([still, burst, still]))
    intervals = detect_pauses(trace, CFG)
    long_ones = [iv for iv in intervals if iv[2] > 1.5]
    assert len(long_ones) == 2
    assert long_ones[0][0] == 0
    assert long_ones[1][1] == len(trace)
    for _, _, dur in long_ones:
        assert dur == pytest.approx(119 / 60, abs=0.05)


def test_detect_pauses_rejects_unsorted():
    with pytest.raises(TraceError):
        MotionTrace(
            t=np.array([0.0, 0.2, 0.1]),
            gx=np.zeros(3), gy=np.zeros(3), gz=np.zeros(3),
        )


def test_step_transitions():
    opening = PauseEvent(duration=CFG.open_duration)
    closing = PauseEvent(duration=CFG.close_duration)
    short = PauseEvent(duration=0.5)
    motion = MotionEvent(0, 100)

    assert step(SessionState.IDLE, opening, CFG)[0] is SessionState.ACTIVE
    assert step(SessionState.IDLE, motion, CFG)[0] is SessionState.IDLE
    assert step(SessionState.IDLE, short, CFG)[0] is SessionState.IDLE

    state, emitted = step(SessionState.ACTIVE, motion, CFG)
    assert state is SessionState.ACTIVE and emitted is motion
    assert step(SessionState.ACTIVE, closing, CFG)[0] is SessionState.CLOSED
    assert step(SessionState.ACTIVE, short, CFG)[0] is SessionState.ACTIVE

    # closed resets before handling the next event
    assert step(SessionState.CLOSED, motion, CFG)[0] is SessionState.IDLE
    assert step(SessionState.CLOSED, opening, CFG)[0] is SessionState.ACTIVE


def test_state_machine_exhaustive_no_emit_outside_active():
    # property: windows are only emitted from the active state, over all
    # event sequences of length <= 6
    events = [
        PauseEvent(duration=2.0),
        PauseEvent(duration=0.7),
        MotionEvent(0, 50),
    ]
    for length in range(1, 7):
        for seq in itertools.product(events, repeat=length):
            state = SessionState.IDLE
            for ev in seq:
                was_active = state is SessionState.ACTIVE or (
                    state is SessionState.CLOSED and False
                )
                prev = state
                state, emitted = step(state, ev, CFG)
                if emitted is not None:
                    assert prev in (SessionState.ACTIVE, SessionState.CLOSED)
                    # closed resets to idle, which never emits
                    assert prev is SessionState.ACTIVE


def test_segment_three_symbol_session():
    trace, truth = synthesize_trace([["B", "C", "A"]], seed=5)
    windows = segment(trace, CFG)
    assert len(windows) == 3
    for w, item in zip(windows, truth):
        assert w.start_index == item["start"]
        assert w.end_index == item["end"]


def test_segment_no_opening_pause():
    rng = np.random.default_rng(0)
    g = rng.normal(0, 1.0, size=(600, 3)) + 0.5
    assert segment(_trace(g), CFG) == []


def test_segment_ignores_post_closing_motion():
    trace, truth = synthesize_trace([["A"]], seed=6)
    n_before = len(trace)
    t2 = np.arange(180) / 60.0
    extra = np.column_stack([1.5 * np.cos(2 * np.pi * 4 * t2)] * 3)
    g = np.vstack([trace.gyro, extra])
    extended = _trace(g)
    windows = segment(extended, CFG)
    assert len(windows) == 1
    assert windows[0].end_index <= n_before


def test_segment_invariant_under_time_translation():
    trace, _ = synthesize_trace([["A", "E"]], seed=7)
    shifted = MotionTrace(
        t=trace.t + 1234.5, gx=trace.gx, gy=trace.gy, gz=trace.gz
    )
    w1 = [(w.start_index, w.end_index) for w in segment(trace, CFG)]
    w2 = [(w.start_index, w.end_index) for w in segment(shifted, CFG)]
    assert w1 == w2 and len(w1) == 2


def test_segment_symbol_activation_mode():
    trace, _ = synthesize_trace([["A", "B", "C"]], seed=8)
    cfg = PauseConfig(activation_mode="symbol")
    windows = segment(trace, cfg)
    assert [w.role for w in windows] == ["activation", "symbol", "termination"]


def test_min_motion_samples_filter():
    still = np.zeros((121, 3))
    blip = np.full((5, 3), 1.0)  # 5 samples < min_motion_samples
    g = np.vstack([still, blip, still])
    assert segment(_trace(g), CFG) == []


def test_calibrate_threshold_zero_noise():
    segs = [np.zeros((100, 3))]
    assert calibrate_threshold(segs) == pytest.approx(0.01)


def test_calibrate_threshold_gaussian():
    rng = np.random.default_rng(9)
    segs = [rng.normal(0, 0.05, size=(5000, 3)) for _ in range(4)]
    th = calibrate_threshold(segs)
    assert th == pytest.approx(0.13, abs=0.02)


def test_calibrate_threshold_single_sample():
    th = calibrate_threshold([np.array([[0.02, -0.07, 0.04]])])
    assert th == pytest.approx(0.07, abs=1e-6)


def test_calibrate_threshold_empty():
    with pytest.raises(ValueError):
        calibrate_threshold([])


def test_trace_csv_round_trip(tmp_path):
    trace, _ = synthesize_trace([["A"]], seed=10)
    path = tmp_path / "trace.csv"
    write_trace_csv(path, trace)
    back = read_trace_csv(path)
    assert np.allclose(back.t, trace.t)
    assert np.allclose(back.gx, trace.gx, atol=1e-6)
    windows = segment(back, CFG)
    report = windows_report(windows, back)
    assert len(report) == 1 and report[0]["n_samples"] == windows[0].n_samples


def test_pause_config_validation():
    with pytest.raises(ValueError):
        PauseConfig(threshold=0.0)
    with pytest.raises(ValueError):
        PauseConfig(open_duration=0.9, tolerance=0.5)
    with pytest.raises(ValueError):
        PauseConfig(activation_mode="nope")
