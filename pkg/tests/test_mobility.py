"""Tests for mobility models and trace loading."""

from __future__ import annotations

import math

import pytest

from vndn.geo import GeoPoint
from vndn.mobility import (
    LoopMobility,
    OutOfTraceRangeError,
    StaticMobility,
    TraceFormatError,
    TraceMobility,
    load_traces_csv,
    position_at,
)


def square_loop(side: float = 100.0) -> list[GeoPoint]:
    return [
        GeoPoint(0.0, 0.0),
        GeoPoint(side, 0.0),
        GeoPoint(side, side),
        GeoPoint(0.0, side),
    ]


def test_static_mobility_never_moves():
    model = StaticMobility(GeoPoint(3.0, -4.0))
    assert position_at(model, 0.0) == GeoPoint(3.0, -4.0)
    assert position_at(model, 1e6) == GeoPoint(3.0, -4.0)


def test_trace_returns_waypoints_exactly():
    model = TraceMobility([(0.0, GeoPoint(0.0, 0.0)), (10.0, GeoPoint(100.0, 0.0))])
    assert model.position_at(0.0) == GeoPoint(0.0, 0.0)
    assert model.position_at(10.0) == GeoPoint(100.0, 0.0)


def test_trace_interpolates_linearly():
    model = TraceMobility([(0.0, GeoPoint(0.0, 0.0)), (10.0, GeoPoint(100.0, 0.0))])
    assert model.position_at(5.0) == GeoPoint(50.0, 0.0)
    assert model.position_at(2.5) == GeoPoint(25.0, 0.0)


def test_trace_interpolates_both_axes():
    model = TraceMobility([(0.0, GeoPoint(0.0, 10.0)), (4.0, GeoPoint(8.0, 2.0))])
    assert model.position_at(1.0) == GeoPoint(2.0, 8.0)


def test_trace_outside_span_raises():
    model = TraceMobility([(1.0, GeoPoint(0.0, 0.0)), (2.0, GeoPoint(1.0, 0.0))])
    with pytest.raises(OutOfTraceRangeError):
        model.position_at(0.99)
    with pytest.raises(OutOfTraceRangeError):
        model.position_at(2.01)


def test_trace_timestamps_must_strictly_increase():
    with pytest.raises(ValueError):
        TraceMobility([(0.0, GeoPoint(0.0, 0.0)), (0.0, GeoPoint(1.0, 0.0))])
    with pytest.raises(ValueError):
        TraceMobility([(1.0, GeoPoint(0.0, 0.0)), (0.5, GeoPoint(1.0, 0.0))])


def test_trace_requires_a_waypoint():
    with pytest.raises(ValueError):
        TraceMobility([])


def test_loop_period_is_length_over_speed():
    model = LoopMobility(square_loop(), speed_mps=4.0)
    assert model.length_m == 400.0
    assert model.period_s == 100.0


def test_loop_wraps_back_to_start():
    model = LoopMobility(square_loop(), speed_mps=4.0)
    start = model.position_at(0.0)
    assert start == GeoPoint(0.0, 0.0)
    wrapped = model.position_at(100.0)
    assert math.isclose(wrapped.x, start.x, abs_tol=1e-9)
    assert math.isclose(wrapped.y, start.y, abs_tol=1e-9)


def test_loop_visits_corners_in_order():
    model = LoopMobility(square_loop(), speed_mps=4.0)
    assert model.position_at(25.0) == GeoPoint(100.0, 0.0)
    assert model.position_at(50.0) == GeoPoint(100.0, 100.0)
    assert model.position_at(75.0) == GeoPoint(0.0, 100.0)
    assert model.position_at(12.5) == GeoPoint(50.0, 0.0)


def test_open_polyline_is_closed_automatically():
    open_loop = LoopMobility(square_loop(), speed_mps=4.0)
    closed = LoopMobility(square_loop() + [GeoPoint(0.0, 0.0)], speed_mps=4.0)
    assert open_loop.length_m == closed.length_m == 400.0
    for t in (0.0, 10.0, 60.0, 99.0):
        assert open_loop.position_at(t) == closed.position_at(t)


def test_loop_start_offset_shifts_phase():
    base = LoopMobility(square_loop(), speed_mps=4.0)
    shifted = LoopMobility(square_loop(), speed_mps=4.0, start_offset_m=100.0)
    assert shifted.position_at(0.0) == GeoPoint(100.0, 0.0)
    assert shifted.position_at(0.0) == base.position_at(25.0)
    assert shifted.position_at(10.0) == base.position_at(35.0)


def test_loop_stop_holds_position_and_extends_period():
    model = LoopMobility(square_loop(), speed_mps=4.0, stops=[(100.0, 5.0)])
    assert model.period_s == 105.0
    # the car reaches the first corner after 25 s and dwells for 5 s
    assert model.position_at(25.0) == GeoPoint(100.0, 0.0)
    assert model.position_at(27.0) == GeoPoint(100.0, 0.0)
    assert model.position_at(30.0) == GeoPoint(100.0, 0.0)
    assert model.position_at(31.0) == GeoPoint(100.0, 4.0)
    assert model.position_at(24.0) == GeoPoint(96.0, 0.0)


def test_loop_multiple_stops_apply_in_distance_order():
    model = LoopMobility(square_loop(), speed_mps=4.0,
                         stops=[(200.0, 2.0), (100.0, 3.0)])
    assert model.period_s == 105.0
    assert model.position_at(28.0) == GeoPoint(100.0, 0.0)  # dwelling at corner 1
    assert model.position_at(53.0) == GeoPoint(100.0, 100.0)  # reached 200 m at 53 s
    assert model.position_at(55.0) == GeoPoint(100.0, 100.0)


def test_loop_validation():
    with pytest.raises(ValueError):
        LoopMobility(square_loop(), speed_mps=0.0)
    with pytest.raises(ValueError):
        LoopMobility([GeoPoint(0.0, 0.0)], speed_mps=1.0)
    with pytest.raises(ValueError):
        LoopMobility(square_loop(), speed_mps=1.0, stops=[(500.0, 1.0)])
    with pytest.raises(ValueError):
        LoopMobility(square_loop(), speed_mps=1.0, stops=[(10.0, -1.0)])
    with pytest.raises(ValueError):
        LoopMobility([GeoPoint(0.0, 0.0), GeoPoint(0.0, 0.0)], speed_mps=1.0)


def write_csv(tmp_path, text: str):
    path = tmp_path / "traces.csv"
    path.write_text(text)
    return path


def test_load_traces_builds_per_node_models(tmp_path):
    path = write_csv(tmp_path, "\n".join([
        "time_s,node_id,x_m,y_m",
        "0.0,0,0.0,0.0",
        "0.0,1,5.0,5.0",
        "10.0,0,100.0,0.0",
        "10.0,1,5.0,25.0",
        "",
    ]))
    traces = load_traces_csv(path)
    assert set(traces) == {0, 1}
    assert traces[0].position_at(5.0) == GeoPoint(50.0, 0.0)
    assert traces[1].position_at(5.0) == GeoPoint(5.0, 15.0)


def test_load_traces_rejects_bad_header(tmp_path):
    path = write_csv(tmp_path, "t,node,x,y\n0.0,0,0.0,0.0\n")
    with pytest.raises(TraceFormatError) as exc:
        load_traces_csv(path)
    assert f"{path}:1" in str(exc.value)


def test_load_traces_rejects_wrong_column_count(tmp_path):
    path = write_csv(tmp_path, "time_s,node_id,x_m,y_m\n0.0,0,0.0\n")
    with pytest.raises(TraceFormatError) as exc:
        load_traces_csv(path)
    assert f"{path}:2" in str(exc.value)


def test_load_traces_rejects_unsorted_rows(tmp_path):
    path = write_csv(tmp_path, "\n".join([
        "time_s,node_id,x_m,y_m",
        "5.0,0,0.0,0.0",
        "1.0,0,1.0,0.0",
        "",
    ]))
    with pytest.raises(TraceFormatError) as exc:
        load_traces_csv(path)
    assert f"{path}:3" in str(exc.value)


def test_load_traces_rejects_non_numeric_cells(tmp_path):
    path = write_csv(tmp_path, "time_s,node_id,x_m,y_m\n0.0,zero,0.0,0.0\n")
    with pytest.raises(TraceFormatError) as exc:
        load_traces_csv(path)
    assert f"{path}:2" in str(exc.value)
