"""Tests for the road graph and geolocation helpers."""

from __future__ import annotations

import json
import math

import pytest
from hypothesis import given, strategies as st

from vndn.geo import (
    EmptyGraphError,
    GeoPoint,
    Intersection,
    RoadGraph,
    RoadGraphError,
    Segment,
    UnknownIntersectionError,
    direction_of,
    distance,
    load_road_graph,
    nearest_intersection,
    reverse_geocode,
    road_graph_from_dict,
    road_graph_to_dict,
    roads_at,
)


def cross_graph() -> RoadGraph:
    """A four-way crossing at the origin with one dead-end spur."""
    return RoadGraph(
        intersections=(
            Intersection(0, "center", GeoPoint(0.0, 0.0)),
            Intersection(1, "east", GeoPoint(100.0, 0.0)),
            Intersection(2, "west", GeoPoint(-100.0, 0.0)),
            Intersection(3, "north", GeoPoint(0.0, 100.0)),
            Intersection(4, "south", GeoPoint(0.0, -100.0)),
        ),
        segments=(
            Segment(0, 0, 1),
            Segment(1, 0, 2),
            Segment(2, 0, 3),
            Segment(3, 0, 4),
        ),
    )


coords = st.floats(min_value=-1000.0, max_value=1000.0, allow_nan=False)


def test_distance_three_four_five():
    assert distance(GeoPoint(0.0, 0.0), GeoPoint(3.0, 4.0)) == 5.0


@given(coords, coords, coords, coords)
def test_distance_is_symmetric(ax, ay, bx, by):
    a, b = GeoPoint(ax, ay), GeoPoint(bx, by)
    assert distance(a, b) == distance(b, a)
    assert distance(a, a) == 0.0


@given(coords, coords, coords, coords, coords, coords)
def test_distance_triangle_inequality(ax, ay, bx, by, cx, cy):
    a, b, c = GeoPoint(ax, ay), GeoPoint(bx, by), GeoPoint(cx, cy)
    assert distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9


def test_geopoint_rejects_non_finite():
    with pytest.raises(ValueError):
        GeoPoint(float("nan"), 0.0)
    with pytest.raises(ValueError):
        GeoPoint(0.0, float("inf"))


def test_nearest_intersection_exact_location():
    graph = cross_graph()
    assert nearest_intersection(graph, GeoPoint(100.0, 0.0)) == 1


def test_nearest_intersection_tie_breaks_to_lowest_id():
    graph = RoadGraph(
        intersections=(
            Intersection(3, "a", GeoPoint(-10.0, 0.0)),
            Intersection(7, "b", GeoPoint(10.0, 0.0)),
        ),
        segments=(),
    )
    # The origin is equidistant from both intersections.
    assert nearest_intersection(graph, GeoPoint(0.0, 0.0)) == 3


def test_nearest_intersection_empty_graph():
    graph = RoadGraph(intersections=(), segments=())
    with pytest.raises(EmptyGraphError):
        nearest_intersection(graph, GeoPoint(0.0, 0.0))


@given(coords, coords)
def test_nearest_intersection_matches_exhaustive_scan(x, y):
    graph = cross_graph()
    p = GeoPoint(x, y)
    best = min(graph.intersections, key=lambda i: (distance(i.point, p), i.id))
    assert nearest_intersection(graph, p) == best.id


def test_reverse_geocode_midway_picks_nearer_endpoint():
    graph = cross_graph()
    assert reverse_geocode(graph, GeoPoint(60.0, 1.0)) == "east"
    assert reverse_geocode(graph, GeoPoint(40.0, 1.0)) == "center"


def test_roads_at_counts_incident_segments():
    graph = cross_graph()
    assert roads_at(graph, 0) == {0, 1, 2, 3}
    assert roads_at(graph, 1) == {0}


def test_roads_at_unknown_intersection():
    with pytest.raises(UnknownIntersectionError):
        roads_at(cross_graph(), 99)


@given(st.sampled_from([0, 1, 2, 3, 4]))
def test_roads_at_matches_degree_scan(intersection_id):
    graph = cross_graph()
    expected = {s.id for s in graph.segments if intersection_id in (s.a, s.b)}
    assert roads_at(graph, intersection_id) == expected


def test_direction_of_picks_aligned_segment():
    graph = cross_graph()
    assert direction_of(graph, 0, GeoPoint(50.0, 1.0)) == 0
    assert direction_of(graph, 0, GeoPoint(-50.0, -1.0)) == 1
    assert direction_of(graph, 0, GeoPoint(1.0, 80.0)) == 2
    assert direction_of(graph, 0, GeoPoint(-1.0, -80.0)) == 3


def test_direction_of_at_intersection_point_is_lowest_segment_id():
    # Zero displacement scores every direction equally; the tie goes to the
    # lowest segment id.
    assert direction_of(cross_graph(), 0, GeoPoint(0.0, 0.0)) == 0


def test_direction_of_without_incident_segments():
    graph = RoadGraph(
        intersections=(Intersection(0, "lone", GeoPoint(0.0, 0.0)),),
        segments=(),
    )
    with pytest.raises(UnknownIntersectionError):
        direction_of(graph, 0, GeoPoint(1.0, 0.0))


@given(coords, coords)
def test_direction_of_matches_exhaustive_scan(x, y):
    graph = cross_graph()
    p = GeoPoint(x, y)
    center = graph.intersection(0).point
    best_id, best_score = None, -math.inf
    for seg in sorted(graph.segments, key=lambda s: s.id):
        if 0 not in (seg.a, seg.b):
            continue
        other = graph.intersection(seg.b if seg.a == 0 else seg.a).point
        ux, uy = other.x - center.x, other.y - center.y
        norm = math.hypot(ux, uy)
        score = (ux * (p.x - center.x) + uy * (p.y - center.y)) / norm
        if score > best_score:
            best_id, best_score = seg.id, score
    assert direction_of(graph, 0, p) == best_id


def test_intersection_lookup_by_label():
    graph = cross_graph()
    assert graph.by_label("east").id == 1
    assert graph.by_label("nowhere") is None
    assert graph.labels() == {"center", "east", "west", "north", "south"}


def test_intersection_lookup_by_unknown_id():
    with pytest.raises(UnknownIntersectionError):
        cross_graph().intersection(42)


def test_duplicate_intersection_id_rejected():
    with pytest.raises(RoadGraphError) as exc:
        RoadGraph(
            intersections=(
                Intersection(0, "a", GeoPoint(0.0, 0.0)),
                Intersection(0, "b", GeoPoint(1.0, 0.0)),
            ),
            segments=(),
        )
    assert "intersections[1].id" in str(exc.value)


def test_duplicate_label_rejected():
    with pytest.raises(RoadGraphError) as exc:
        RoadGraph(
            intersections=(
                Intersection(0, "same", GeoPoint(0.0, 0.0)),
                Intersection(1, "same", GeoPoint(1.0, 0.0)),
            ),
            segments=(),
        )
    assert "intersections[1].label" in str(exc.value)


def test_segment_with_unknown_endpoint_rejected():
    with pytest.raises(RoadGraphError) as exc:
        RoadGraph(
            intersections=(Intersection(0, "a", GeoPoint(0.0, 0.0)),),
            segments=(Segment(0, 0, 9),),
        )
    assert "segments[0]" in str(exc.value)


def test_self_loop_segment_rejected():
    with pytest.raises(RoadGraphError):
        RoadGraph(
            intersections=(Intersection(0, "a", GeoPoint(0.0, 0.0)),),
            segments=(Segment(0, 0, 0),),
        )


def test_bad_lane_count_and_speed_rejected():
    intersections = (
        Intersection(0, "a", GeoPoint(0.0, 0.0)),
        Intersection(1, "b", GeoPoint(1.0, 0.0)),
    )
    with pytest.raises(RoadGraphError):
        RoadGraph(intersections, (Segment(0, 0, 1, lanes=0),))
    with pytest.raises(RoadGraphError):
        RoadGraph(intersections, (Segment(0, 0, 1, speed_limit=0.0),))


def test_dict_round_trip():
    graph = cross_graph()
    doc = road_graph_to_dict(graph)
    again = road_graph_from_dict(doc)
    assert road_graph_to_dict(again) == doc
    assert again.labels() == graph.labels()


def test_from_dict_reports_field_paths():
    with pytest.raises(RoadGraphError) as exc:
        road_graph_from_dict({"intersections": [{"id": 0, "label": "a"}]})
    assert "intersections[0]" in str(exc.value)


def test_from_dict_segments_default_to_empty():
    graph = road_graph_from_dict(
        {"intersections": [{"id": 0, "label": "a", "x": 0.0, "y": 0.0}]}
    )
    assert graph.segments == ()


def test_load_road_graph_round_trip(tmp_path):
    path = tmp_path / "map.json"
    path.write_text(json.dumps(road_graph_to_dict(cross_graph())))
    graph = load_road_graph(path)
    assert graph.labels() == cross_graph().labels()


def test_load_road_graph_reports_location_on_bad_json(tmp_path):
    path = tmp_path / "map.json"
    path.write_text('{"intersections": [}')
    with pytest.raises(RoadGraphError) as exc:
        load_road_graph(path)
    assert str(path) in str(exc.value)
