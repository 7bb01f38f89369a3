"""Planar road geometry: intersections, segments, and location queries."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field


class EmptyGraphError(ValueError):
    """Raised by queries against a graph with no intersections."""


class UnknownIntersectionError(KeyError):
    """Raised when an intersection id is not in the graph."""


class RoadGraphError(ValueError):
    """Raised by the loader with a field-path message."""


@dataclass(frozen=True)
class GeoPoint:
    x: float  # meters
    y: float  # meters

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinates ({self.x}, {self.y})")


@dataclass(frozen=True)
class Intersection:
    id: int
    label: str
    point: GeoPoint


@dataclass(frozen=True)
class Segment:
    id: int
    a: int  # intersection id
    b: int  # intersection id
    lanes: int = 2
    speed_limit: float = 11.0  # m/s


def distance(a: GeoPoint, b: GeoPoint) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


@dataclass
class RoadGraph:
    """Immutable after construction; all queries are read-only."""

    intersections: tuple[Intersection, ...]
    segments: tuple[Segment, ...]
    _by_id: dict[int, Intersection] = field(init=False, repr=False)
    _by_label: dict[str, Intersection] = field(init=False, repr=False)
    _incident: dict[int, tuple[Segment, ...]] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        by_id: dict[int, Intersection] = {}
        by_label: dict[str, Intersection] = {}
        for i, node in enumerate(self.intersections):
            if node.id in by_id:
                raise RoadGraphError(f"intersections[{i}].id: duplicate id {node.id}")
            if node.label in by_label:
                raise RoadGraphError(f"intersections[{i}].label: duplicate label {node.label!r}")
            by_id[node.id] = node
            by_label[node.label] = node
        incident: dict[int, list[Segment]] = {nid: [] for nid in by_id}
        seen_seg: set[int] = set()
        for i, seg in enumerate(self.segments):
            if seg.id in seen_seg:
                raise RoadGraphError(f"segments[{i}].id: duplicate id {seg.id}")
            seen_seg.add(seg.id)
            for end in ("a", "b"):
                nid = getattr(seg, end)
                if nid not in by_id:
                    raise RoadGraphError(f"segments[{i}].{end}: unknown intersection {nid}")
            if seg.a == seg.b:
                raise RoadGraphError(f"segments[{i}]: endpoints must differ")
            if seg.lanes < 1:
                raise RoadGraphError(f"segments[{i}].lanes: must be >= 1")
            if seg.speed_limit <= 0:
                raise RoadGraphError(f"segments[{i}].speed_limit: must be > 0")
            incident[seg.a].append(seg)
            incident[seg.b].append(seg)
        self._by_id = by_id
        self._by_label = by_label
        self._incident = {nid: tuple(segs) for nid, segs in incident.items()}

    def intersection(self, iid: int) -> Intersection:
        try:
            return self._by_id[iid]
        except KeyError:
            raise UnknownIntersectionError(iid) from None

    def by_label(self, label: str) -> Intersection | None:
        return self._by_label.get(label)

    def labels(self) -> set[str]:
        return set(self._by_label)


def nearest_intersection(graph: RoadGraph, p: GeoPoint) -> int:
    """Id of the closest intersection; ties break toward the lowest id."""
    if not graph.intersections:
        raise EmptyGraphError("graph has no intersections")
    best = min(graph.intersections, key=lambda n: (distance(n.point, p), n.id))
    return best.id

def reverse_geocode(graph: RoadGraph, p: GeoPoint) -> str:
    return graph.intersection(nearest_intersection(graph, p)).label


def roads_at(graph: RoadGraph, iid: int) -> set[int]:
    """Direction ids stemming from an intersection (one per incident segment)."""
    graph.intersection(iid)
    return {seg.id for seg in graph._incident[iid]}


def direction_of(graph: RoadGraph, iid: int, p: GeoPoint) -> int:
    """Incident direction whose unit vector best aligns with (p - intersection).

    Ties (including p exactly at the intersection) break toward the lowest
    segment id.
    """
    node = graph.intersection(iid)
    segs = graph._incident[iid]
    if not segs:
        raise UnknownIntersectionError(f"intersection {iid} has no incident segments")
    dx, dy = p.x - node.point.x, p.y - node.point.y
    best_id = -1
    best_score = -math.inf
    for seg in sorted(segs, key=lambda s: s.id):
        other = graph.intersection(seg.b if seg.a == iid else seg.a).point
        ux, uy = other.x - node.point.x, other.y - node.point.y
        norm = math.hypot(ux, uy)
        score = (ux * dx + uy * dy) / norm
        if score > best_score:
            best_score = score
            best_id = seg.id
    return best_id


def _req(obj: dict, key: str, path: str):
    if key not in obj:
        raise RoadGraphError(f"{path}.{key}: missing")
    return obj[key]


def road_graph_from_dict(doc: dict) -> RoadGraph:
    if not isinstance(doc, dict):
        raise RoadGraphError("root: expected an object")
    raw_nodes = _req(doc, "intersections", "root")
    raw_segs = doc.get("segments", [])
    if not isinstance(raw_nodes, list) or not raw_nodes:
        raise RoadGraphError("intersections: expected a non-empty list")
    if not isinstance(raw_segs, list):
        raise RoadGraphError("segments: expected a list")
    nodes = []
    for i, item in enumerate(raw_nodes):
        path = f"intersections[{i}]"
        if not isinstance(item, dict):
            raise RoadGraphError(f"{path}: expected an object")
        try:
            point = GeoPoint(float(_req(item, "x", path)), float(_req(item, "y", path)))
        except (TypeError, ValueError) as exc:
            raise RoadGraphError(f"{path}: bad coordinates ({exc})") from None
        label = _req(item, "label", path)
        if not isinstance(label, str) or not label:
            raise RoadGraphError(f"{path}.label: expected a non-empty string")
        nodes.append(Intersection(int(_req(item, "id", path)), label, point))
    segs = []
    for i, item in enumerate(raw_segs):
        path = f"segments[{i}]"
        if not isinstance(item, dict):
            raise RoadGraphError(f"{path}: expected an object")
        segs.append(
            Segment(
                int(_req(item, "id", path)),
                int(_req(item, "a", path)),
                int(_req(item, "b", path)),
                int(item.get("lanes", 2)),
                float(item.get("speed_limit", 11.0)),
            )
        )
    return RoadGraph(tuple(nodes), tuple(segs))


def road_graph_to_dict(graph: RoadGraph) -> dict:
    return {
        "intersections": [
            {"id": n.id, "label": n.label, "x": n.point.x, "y": n.point.y}
            for n in graph.intersections
        ],
        "segments": [
            {"id": s.id, "a": s.a, "b": s.b, "lanes": s.lanes, "speed_limit": s.speed_limit}
            for s in graph.segments
        ],
    }


def load_road_graph(path: str) -> RoadGraph:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise RoadGraphError(f"{path}:{exc.lineno}: {exc.msg}") from None
    return road_graph_from_dict(doc)
