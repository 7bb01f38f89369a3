"""Node mobility: timestamped traces and closed loops with dwell stops."""

from __future__ import annotations

import bisect
import csv
from dataclasses import dataclass, field

from .geo import GeoPoint, distance


class OutOfTraceRangeError(ValueError):
    """Raised when a trace is queried outside its time span."""


class TraceFormatError(ValueError):
    """Raised by the CSV loader with a line-numbered message."""


@dataclass(frozen=True)
class StaticMobility:
    point: GeoPoint

    def position_at(self, t: float) -> GeoPoint:
        return self.point


@dataclass
class TraceMobility:
    """Timestamped waypoints with linear interpolation between them."""

    waypoints: list[tuple[float, GeoPoint]]

    def __post_init__(self) -> None:
        if not self.waypoints:
            raise ValueError("trace needs at least one waypoint")
        times = [t for t, _ in self.waypoints]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("trace timestamps must strictly increase")
        self._times = times

    def position_at(self, t: float) -> GeoPoint:
        times = self._times
        if t < times[0] or t > times[-1]:
            raise OutOfTraceRangeError(
                f"t={t} outside trace span [{times[0]}, {times[-1]}]"
            )
        i = bisect.bisect_right(times, t)
        if i >= len(times):
            return self.waypoints[-1][1]
        if i == 0:
            return self.waypoints[0][1]
        t0, p0 = self.waypoints[i - 1]
        t1, p1 = self.waypoints[i]
        frac = (t - t0) / (t1 - t0)
        return GeoPoint(p0.x + (p1.x - p0.x) * frac, p0.y + (p1.y - p0.y) * frac)


@dataclass
class LoopMobility:
    """Constant-speed travel around a closed polyline, with optional dwell
    stops; position wraps modulo the loop period."""

    polyline: list[GeoPoint]  # closed automatically if open
    speed_mps: float
    stops: list[tuple[float, float]] = field(default_factory=list)  # (distance m, dwell s)
    start_offset_m: float = 0.0

    def __post_init__(self) -> None:
        if self.speed_mps <= 0:
            raise ValueError("speed must be positive")
        points = list(self.polyline)
        if len(points) < 2:
            raise ValueError("loop needs at least two points")
        if points[0] != points[-1]:
            points.append(points[0])
        self._points = points
        self._cum = [0.0]
        for a, b in zip(points, points[1:]):
            self._cum.append(self._cum[-1] + distance(a, b))
        self.length_m = self._cum[-1]
        if self.length_m <= 0:
            raise ValueError("loop has zero length")
        self._stops = sorted(self.stops)
        for dist_m, dwell_s in self._stops:
            if not 0 <= dist_m < self.length_m:
                raise ValueError(f"stop at {dist_m} outside loop of {self.length_m}")
            if dwell_s < 0:
                raise ValueError("dwell must be non-negative")
        self.period_s = self.length_m / self.speed_mps + sum(d for _, d in self._stops)
        self._phase_s = self._time_to_reach(self.start_offset_m % self.length_m)

    def _time_to_reach(self, dist_m: float) -> float:
        # driving time plus every dwell completed strictly before dist_m
        return dist_m / self.speed_mps + sum(
            dwell for at, dwell in self._stops if at < dist_m
        )

    def _distance_at(self, tau: float) -> float:
        """Distance along the loop after tau seconds of one period."""
        elapsed = 0.0
        pos = 0.0
        for at, dwell in self._stops:
            drive = (at - pos) / self.speed_mps
            if tau <= elapsed + drive:
                return pos + (tau - elapsed) * self.speed_mps
            elapsed += drive
            pos = at
            if tau <= elapsed + dwell:
                return pos  # parked at the stop
            elapsed += dwell
        return pos + (tau - elapsed) * self.speed_mps

    def _point_at_distance(self, dist_m: float) -> GeoPoint:
        cum = self._cum
        i = bisect.bisect_right(cum, dist_m) - 1
        i = min(max(i, 0), len(self._points) - 2)
        seg_len = cum[i + 1] - cum[i]
        if seg_len <= 0:
            return self._points[i]
        frac = (dist_m - cum[i]) / seg_len
        a, b = self._points[i], self._points[i + 1]
        return GeoPoint(a.x + (b.x - a.x) * frac, a.y + (b.y - a.y) * frac)

    def position_at(self, t: float) -> GeoPoint:
        tau = (t + self._phase_s) % self.period_s
        return self._point_at_distance(min(self._distance_at(tau), self.length_m))


MobilityModel = StaticMobility | TraceMobility | LoopMobility


def position_at(model: MobilityModel, t: float) -> GeoPoint:
    return model.position_at(t)


def load_traces_csv(path: str) -> dict[int, TraceMobility]:
    """Load per-node traces from CSV columns time_s,node_id,x_m,y_m sorted by
    time."""
    per_node: dict[int, list[tuple[float, GeoPoint]]] = {}
    last_t = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["time_s", "node_id", "x_m", "y_m"]:
            raise TraceFormatError(f"{path}:1: expected header time_s,node_id,x_m,y_m")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise TraceFormatError(f"{path}:{lineno}: expected 4 columns")
            try:
                t, node_id = float(row[0]), int(row[1])
                point = GeoPoint(float(row[2]), float(row[3]))
            except ValueError as exc:
                raise TraceFormatError(f"{path}:{lineno}: {exc}") from None
            if last_t is not None and t < last_t:
                raise TraceFormatError(f"{path}:{lineno}: rows must be sorted by time")
            last_t = t
            per_node.setdefault(node_id, []).append((t, point))
    try:
        return {nid: TraceMobility(points) for nid, points in per_node.items()}
    except ValueError as exc:
        raise TraceFormatError(f"{path}: {exc}") from None
