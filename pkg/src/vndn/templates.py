"""Scenario generators for the bundled experiment families.

Each generator returns a fully-typed Scenario; unknown or out-of-range
parameters raise BadParamsError with the offending key.
"""

from __future__ import annotations

import math

from .apps import VERSION_NONE, VERSION_PER_ISSUE, VERSION_WINDOW
from .forwarding import CONTROLLED_FLOOD
from .geo import road_graph_from_dict
from .lal import LalConfig
from .rng import substream
from .scenario import (
    AppSpec,
    MobilitySpec,
    NodeSpec,
    RadioSpec,
    Scenario,
    ShutdownSpec,
)

TEMPLATES = ("static_grid", "platoon_loop", "double_clock", "producer_shutdown", "scale")


class BadParamsError(ValueError):
    """Unknown template, unknown parameter, or a value out of range."""


def _merge(defaults: dict, overrides: dict | None, template: str) -> dict:
    overrides = overrides or {}
    unknown = sorted(set(overrides) - set(defaults))
    if unknown:
        raise BadParamsError(f"{template}: unknown parameter {unknown[0]!r}")
    merged = dict(defaults)
    merged.update(overrides)
    return merged


def _grid_graph(cols: int, spacing: float, rows: int | None = None) -> dict:
    rows = cols if rows is None else rows
    intersections = []
    for j in range(rows):
        for i in range(cols):
            intersections.append(
                {"id": j * cols + i, "label": f"x{i}-y{j}", "x": i * spacing, "y": j * spacing}
            )
    segments = []
    sid = 0
    for j in range(rows):
        for i in range(cols):
            here = j * cols + i
            if i + 1 < cols:
                segments.append({"id": sid, "a": here, "b": here + 1})
                sid += 1
            if j + 1 < rows:
                segments.append({"id": sid, "a": here, "b": here + cols})
                sid += 1
    return {"intersections": intersections, "segments": segments}


def _static(x: float, y: float) -> MobilitySpec:
    return MobilitySpec("static", {"x": x, "y": y})


def _loop(polyline: list[tuple[float, float]], speed: float, offset: float) -> MobilitySpec:
    return MobilitySpec(
        "loop",
        {
            "polyline": [[x, y] for x, y in polyline],
            "speed_mps": speed,
            "start_offset_m": offset,
        },
    )


def _consumer(kind: str, targets: list[str], **kwargs) -> AppSpec:
    params = {"targets": targets}
    params.update(kwargs)
    return AppSpec(kind, params)


def _positive(params: dict, key: str, template: str) -> float:
    value = params[key]
    if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
        raise BadParamsError(f"{template}: {key} must be a positive number")
    return float(value)


def _count(params: dict, key: str, template: str, minimum: int = 1) -> int:
    value = params[key]
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise BadParamsError(f"{template}: {key} must be an integer >= {minimum}")
    return value


def _seed(params: dict, template: str) -> int:
    value = params["seed"]
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise BadParamsError(f"{template}: seed must be a non-negative integer")
    return value


# -- static_grid ----------------------------------------------------------------


def _static_grid(params: dict | None) -> Scenario:
    p = _merge(
        {
            "nodes": 15,
            "columns": 5,
            "spacing_m": 120.0,
            "range_m": 380.0,
            "loss_probability": 0.25,
            "interests": 200,
            "issue_period_s": 0.25,
            "start_s": 1.0,
            "seed": 0,
        },
        params,
        "static_grid",
    )
    n = _count(p, "nodes", "static_grid", minimum=2)
    spacing = _positive(p, "spacing_m", "static_grid")
    interests = _count(p, "interests", "static_grid")
    period = _positive(p, "issue_period_s", "static_grid")
    start = _positive(p, "start_s", "static_grid")
    seed = _seed(p, "static_grid")

    cols = math.ceil(math.sqrt(n)) if p["columns"] is None else _count(p, "columns", "static_grid")
    rows = math.ceil(n / cols)
    graph = _grid_graph(cols, spacing, rows)
    producer_idx = n - 1
    target = f"x{producer_idx % cols}-y{producer_idx // cols}"

    nodes = []
    for k in range(n):
        i, j = k % cols, k // cols
        apps: tuple[AppSpec, ...] = ()
        if k == 0:
            apps = (
                _consumer(
                    "traffic-consumer",
                    [f"/traffic/{target}"],
                    start_s=start,
                    issue_period_s=period,
                    max_issues=interests,
                    version_mode=VERSION_PER_ISSUE,
                ),
            )
        elif k == producer_idx:
            apps = (AppSpec("traffic-producer", {}),)
        nodes.append(NodeSpec(id=k, mobility=_static(i * spacing, j * spacing), apps=apps))

    range_m = _positive(p, "range_m", "static_grid")
    return Scenario(
        name="static-grid",
        duration_s=start + interests * period + 2.0,
        seed=seed,
        road_graph=road_graph_from_dict(graph),
        radio=RadioSpec(range_m, float(p["loss_probability"])),
        lal=LalConfig(radio_range_m=range_m),
        strategy=CONTROLLED_FLOOD,
        nodes=tuple(nodes),
    )


# -- platoon_loop -----------------------------------------------------------------


def _rectangle(w: float, h: float, x0: float = 0.0, y0: float = 0.0) -> list[tuple[float, float]]:
    return [(x0, y0), (x0 + w, y0), (x0 + w, y0 + h), (x0, y0 + h)]


def _platoon_loop(params: dict | None) -> Scenario:
    p = _merge(
        {
            "cars": 6,
            "speed_mps": 8.27,
            "range_m": 150.0,
            "loss_probability": 0.1,
            "duration_s": 120.0,
            "seed": 0,
        },
        params,
        "platoon_loop",
    )
    cars = _count(p, "cars", "platoon_loop", minimum=2)
    speed = _positive(p, "speed_mps", "platoon_loop")
    seed = _seed(p, "platoon_loop")
    w, h = 250.0, 163.5  # 827 m perimeter
    graph = {
        "intersections": [
            {"id": 0, "label": "south-west", "x": 0, "y": 0},
            {"id": 1, "label": "south-east", "x": w, "y": 0},
            {"id": 2, "label": "north-east", "x": w, "y": h},
            {"id": 3, "label": "north-west", "x": 0, "y": h},
        ],
        "segments": [
            {"id": 0, "a": 0, "b": 1},
            {"id": 1, "a": 1, "b": 2},
            {"id": 2, "a": 2, "b": 3},
            {"id": 3, "a": 3, "b": 0},
        ],
    }
    polyline = _rectangle(w, h)
    perimeter = 2 * (w + h)
    nodes = []
    for k in range(cars):
        apps: tuple[AppSpec, ...] = ()
        if k == 0:
            apps = (
                _consumer(
                    "traffic-consumer",
                    ["/traffic/north-east", "/traffic/south-west"],
                    start_s=5.0,
                    issue_period_s=2.0,
                    version_mode=VERSION_WINDOW,
                    version_window_s=20.0,
                ),
            )
        elif k == cars - 1:
            apps = (AppSpec("traffic-producer", {}),)
        nodes.append(
            NodeSpec(id=k, mobility=_loop(polyline, speed, k * perimeter / cars), apps=apps)
        )
    range_m = _positive(p, "range_m", "platoon_loop")
    return Scenario(
        name="platoon-loop",
        duration_s=_positive(p, "duration_s", "platoon_loop"),
        seed=seed,
        road_graph=road_graph_from_dict(graph),
        radio=RadioSpec(range_m, float(p["loss_probability"])),
        lal=LalConfig(radio_range_m=range_m),
        strategy=CONTROLLED_FLOOD,
        nodes=tuple(nodes),
    )


# -- double_clock -------------------------------------------------------------------


def _double_clock(params: dict | None) -> Scenario:
    p = _merge(
        {
            "range_m": 260.0,
            "loss_probability": 0.1,
            "duration_s": 300.0,
            "small_speed_mps": 9.2,
            "large_speed_mps": 10.9,
            "issue_period_s": 3.0,
            "version_window_s": 60.0,
            "seed": 0,
        },
        params,
        "double_clock",
    )
    seed = _seed(p, "double_clock")
    w1, h, w2 = 100.5, 313.0, 98.0
    a, b, c = (0.0, 0.0), (w1, 0.0), (w1 + w2, 0.0)
    d, e, f = (0.0, h), (w1, h), (w1 + w2, h)
    graph = {
        "intersections": [
            {"id": 0, "label": "west-south", "x": a[0], "y": a[1]},
            {"id": 1, "label": "mid-south", "x": b[0], "y": b[1]},
            {"id": 2, "label": "east-south", "x": c[0], "y": c[1]},
            {"id": 3, "label": "west-north", "x": d[0], "y": d[1]},
            {"id": 4, "label": "mid-north", "x": e[0], "y": e[1]},
            {"id": 5, "label": "east-north", "x": f[0], "y": f[1]},
        ],
        "segments": [
            {"id": 0, "a": 0, "b": 1},
            {"id": 1, "a": 1, "b": 2},
            {"id": 2, "a": 3, "b": 4},
            {"id": 3, "a": 4, "b": 5},
            {"id": 4, "a": 0, "b": 3},
            {"id": 5, "a": 1, "b": 4},
            {"id": 6, "a": 2, "b": 5},
        ],
    }
    # the inner block loop and the outer boundary loop overlap on the west,
    # north-west, and south-west roads: 514 m shared of the 1023 m outer loop
    small = [a, b, e, d]
    large = [a, d, e, f, c, b]
    small_speed = _positive(p, "small_speed_mps", "double_clock")
    large_speed = _positive(p, "large_speed_mps", "double_clock")
    period = _positive(p, "issue_period_s", "double_clock")
    window = _positive(p, "version_window_s", "double_clock")
    # each consumer polls conditions around the whole neighbourhood
    targets = [
        "/traffic/west-south",
        "/traffic/mid-south",
        "/traffic/east-south",
        "/traffic/west-north",
        "/traffic/mid-north",
        "/traffic/east-north",
    ]

    def consumer(start: float) -> AppSpec:
        return _consumer(
            "traffic-consumer",
            targets,
            start_s=start,
            issue_period_s=period,
            version_mode=VERSION_WINDOW,
            version_window_s=window,
        )

    # Speeds are staggered per car so loop mates drift past one another and
    # the caches actually change hands; the consumer on the outer loop starts
    # just behind the producer so the first window gets answered directly.
    # consumers start once the producer has toured every intersection
    nodes = [
        NodeSpec(id=0, mobility=_loop(small, small_speed, 0.0), apps=(consumer(100.0),)),
        NodeSpec(id=1, mobility=_loop(small, small_speed * 1.13, 827.0 / 3)),
        NodeSpec(id=2, mobility=_loop(small, small_speed * 1.26, 2 * 827.0 / 3)),
        NodeSpec(
            id=3,
            mobility=_loop(large, large_speed, 511.5),
            apps=(AppSpec("traffic-producer", {}),),
        ),
        NodeSpec(id=4, mobility=_loop(large, large_speed * 0.92, 767.25)),
        NodeSpec(id=5, mobility=_loop(large, large_speed * 1.10, 0.0)),
        NodeSpec(id=6, mobility=_loop(large, large_speed * 0.80, 255.75), apps=(consumer(102.0),)),
        NodeSpec(id=7, mobility=_loop(small, small_speed * 1.39, 413.5), apps=(consumer(104.0),)),
        NodeSpec(id=8, mobility=_loop(large, large_speed * 1.25, 700.0), apps=(consumer(106.0),)),
        # a second wave of empty-cache carriers thickens each cluster so cached
        # copies, not fresh floods, answer most repeat requests
        NodeSpec(id=9, mobility=_loop(small, small_speed * 1.13 * 1.05, 827.0 / 3 + 137.0)),
        NodeSpec(id=10, mobility=_loop(small, small_speed * 1.26 * 0.97, 2 * 827.0 / 3 + 281.0)),
        NodeSpec(id=11, mobility=_loop(small, small_speed * 1.13 * 1.21, 827.0 / 3 + 551.0)),
        NodeSpec(id=12, mobility=_loop(large, large_speed * 0.92 * 1.06, 767.25 + 170.0)),
        NodeSpec(id=13, mobility=_loop(large, large_speed * 1.10 * 0.89, 431.0)),
        NodeSpec(id=14, mobility=_loop(large, large_speed * 0.92 * 1.18, 767.25 + 852.0)),
    ]
    range_m = _positive(p, "range_m", "double_clock")
    return Scenario(
        name="double-clock",
        duration_s=_positive(p, "duration_s", "double_clock"),
        seed=seed,
        road_graph=road_graph_from_dict(graph),
        radio=RadioSpec(range_m, float(p["loss_probability"])),
        lal=LalConfig(radio_range_m=range_m),
        strategy=CONTROLLED_FLOOD,
        nodes=tuple(nodes),
    )


# -- producer_shutdown ------------------------------------------------------------------


def _producer_shutdown(params: dict | None) -> Scenario:
    p = _merge(
        {
            "range_m": 300.0,
            "loss_probability": 0.1,
            "first_ask_s": 2.0,
            "second_ask_s": 15.0,
            "seed": 0,
        },
        params,
        "producer_shutdown",
    )
    seed = _seed(p, "producer_shutdown")
    first = _positive(p, "first_ask_s", "producer_shutdown")
    second = _positive(p, "second_ask_s", "producer_shutdown")
    if second <= first:
        raise BadParamsError("producer_shutdown: second_ask_s must come after first_ask_s")
    graph = {
        "intersections": [{"id": 0, "label": "depot", "x": 0, "y": 0}],
        "segments": [],
    }

    def one_shot(start: float) -> AppSpec:
        return _consumer(
            "traffic-consumer",
            ["/traffic/depot"],
            start_s=start,
            issue_period_s=1.0,
            max_issues=1,
            version_mode=VERSION_NONE,
        )

    nodes = [
        NodeSpec(id=0, mobility=_static(10.0, 0.0), apps=(one_shot(first),)),
        NodeSpec(id=1, mobility=_static(0.0, 0.0), apps=(AppSpec("traffic-producer", {}),)),
        NodeSpec(id=2, mobility=_static(20.0, 0.0), apps=(one_shot(second),)),
        NodeSpec(id=3, mobility=_static(30.0, 0.0)),
        NodeSpec(id=4, mobility=_static(40.0, 0.0)),
    ]
    range_m = _positive(p, "range_m", "producer_shutdown")
    return Scenario(
        name="producer-shutdown",
        duration_s=second + 10.0,
        seed=seed,
        road_graph=road_graph_from_dict(graph),
        radio=RadioSpec(range_m, float(p["loss_probability"])),
        lal=LalConfig(radio_range_m=range_m),
        strategy=CONTROLLED_FLOOD,
        nodes=tuple(nodes),
        shutdowns=(ShutdownSpec(node=1, on_first_satisfy_of=0),),
    )


# -- scale ------------------------------------------------------------------------------


def _scale(params: dict | None) -> Scenario:
    p = _merge(
        {
            "cars": 60,
            "consumers": 1,
            "producer_fraction": 0.14,
            "range_m": 120.0,
            "loss_probability": 0.1,
            "duration_s": 60.0,
            "consumer_start_s": 24.0,
            "issue_period_s": 3.0,
            "version_window_s": 12.0,
            "spacing_m": 200.0,
            "seed": 0,
        },
        params,
        "scale",
    )
    cars = _count(p, "cars", "scale", minimum=3)
    consumers = _count(p, "consumers", "scale")
    fraction = float(p["producer_fraction"])
    if not 0 < fraction < 1:
        raise BadParamsError("scale: producer_fraction must be in (0, 1)")
    producers = round(fraction * cars)
    if producers < 1 or producers + consumers > cars:
        raise BadParamsError("scale: car count too small for producers plus consumers")
    seed = _seed(p, "scale")
    spacing = _positive(p, "spacing_m", "scale")
    start = _positive(p, "consumer_start_s", "scale")
    period = _positive(p, "issue_period_s", "scale")
    window = _positive(p, "version_window_s", "scale")

    side = 4
    graph = _grid_graph(side, spacing)
    targets = [
        "/traffic/x1-y1",
        "/traffic/x2-y1",
        "/traffic/x2-y2",
        "/traffic/x1-y2",
    ]
    rng = substream(seed, "gen", "scale")
    block_perimeter = 4 * spacing

    def block_polyline(bi: int, bj: int, reverse: bool) -> list[tuple[float, float]]:
        poly = _rectangle(spacing, spacing, bi * spacing, bj * spacing)
        return list(reversed(poly)) if reverse else poly

    nodes = []
    consumer_idx = 0
    for k in range(cars):
        if k < producers:
            bi, bj = 1, 1  # producers circle the central block past all targets
            speed = rng.uniform(9.0, 12.0)
        else:
            bi, bj = rng.randrange(3), rng.randrange(3)
            speed = rng.uniform(8.0, 12.0)
        reverse = rng.random() < 0.5
        offset = rng.uniform(0.0, block_perimeter)
        apps: tuple[AppSpec, ...] = ()
        if k < producers:
            apps = (AppSpec("traffic-producer", {}),)
        elif consumer_idx < consumers:
            apps = (
                _consumer(
                    "traffic-consumer",
                    targets,
                    start_s=start + 0.7 * consumer_idx,
                    issue_period_s=period,
                    version_mode=VERSION_WINDOW,
                    version_window_s=window,
                ),
            )
            consumer_idx += 1
        nodes.append(
            NodeSpec(id=k, mobility=_loop(block_polyline(bi, bj, reverse), speed, offset), apps=apps)
        )

    range_m = _positive(p, "range_m", "scale")
    return Scenario(
        name="scale",
        duration_s=_positive(p, "duration_s", "scale"),
        seed=seed,
        road_graph=road_graph_from_dict(graph),
        radio=RadioSpec(range_m, float(p["loss_probability"])),
        lal=LalConfig(radio_range_m=range_m),
        strategy=CONTROLLED_FLOOD,
        nodes=tuple(nodes),
    )


_GENERATORS = {
    "static_grid": _static_grid,
    "platoon_loop": _platoon_loop,
    "double_clock": _double_clock,
    "producer_shutdown": _producer_shutdown,
    "scale": _scale,
}


def gen_scenario(template: str, params: dict | None = None) -> Scenario:
    """Build one of the bundled scenario families."""
    try:
        generator = _GENERATORS[template]
    except KeyError:
        raise BadParamsError(
            f"unknown template {template!r}; choose from {', '.join(TEMPLATES)}"
        ) from None
    return generator(params)
