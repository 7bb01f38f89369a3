"""Scenario model: typed run configuration, JSON (de)serialization, and
validation that reports the offending field path."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from . import apps
from .apps import ConsumerSchedule, PhotoProducerApp, TrafficConsumerApp, TrafficProducerApp
from .apps import PhotoConsumerApp
from .forwarding import CONTROLLED_FLOOD, GREEDY_GEO
from .geo import GeoPoint, RoadGraph, RoadGraphError, load_road_graph, road_graph_from_dict
from .geo import road_graph_to_dict
from .lal import ACK_ALL_ROADS, ACK_ANY, LalConfig
from .mobility import LoopMobility, StaticMobility, TraceMobility, load_traces_csv
from .names import parse_name
from .tables import DEFAULT_CS_CAPACITY

STRATEGIES = (CONTROLLED_FLOOD, GREEDY_GEO)
APP_KINDS = ("traffic-consumer", "photo-consumer", "traffic-producer", "photo-producer")
MOBILITY_KINDS = ("static", "trace", "loop")


class ScenarioParseError(ValueError):
    """The scenario file is not valid JSON."""


class ScenarioValidationError(ValueError):
    """A scenario field is missing, mistyped, or out of range."""

    def __init__(self, path: str, reason: str):
        self.path = path
        self.reason = reason
        super().__init__(f"{path}: {reason}")


@dataclass(frozen=True)
class RadioSpec:
    range_m: float
    loss_probability: float = 0.0


@dataclass(frozen=True)
class LinkSpec:
    peer: int
    latency_s: float = 0.020


@dataclass(frozen=True)
class FibEntrySpec:
    prefix: str
    via_peer: int


@dataclass
class AppSpec:
    kind: str
    params: dict


@dataclass
class MobilitySpec:
    kind: str
    params: dict


@dataclass
class NodeSpec:
    id: int
    mobility: MobilitySpec
    adhoc: bool = True
    links: tuple[LinkSpec, ...] = ()
    fib: tuple[FibEntrySpec, ...] = ()
    apps: tuple[AppSpec, ...] = ()
    cs_capacity_bytes: int = DEFAULT_CS_CAPACITY


@dataclass
class ShutdownSpec:
    node: int
    at_s: float | None = None
    on_first_satisfy_of: int | None = None


@dataclass
class Scenario:
    name: str
    duration_s: float
    seed: int
    road_graph: RoadGraph
    radio: RadioSpec
    lal: LalConfig
    strategy: str = CONTROLLED_FLOOD
    nodes: tuple[NodeSpec, ...] = ()
    shutdowns: tuple[ShutdownSpec, ...] = ()
    base_dir: str = "."


# -- builders shared with the engine -------------------------------------------


def build_mobility(spec: MobilitySpec, node_id: int, base_dir: str):
    """Construct the mobility model a node spec describes."""
    p = spec.params
    if spec.kind == "static":
        return StaticMobility(GeoPoint(float(p["x"]), float(p["y"])))
    if spec.kind == "trace":
        if "path" in p:
            traces = load_traces_csv(os.path.join(base_dir, p["path"]))
            if node_id not in traces:
                raise ValueError(f"trace file has no rows for node {node_id}")
            return traces[node_id]
        waypoints = [(float(t), GeoPoint(float(x), float(y))) for t, x, y in p["waypoints"]]
        return TraceMobility(waypoints)
    if spec.kind == "loop":
        polyline = [GeoPoint(float(x), float(y)) for x, y in p["polyline"]]
        stops = [(float(d), float(s)) for d, s in p.get("stops", [])]
        return LoopMobility(
            polyline,
            float(p["speed_mps"]),
            stops=stops,
            start_offset_m=float(p.get("start_offset_m", 0.0)),
        )
    raise ValueError(f"unknown mobility kind {spec.kind!r}")


_CONSUMER_KEYS = {
    "targets", "start_s", "issue_period_s", "max_issues", "interest_lifetime_ms",
    "reexpress_timeout_s", "max_reexpress", "version_mode", "version_window_s",
}


def _consumer_schedule(params: dict) -> ConsumerSchedule:
    unknown = set(params) - _CONSUMER_KEYS
    if unknown:
        raise ValueError(f"unknown consumer params {sorted(unknown)}")
    targets = params.get("targets")
    if not isinstance(targets, (list, tuple)) or not targets:
        raise ValueError("targets must be a non-empty list of names")
    for target in targets:
        parse_name(str(target))  # raises on malformed names
    kwargs = {k: v for k, v in params.items() if k != "targets"}
    return ConsumerSchedule(targets=tuple(str(t) for t in targets), **kwargs)


def build_app(spec: AppSpec, node_id: int, scenario_seed: int):
    """Construct the application a node spec describes."""
    p = dict(spec.params)
    if spec.kind == "traffic-consumer":
        return TrafficConsumerApp(node_id, _consumer_schedule(p))
    if spec.kind == "photo-consumer":
        return PhotoConsumerApp(node_id, _consumer_schedule(p))
    if spec.kind == "traffic-producer":
        unknown = set(p) - {"freshness_window_s"}
        if unknown:
            raise ValueError(f"unknown producer params {sorted(unknown)}")
        return TrafficProducerApp(
            node_id, p.get("freshness_window_s", apps.DEFAULT_FRESHNESS_WINDOW_S)
        )
    if spec.kind == "photo-producer":
        unknown = set(p) - {"photo_size_bytes", "chunk_size"}
        if unknown:
            raise ValueError(f"unknown producer params {sorted(unknown)}")
        size = p.get("photo_size_bytes", (68000, 100000))
        if isinstance(size, (list, tuple)):
            size = (int(size[0]), int(size[1]))
        else:
            size = int(size)
        return PhotoProducerApp(
            node_id, scenario_seed, size, int(p.get("chunk_size", apps.DEFAULT_CHUNK_SIZE))
        )
    raise ValueError(f"unknown app kind {spec.kind!r}")


# -- validation -----------------------------------------------------------------


def _need(doc: dict, key: str, path: str):
    if key not in doc:
        raise ScenarioValidationError(f"{path}.{key}" if path else key, "missing")
    return doc[key]


def _num(value, path: str, *, minimum=None, maximum=None, positive=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioValidationError(path, f"expected a number, got {value!r}")
    value = float(value)
    if positive and value <= 0:
        raise ScenarioValidationError(path, "must be positive")
    if minimum is not None and value < minimum:
        raise ScenarioValidationError(path, f"must be >= {minimum}")
    if maximum is not None and value > maximum:
        raise ScenarioValidationError(path, f"must be <= {maximum}")
    return value


def _intval(value, path: str, *, minimum=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioValidationError(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ScenarioValidationError(path, f"must be >= {minimum}")
    return value


def _lal_from_doc(doc: dict, radio_range: float) -> LalConfig:
    known = {
        "t_rank_max_ms", "t_rand_max_ms", "retx_timeout_ms", "max_transmissions",
        "ack_policy", "intersection_radius_m",
    }
    unknown = set(doc) - known
    if unknown:
        raise ScenarioValidationError(f"lal.{sorted(unknown)[0]}", "unknown field")
    policy = doc.get("ack_policy", ACK_ANY)
    if policy not in (ACK_ANY, ACK_ALL_ROADS):
        raise ScenarioValidationError("lal.ack_policy", f"unknown policy {policy!r}")
    try:
        return LalConfig(
            radio_range_m=radio_range,
            t_rank_max_s=_num(doc.get("t_rank_max_ms", 20.0), "lal.t_rank_max_ms", positive=True) / 1000.0,
            t_rand_max_s=_num(doc.get("t_rand_max_ms", 5.0), "lal.t_rand_max_ms", minimum=0.0) / 1000.0,
            retx_timeout_s=_num(doc.get("retx_timeout_ms", 100.0), "lal.retx_timeout_ms", positive=True) / 1000.0,
            max_transmissions=_intval(doc.get("max_transmissions", 7), "lal.max_transmissions", minimum=1),
            ack_policy=policy,
            intersection_radius_m=_num(doc.get("intersection_radius_m", 25.0), "lal.intersection_radius_m", positive=True),
        )
    except ValueError as exc:
        if isinstance(exc, ScenarioValidationError):
            raise
        raise ScenarioValidationError("lal", str(exc)) from None


def _mobility_from_doc(doc, path: str, duration_s: float) -> MobilitySpec:
    if not isinstance(doc, dict):
        raise ScenarioValidationError(path, "expected an object")
    kind = _need(doc, "kind", path)
    if kind not in MOBILITY_KINDS:
        raise ScenarioValidationError(f"{path}.kind", f"unknown mobility {kind!r}")
    params = {k: v for k, v in doc.items() if k != "kind"}
    if kind == "static":
        _num(_need(params, "x", path), f"{path}.x")
        _num(_need(params, "y", path), f"{path}.y")
    elif kind == "trace":
        if "path" not in params and "waypoints" not in params:
            raise ScenarioValidationError(path, "trace needs waypoints or path")
        if "waypoints" in params:
            wps = params["waypoints"]
            if not isinstance(wps, list) or not wps:
                raise ScenarioValidationError(f"{path}.waypoints", "expected a non-empty list")
            for i, wp in enumerate(wps):
                if not isinstance(wp, list) or len(wp) != 3:
                    raise ScenarioValidationError(f"{path}.waypoints[{i}]", "expected [t, x, y]")
            if wps[0][0] > 0 or wps[-1][0] < duration_s:
                raise ScenarioValidationError(
                    f"{path}.waypoints", f"must cover [0, {duration_s}] seconds"
                )
    else:
        polyline = _need(params, "polyline", path)
        if not isinstance(polyline, list) or len(polyline) < 2:
            raise ScenarioValidationError(f"{path}.polyline", "need at least two points")
        _num(_need(params, "speed_mps", path), f"{path}.speed_mps", positive=True)
    return MobilitySpec(kind, params)


def _node_from_doc(doc, path: str, duration_s: float, seed: int, base_dir: str) -> NodeSpec:
    if not isinstance(doc, dict):
        raise ScenarioValidationError(path, "expected an object")
    known = {"id", "mobility", "adhoc", "links", "fib", "apps", "cs_capacity_bytes"}
    unknown = set(doc) - known
    if unknown:
        raise ScenarioValidationError(f"{path}.{sorted(unknown)[0]}", "unknown field")
    node_id = _intval(_need(doc, "id", path), f"{path}.id", minimum=0)
    mobility = _mobility_from_doc(_need(doc, "mobility", path), f"{path}.mobility", duration_s)
    try:
        build_mobility(mobility, node_id, base_dir)
    except ScenarioValidationError:
        raise
    except Exception as exc:
        raise ScenarioValidationError(f"{path}.mobility", str(exc)) from None

    adhoc = doc.get("adhoc", True)
    if not isinstance(adhoc, bool):
        raise ScenarioValidationError(f"{path}.adhoc", "expected true or false")

    links = []
    for i, entry in enumerate(doc.get("links", [])):
        lpath = f"{path}.links[{i}]"
        if not isinstance(entry, dict):
            raise ScenarioValidationError(lpath, "expected an object")
        peer = _intval(_need(entry, "peer", lpath), f"{lpath}.peer", minimum=0)
        latency = _num(entry.get("latency_ms", 20.0), f"{lpath}.latency_ms", positive=True)
        links.append(LinkSpec(peer, latency / 1000.0))

    fib = []
    for i, entry in enumerate(doc.get("fib", [])):
        fpath = f"{path}.fib[{i}]"
        if not isinstance(entry, dict):
            raise ScenarioValidationError(fpath, "expected an object")
        prefix = _need(entry, "prefix", fpath)
        try:
            parse_name(str(prefix))
        except ValueError as exc:
            raise ScenarioValidationError(f"{fpath}.prefix", str(exc)) from None
        fib.append(FibEntrySpec(str(prefix), _intval(_need(entry, "via_peer", fpath), f"{fpath}.via_peer", minimum=0)))

    app_specs = []
    for i, entry in enumerate(doc.get("apps", [])):
        apath = f"{path}.apps[{i}]"
        if not isinstance(entry, dict):
            raise ScenarioValidationError(apath, "expected an object")
        kind = _need(entry, "kind", apath)
        if kind not in APP_KINDS:
            raise ScenarioValidationError(f"{apath}.kind", f"unknown app {kind!r}")
        spec = AppSpec(kind, {k: v for k, v in entry.items() if k != "kind"})
        try:
            build_app(spec, node_id, seed)
        except ValueError as exc:
            raise ScenarioValidationError(apath, str(exc)) from None
        app_specs.append(spec)

    capacity = doc.get("cs_capacity_bytes", DEFAULT_CS_CAPACITY)
    return NodeSpec(
        id=node_id,
        mobility=mobility,
        adhoc=adhoc,
        links=tuple(links),
        fib=tuple(fib),
        apps=tuple(app_specs),
        cs_capacity_bytes=_intval(capacity, f"{path}.cs_capacity_bytes", minimum=0),
    )


def scenario_from_dict(doc: dict, base_dir: str = ".") -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioValidationError("$", "scenario must be a JSON object")
    name = doc.get("name", "scenario")
    if not isinstance(name, str) or not name:
        raise ScenarioValidationError("name", "expected a non-empty string")
    duration_s = _num(_need(doc, "duration_s", ""), "duration_s", positive=True)
    seed = _intval(doc.get("seed", 0), "seed", minimum=0)

    strategy = doc.get("strategy", CONTROLLED_FLOOD)
    if strategy not in STRATEGIES:
        raise ScenarioValidationError("strategy", f"unknown strategy {strategy!r}")

    radio_doc = _need(doc, "radio", "")
    if not isinstance(radio_doc, dict):
        raise ScenarioValidationError("radio", "expected an object")
    radio = RadioSpec(
        range_m=_num(_need(radio_doc, "range_m", "radio"), "radio.range_m", positive=True),
        loss_probability=_num(
            radio_doc.get("loss_probability", 0.0),
            "radio.loss_probability", minimum=0.0, maximum=1.0,
        ),
    )

    lal_doc = doc.get("lal", {})
    if not isinstance(lal_doc, dict):
        raise ScenarioValidationError("lal", "expected an object")
    lal_cfg = _lal_from_doc(lal_doc, radio.range_m)

    graph_doc = _need(doc, "road_graph", "")
    try:
        if isinstance(graph_doc, str):
            graph = load_road_graph(os.path.join(base_dir, graph_doc))
        else:
            graph = road_graph_from_dict(graph_doc)
    except (RoadGraphError, OSError) as exc:
        raise ScenarioValidationError("road_graph", str(exc)) from None

    nodes_doc = _need(doc, "nodes", "")
    if not isinstance(nodes_doc, list) or not nodes_doc:
        raise ScenarioValidationError("nodes", "expected a non-empty list")
    nodes = tuple(
        _node_from_doc(entry, f"nodes[{i}]", duration_s, seed, base_dir)
        for i, entry in enumerate(nodes_doc)
    )
    ids = [n.id for n in nodes]
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})[0]
        raise ScenarioValidationError("nodes", f"duplicate node id {dup}")
    id_set = set(ids)

    linked_pairs = set()
    for i, node in enumerate(nodes):
        for j, link in enumerate(node.links):
            lpath = f"nodes[{i}].links[{j}].peer"
            if link.peer not in id_set:
                raise ScenarioValidationError(lpath, f"unknown node {link.peer}")
            if link.peer == node.id:
                raise ScenarioValidationError(lpath, "node cannot link to itself")
            linked_pairs.add((node.id, link.peer))
            linked_pairs.add((link.peer, node.id))
    for i, node in enumerate(nodes):
        for j, entry in enumerate(node.fib):
            if (node.id, entry.via_peer) not in linked_pairs:
                raise ScenarioValidationError(
                    f"nodes[{i}].fib[{j}].via_peer",
                    f"no link between {node.id} and {entry.via_peer}",
                )

    shutdowns = []
    consumer_hosts = {
        n.id for n in nodes if any(a.kind.endswith("-consumer") for a in n.apps)
    }
    for i, entry in enumerate(doc.get("shutdowns", [])):
        spath = f"shutdowns[{i}]"
        if not isinstance(entry, dict):
            raise ScenarioValidationError(spath, "expected an object")
        target = _intval(_need(entry, "node", spath), f"{spath}.node", minimum=0)
        if target not in id_set:
            raise ScenarioValidationError(f"{spath}.node", f"unknown node {target}")
        has_at = "at_s" in entry
        has_trigger = "on_first_satisfy_of" in entry
        if has_at == has_trigger:
            raise ScenarioValidationError(
                spath, "need exactly one of at_s or on_first_satisfy_of"
            )
        if has_at:
            shutdowns.append(
                ShutdownSpec(target, at_s=_num(entry["at_s"], f"{spath}.at_s", minimum=0.0))
            )
        else:
            trigger = _intval(entry["on_first_satisfy_of"], f"{spath}.on_first_satisfy_of", minimum=0)
            if trigger not in consumer_hosts:
                raise ScenarioValidationError(
                    f"{spath}.on_first_satisfy_of", f"node {trigger} hosts no consumer app"
                )
            shutdowns.append(ShutdownSpec(target, on_first_satisfy_of=trigger))

    return Scenario(
        name=name,
        duration_s=duration_s,
        seed=seed,
        road_graph=graph,
        radio=radio,
        lal=lal_cfg,
        strategy=strategy,
        nodes=nodes,
        shutdowns=tuple(shutdowns),
        base_dir=base_dir,
    )


def load_scenario(path: str) -> Scenario:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}: {exc}") from None
    return scenario_from_dict(doc, base_dir=os.path.dirname(os.path.abspath(path)))


# -- serialization ---------------------------------------------------------------


def scenario_to_dict(sc: Scenario) -> dict:
    lal = sc.lal
    doc: dict = {
        "name": sc.name,
        "duration_s": sc.duration_s,
        "seed": sc.seed,
        "strategy": sc.strategy,
        "radio": {"range_m": sc.radio.range_m, "loss_probability": sc.radio.loss_probability},
        "lal": {
            "t_rank_max_ms": lal.t_rank_max_s * 1000.0,
            "t_rand_max_ms": lal.t_rand_max_s * 1000.0,
            "retx_timeout_ms": lal.retx_timeout_s * 1000.0,
            "max_transmissions": lal.max_transmissions,
            "ack_policy": lal.ack_policy,
            "intersection_radius_m": lal.intersection_radius_m,
        },
        "road_graph": road_graph_to_dict(sc.road_graph),
        "nodes": [],
    }
    for node in sc.nodes:
        entry: dict = {
            "id": node.id,
            "mobility": {"kind": node.mobility.kind, **node.mobility.params},
            "adhoc": node.adhoc,
        }
        if node.links:
            entry["links"] = [
                {"peer": l.peer, "latency_ms": l.latency_s * 1000.0} for l in node.links
            ]
        if node.fib:
            entry["fib"] = [{"prefix": f.prefix, "via_peer": f.via_peer} for f in node.fib]
        if node.apps:
            entry["apps"] = [{"kind": a.kind, **a.params} for a in node.apps]
        if node.cs_capacity_bytes != DEFAULT_CS_CAPACITY:
            entry["cs_capacity_bytes"] = node.cs_capacity_bytes
        doc["nodes"].append(entry)
    if sc.shutdowns:
        doc["shutdowns"] = []
        for s in sc.shutdowns:
            entry = {"node": s.node}
            if s.at_s is not None:
                entry["at_s"] = s.at_s
            else:
                entry["on_first_satisfy_of"] = s.on_first_satisfy_of
            doc["shutdowns"].append(entry)
    return doc


def save_scenario(sc: Scenario, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(sc), fh, indent=2)
        fh.write("\n")
