"""Deterministic discrete-event simulator tying radio, adaptation layer,
forwarding, and applications together.

Determinism contract: a scenario and seed fully determine the event log.
Ties in the event queue break by insertion order, radio loss draws come from
one named substream consumed in ascending receiver id, and every iteration
that can affect behavior runs in sorted order.
"""

from __future__ import annotations

import hashlib
import itertools
import heapq
import json
import random
from dataclasses import dataclass, field
from typing import Sequence

from .apps import IssueInterest, MarkSatisfied, PhotoProducerApp, TrafficProducerApp
from .forwarding import (
    ADHOC_BROADCAST,
    CacheInsert,
    DeliverToApp,
    DropPacket,
    DROP_PRODUCER_DELIVERED,
    Face,
    ForwardBroadcast,
    ForwardUnicast,
    INFRASTRUCTURE_LINK,
    LOCAL_APP,
    NodeState,
    ProducerBinding,
    ReplyData,
    on_data,
    on_interest,
)
from .geo import GeoPoint, distance, nearest_intersection
from .lal import (
    EpisodeSummary,
    KindCounters,
    LalFrame,
    LinkAdaptationLayer,
    TimerGiveUp,
    TimerTransmit,
    frame_encode,
    make_frame,
)
from .mobility import StaticMobility, position_at
from .packets import Data, Interest, decode_packet, encode_packet, packet_id
from .rng import substream
from .scenario import NodeSpec, Scenario, build_app, build_mobility
from .stats import Stats, Tally, finalize
from .tables import ContentStore, OversizedItemError, Pit

PROPAGATION_DELAY_S = 1e-6
BITRATE_BPS = 1_000_000
VISIT_RADIUS_M = 30.0  # a producer "visits" an intersection within this range
VISIT_SAMPLE_PERIOD_S = 1.0


@dataclass(frozen=True)
class RadioModel:
    range_m: float
    loss_probability: float = 0.0


def deliver_broadcast(
    radio: RadioModel,
    sender_id: int,
    sender_pos: GeoPoint,
    candidates: Sequence[tuple[int, GeoPoint]],
    rng: random.Random,
) -> tuple[list[int], int]:
    """Pick the receivers of one broadcast.

    Loss draws are consumed in ascending node id over the in-range candidates,
    so the outcome is a pure function of the rng state and the geometry.
    Returns (receiver ids, in-range count).
    """
    receivers: list[int] = []
    in_range = 0
    for node_id, pos in sorted(candidates):
        if node_id == sender_id:
            continue
        if distance(sender_pos, pos) <= radio.range_m:
            in_range += 1
            if rng.random() >= radio.loss_probability:
                receivers.append(node_id)
    return receivers, in_range


@dataclass
class _NodeRuntime:
    spec: NodeSpec
    state: NodeState
    mobility: object
    lal: LinkAdaptationLayer | None
    role: str
    app_rng: random.Random
    consumer_apps: list = field(default_factory=list)
    producer_apps: list = field(default_factory=list)
    link_peers: dict = field(default_factory=dict)  # face id -> (peer id, latency s)
    link_face_by_peer: dict = field(default_factory=dict)  # peer id -> face id
    alive: bool = True


@dataclass
class SimResult:
    stats: Stats
    records: list[dict]
    roles: dict[int, str]
    lal_episodes: list[tuple[int, EpisodeSummary]]
    lal_counters: dict[int, dict[str, KindCounters]]
    apps_summary: dict[int, dict[str, int]]
    _digest: str | None = None

    @property
    def digest(self) -> str:
        """Hex digest of the canonical event log, computed on first use."""
        if self._digest is None:
            self._digest = log_digest(self.records)
        return self._digest


def ndjson_lines(records: list[dict]) -> list[str]:
    return [json.dumps(r, sort_keys=True, separators=(",", ":")) for r in records]


def log_digest(records: list[dict]) -> str:
    payload = ("\n".join(ndjson_lines(records)) + "\n").encode() if records else b""
    return hashlib.sha256(payload).hexdigest()


def write_events(records: list[dict], path: str) -> None:
    with open(path, "w") as fh:
        for line in ndjson_lines(records):
            fh.write(line)
            fh.write("\n")


class Simulator:
    def __init__(self, scenario: Scenario):
        self.sc = scenario
        self.graph = scenario.road_graph
        self.radio = RadioModel(scenario.radio.range_m, scenario.radio.loss_probability)
        self.radio_rng = substream(scenario.seed, "radio")
        self.now = 0.0
        self.tx_seq = 0
        self._queue: list = []
        self._order = itertools.count()
        self.records: list[dict] = []
        self.tally = Tally()
        self._names: dict[int, tuple[str, str]] = {}  # packet id -> (kind, name)
        self._satisfy_triggers: dict[int, list[int]] = {}
        self.nodes: dict[int, _NodeRuntime] = {}
        self._build_nodes()
        self._adhoc_ids = tuple(
            node_id for node_id in sorted(self.nodes) if self.nodes[node_id].lal is not None
        )
        self._static_world = all(
            isinstance(self.nodes[node_id].mobility, StaticMobility)
            for node_id in self._adhoc_ids
        )
        self._candidate_cache: dict[int, tuple[list, int]] = {}
        self._schedule_initial()

    # -- construction ---------------------------------------------------------

    def _build_nodes(self) -> None:
        sc = self.sc
        latencies: dict[tuple[int, int], float] = {}
        for node in sc.nodes:
            for link in node.links:
                latencies[(node.id, link.peer)] = link.latency_s
        for (a, b), latency in list(latencies.items()):
            latencies.setdefault((b, a), latency)

        for spec in sc.nodes:
            faces: dict[int, Face] = {0: Face(0, LOCAL_APP)}
            if spec.adhoc:
                faces[1] = Face(1, ADHOC_BROADCAST)
            link_peers: dict[int, tuple[int, float]] = {}
            link_face_by_peer: dict[int, int] = {}
            next_face = 2
            peers = sorted(b for (a, b) in latencies if a == spec.id)
            for peer in peers:
                faces[next_face] = Face(next_face, INFRASTRUCTURE_LINK)
                link_peers[next_face] = (peer, latencies[(spec.id, peer)])
                link_face_by_peer[peer] = next_face
                next_face += 1

            mobility = build_mobility(spec.mobility, spec.id, sc.base_dir)
            position = position_at(mobility, 0.0)

            consumer_apps = []
            producer_apps = []
            for app_spec in spec.apps:
                app = build_app(app_spec, spec.id, sc.seed)
                if app_spec.kind.endswith("-consumer"):
                    consumer_apps.append(app)
                else:
                    producer_apps.append(app)

            fib = [
                (self._parse_prefix(entry.prefix), link_face_by_peer[entry.via_peer])
                for entry in spec.fib
            ]
            state = NodeState(
                id=spec.id,
                faces=faces,
                pit=Pit(),
                cs=ContentStore(spec.cs_capacity_bytes),
                strategy=sc.strategy,
                fib=fib,
                producers=[ProducerBinding(app.prefix, app.can_produce) for app in producer_apps],
                position=position,
            )
            lal = None
            if spec.adhoc:
                lal = LinkAdaptationLayer(
                    spec.id, sc.lal, self.graph, substream(sc.seed, "lal-jitter", spec.id)
                )
            role = "producer" if producer_apps else ("consumer" if consumer_apps else "mule")
            nrt = _NodeRuntime(
                spec=spec,
                state=state,
                mobility=mobility,
                lal=lal,
                role=role,
                app_rng=substream(sc.seed, "app", spec.id),
                consumer_apps=consumer_apps,
                producer_apps=producer_apps,
                link_peers=link_peers,
                link_face_by_peer=link_face_by_peer,
            )
            for app in producer_apps:
                if isinstance(app, PhotoProducerApp):
                    app.graph = self.graph
                    app.position_fn = lambda runtime=nrt: runtime.state.position
            self.nodes[spec.id] = nrt
        self.roles = {node_id: nrt.role for node_id, nrt in self.nodes.items()}

    @staticmethod
    def _parse_prefix(prefix: str):
        from .names import parse_name

        return parse_name(prefix)

    def _schedule_initial(self) -> None:
        duration = self.sc.duration_s
        for node_id in sorted(self.nodes):
            nrt = self.nodes[node_id]
            for app in nrt.consumer_apps:
                cfg = app.cfg
                step = 0
                t = cfg.start_s
                while t <= duration and (cfg.max_issues is None or step < cfg.max_issues):
                    self._at(t, self._app_step, nrt, app)
                    step += 1
                    t = cfg.start_s + step * cfg.issue_period_s
            if any(isinstance(app, TrafficProducerApp) for app in nrt.producer_apps):
                t = 0.0
                while t <= duration:
                    self._at(t, self._sample_visits, nrt)
                    t += VISIT_SAMPLE_PERIOD_S
        for shutdown in self.sc.shutdowns:
            if shutdown.at_s is not None:
                self._at(shutdown.at_s, self._shutdown_node, shutdown.node)
            else:
                self._satisfy_triggers.setdefault(
                    shutdown.on_first_satisfy_of, []
                ).append(shutdown.node)

    # -- primitives -------------------------------------------------------------

    def _at(self, t: float, fn, *args) -> None:
        heapq.heappush(self._queue, (t, next(self._order), fn, args))

    def _record(self, kind: str, node: int, pid: int | None, name: str | None, extra: dict) -> None:
        extra["role"] = self.roles[node]
        self.records.append(
            {"t": self.now, "node": node, "kind": kind, "packet_id": pid, "name": name, "extra": extra}
        )

    def _position_of(self, nrt: _NodeRuntime) -> GeoPoint:
        pos = position_at(nrt.mobility, min(self.now, self.sc.duration_s))
        nrt.state.position = pos
        return pos

    # -- application plumbing ----------------------------------------------------

    def _app_step(self, nrt: _NodeRuntime, app) -> None:
        if not nrt.alive:
            return
        self._position_of(nrt)
        self._run_app_commands(nrt, app, app.step(self.now), served_by=None, data_pid=None)

    def _reexpress(self, nrt: _NodeRuntime, app, cmd: IssueInterest) -> None:
        if not nrt.alive:
            return
        commands = app.on_reexpress(cmd.request_id, cmd.name, cmd.attempt, self.now)
        self._run_app_commands(nrt, app, commands, served_by=None, data_pid=None)

    def _run_app_commands(self, nrt, app, commands, served_by, data_pid) -> None:
        for cmd in commands:
            if isinstance(cmd, IssueInterest):
                self._issue(nrt, app, cmd)
            elif isinstance(cmd, MarkSatisfied):
                self.tally.satisfied += 1
                self.tally.response_times.append(cmd.response_time_s)
                self._record(
                    "app_satisfy",
                    nrt.spec.id,
                    data_pid,
                    cmd.name.render(),
                    {
                        "request": cmd.request_id,
                        "response_time_s": cmd.response_time_s,
                        "served_by": served_by,
                    },
                )
                for target in self._satisfy_triggers.pop(nrt.spec.id, []):
                    self._shutdown_node(target)

    def _issue(self, nrt: _NodeRuntime, app, cmd: IssueInterest) -> None:
        interest = Interest(cmd.name, nrt.app_rng.getrandbits(64), cmd.lifetime_ms)
        pid = packet_id(encode_packet(interest))
        self._names[pid] = ("interest", cmd.name.render())
        self.tally.app_interests_issued += 1
        self.tally.request_ids.add(cmd.request_id)
        self.tally.per_role[nrt.role].interests_received += 1
        self._record(
            "app_issue",
            nrt.spec.id,
            pid,
            cmd.name.render(),
            {"request": cmd.request_id, "attempt": cmd.attempt},
        )
        self._at(self.now + app.cfg.reexpress_timeout_s, self._reexpress, nrt, app, cmd)
        self._position_of(nrt)
        actions = on_interest(
            nrt.state, interest, nrt.state.faces[0], self.now, self.graph, None
        )
        self._apply_actions(nrt, actions, pid, cmd.name.render(), "interest", nrt.spec.id)

    def _sample_visits(self, nrt: _NodeRuntime) -> None:
        if not nrt.alive:
            return
        pos = self._position_of(nrt)
        iid = nearest_intersection(self.graph, pos)
        node = self.graph.intersection(iid)
        if distance(node.point, pos) <= VISIT_RADIUS_M:
            for app in nrt.producer_apps:
                if isinstance(app, TrafficProducerApp):
                    app.observe(node.label, self.now)

    # -- action execution ----------------------------------------------------------

    def _apply_actions(self, nrt, actions, pid, name, packet_kind, served_by,
                       rx_frame: LalFrame | None = None) -> None:
        role = nrt.role
        for action in actions:
            if isinstance(action, ReplyData):
                self.tally.per_role[role].cache_hits += 1
                self._record(
                    "cache_hit",
                    nrt.spec.id,
                    pid,
                    name,
                    {"data_name": action.data.name.render(), "via": action.via.kind},
                )
                if action.via.kind == LOCAL_APP:
                    self._deliver_to_consumers(nrt, action.data, nrt.spec.id)
                elif action.via.kind == ADHOC_BROADCAST:
                    self._enqueue_broadcast(nrt, action.data)
                else:
                    self._link_send(nrt, action.via, action.data)
            elif isinstance(action, DropPacket):
                if packet_kind == "interest":
                    self.tally.per_role[role].interest_drops += 1
                self._record(
                    "drop",
                    nrt.spec.id,
                    pid,
                    name,
                    {"layer": "ndn", "reason": action.reason, "kind_of_packet": packet_kind},
                )
            elif isinstance(action, DeliverToApp):
                if isinstance(action.packet, Interest):
                    self.tally.per_role[role].interest_drops += 1
                    self._record(
                        "drop",
                        nrt.spec.id,
                        pid,
                        name,
                        {
                            "layer": "ndn",
                            "reason": DROP_PRODUCER_DELIVERED,
                            "kind_of_packet": packet_kind,
                        },
                    )
                    self._produce(nrt, action.packet)
                else:
                    self._deliver_to_consumers(nrt, action.packet, served_by)
            elif isinstance(action, ForwardBroadcast):
                if packet_kind == "interest":
                    self.tally.per_role[role].interests_forwarded += 1
                self._record(
                    "pit_forward",
                    nrt.spec.id,
                    pid,
                    name,
                    {"medium": "adhoc", "kind_of_packet": packet_kind},
                )
                self._enqueue_broadcast(nrt, action.packet, rx_frame)
            elif isinstance(action, ForwardUnicast):
                if packet_kind == "interest":
                    self.tally.per_role[role].interests_forwarded += 1
                self._record(
                    "pit_forward",
                    nrt.spec.id,
                    pid,
                    name,
                    {"medium": "link", "kind_of_packet": packet_kind},
                )
                self._link_send(nrt, action.face, action.packet)
            elif isinstance(action, CacheInsert):
                try:
                    nrt.state.cs.insert(action.data)
                except OversizedItemError:
                    pass

    def _produce(self, nrt: _NodeRuntime, interest: Interest) -> None:
        for app in nrt.producer_apps:
            if app.can_produce(interest, self.now):
                for data in app.produce(interest, self.now):
                    self._publish(nrt, data)
                return

    def _publish(self, nrt: _NodeRuntime, data: Data) -> None:
        pid = packet_id(encode_packet(data))
        self._names.setdefault(pid, ("data", data.name.render()))
        actions = on_data(nrt.state, data, nrt.state.faces[0], self.now)
        self._apply_actions(nrt, actions, pid, data.name.render(), "data", nrt.spec.id)

    def _deliver_to_consumers(self, nrt: _NodeRuntime, data: Data, served_by) -> None:
        if not nrt.consumer_apps:
            return
        pid = packet_id(encode_packet(data))
        for app in nrt.consumer_apps:
            commands = app.on_data(data, self.now)
            self._run_app_commands(nrt, app, commands, served_by=served_by, data_pid=pid)

    # -- broadcast path ---------------------------------------------------------------

    def _enqueue_broadcast(self, nrt: _NodeRuntime, pkt: Interest | Data,
                           rx_frame: LalFrame | None = None) -> None:
        raw = encode_packet(pkt)
        pos = nrt.state.position
        if rx_frame is not None and rx_frame.inner == raw:
            # Relaying a packet exactly as received: contend against the distance to
            # the hop it arrived from, and remember that hop so its own retries are
            # not mistaken for forward progress.
            frame = rx_frame
        else:
            frame = make_frame(raw, nrt.spec.id, pos)
        self._names.setdefault(
            frame.packet_id,
            ("interest" if isinstance(pkt, Interest) else "data", pkt.name.render()),
        )
        pending = nrt.lal.schedule_forward(frame, pos, self.now)
        if pending is not None:
            self._at(
                pending.next_fire,
                self._lal_timer,
                nrt,
                frame.packet_id,
                pending.episode,
                pending.generation,
            )

    def _lal_timer(self, nrt: _NodeRuntime, pid: int, episode: int, generation: int) -> None:
        if not nrt.alive:
            return
        outcome = nrt.lal.on_timer(pid, episode, generation, self.now)
        if outcome is None:
            return
        pending = nrt.lal.pendings[pid]
        kind, name = self._names[pid]
        if isinstance(outcome, TimerGiveUp):
            self.tally.giveup_count += 1
            self._record(
                "giveup",
                nrt.spec.id,
                pid,
                name,
                {
                    "kind_of_packet": kind,
                    "episode": pending.episode,
                    "transmissions": pending.transmissions_done,
                },
            )
            return
        self._transmit(nrt, pid, outcome.frame, pending, kind, name)
        self._at(outcome.rearm_at, self._lal_timer, nrt, pid, pending.episode, pending.generation)

    def _transmit(self, nrt, pid, frame: LalFrame, pending, kind: str, name: str) -> None:
        pos = self._position_of(nrt)
        stamped = LalFrame(pid, nrt.spec.id, pos, frame.inner)
        raw = frame_encode(stamped)
        air_time = self.now + len(raw) * 8 / BITRATE_BPS

        cached = self._candidate_cache.get(nrt.spec.id) if self._static_world else None
        if cached is not None:
            candidates, off_count = cached
        else:
            candidates = []
            off_count = 0  # a switched-off radio counts as out of range
            t_pos = min(self.now, self.sc.duration_s)
            for node_id in self._adhoc_ids:
                other = self.nodes[node_id]
                if node_id == nrt.spec.id:
                    continue
                if not other.alive:
                    off_count += 1
                    continue
                candidates.append((node_id, position_at(other.mobility, t_pos)))
            if self._static_world:
                self._candidate_cache[nrt.spec.id] = (candidates, off_count)
        receivers, in_range = deliver_broadcast(
            self.radio, nrt.spec.id, pos, candidates, self.radio_rng
        )
        self.tx_seq += 1
        seq = self.tx_seq
        if kind == "interest":
            self.tally.adhoc_interest_tx += 1
        else:
            self.tally.adhoc_data_tx += 1
        self._record(
            "tx",
            nrt.spec.id,
            pid,
            name,
            {
                "kind_of_packet": kind,
                "medium": "adhoc",
                "episode": pending.episode,
                "transmission": pending.transmissions_done,
                "tx_seq": seq,
                "candidates": len(candidates) + off_count,
                "in_range": in_range,
                "received": len(receivers),
                "lost": in_range - len(receivers),
                "out_of_range": len(candidates) + off_count - in_range,
            },
        )
        decoded = decode_packet(stamped.inner)
        arrival = air_time + PROPAGATION_DELAY_S
        for receiver in receivers:
            self._at(arrival, self._receive_broadcast, receiver, stamped, decoded, kind, seq)

    def _receive_broadcast(self, receiver: int, frame: LalFrame, pkt, kind: str, seq: int) -> None:
        nrt = self.nodes[receiver]
        extra = {
            "from": frame.last_hop_node,
            "medium": "adhoc",
            "kind_of_packet": kind,
            "tx_seq": seq,
        }
        if not nrt.alive:
            extra["ignored"] = "node-off"
            self._record("rx", receiver, frame.packet_id, pkt.name.render(), extra)
            return
        self._record("rx", receiver, frame.packet_id, pkt.name.render(), extra)
        self._position_of(nrt)
        outcome = nrt.lal.on_overhear(
            frame, frame.last_hop_node, frame.last_hop_position, self.now
        )
        if outcome.became_done and outcome.zero_transmission:
            self.tally.zero_tx_ack_count += 1
            self._record(
                "drop",
                receiver,
                frame.packet_id,
                pkt.name.render(),
                {
                    "layer": "lal",
                    "reason": "zero-tx-ack",
                    "kind_of_packet": kind,
                    "episode": outcome.pending.episode,
                },
            )
        if isinstance(pkt, Interest):
            self.tally.per_role[nrt.role].interests_received += 1
            actions = on_interest(
                nrt.state,
                pkt,
                nrt.state.faces[1],
                self.now,
                self.graph,
                frame.last_hop_position,
            )
            self._apply_actions(
                nrt, actions, frame.packet_id, pkt.name.render(), "interest",
                frame.last_hop_node, rx_frame=frame,
            )
        else:
            actions = on_data(nrt.state, pkt, nrt.state.faces[1], self.now)
            self._apply_actions(
                nrt, actions, frame.packet_id, pkt.name.render(), "data",
                frame.last_hop_node, rx_frame=frame,
            )

    # -- infrastructure links -----------------------------------------------------------

    def _link_send(self, nrt: _NodeRuntime, face: Face, pkt: Interest | Data) -> None:
        peer, latency = nrt.link_peers[face.id]
        raw = encode_packet(pkt)
        pid = packet_id(raw)
        kind = "interest" if isinstance(pkt, Interest) else "data"
        self._names.setdefault(pid, (kind, pkt.name.render()))
        self.tx_seq += 1
        seq = self.tx_seq
        self._record(
            "tx",
            nrt.spec.id,
            pid,
            pkt.name.render(),
            {"kind_of_packet": kind, "medium": "link", "to": peer, "tx_seq": seq},
        )
        self._at(self.now + latency, self._link_receive, peer, pkt, pid, nrt.spec.id, kind, seq)

    def _link_receive(self, receiver: int, pkt, pid: int, sender: int, kind: str, seq: int) -> None:
        nrt = self.nodes[receiver]
        extra = {"from": sender, "medium": "link", "kind_of_packet": kind, "tx_seq": seq}
        if not nrt.alive:
            extra["ignored"] = "node-off"
            self._record("rx", receiver, pid, pkt.name.render(), extra)
            return
        self._record("rx", receiver, pid, pkt.name.render(), extra)
        self._position_of(nrt)
        face = nrt.state.faces[nrt.link_face_by_peer[sender]]
        if isinstance(pkt, Interest):
            self.tally.per_role[nrt.role].interests_received += 1
            actions = on_interest(nrt.state, pkt, face, self.now, self.graph, None)
            self._apply_actions(nrt, actions, pid, pkt.name.render(), "interest", sender)
        else:
            actions = on_data(nrt.state, pkt, face, self.now)
            self._apply_actions(nrt, actions, pid, pkt.name.render(), "data", sender)

    # -- lifecycle -----------------------------------------------------------------------

    def _shutdown_node(self, node_id: int) -> None:
        nrt = self.nodes[node_id]
        if not nrt.alive:
            return
        nrt.alive = False
        self._candidate_cache.clear()
        if nrt.lal is not None:
            nrt.lal.cancel_all()

    def run(self) -> SimResult:
        duration = self.sc.duration_s
        queue = self._queue
        while queue:
            t, _, fn, args = heapq.heappop(queue)
            if t > duration:
                break
            self.now = t
            fn(*args)

        episodes: list[tuple[int, EpisodeSummary]] = []
        counters: dict[int, dict[str, KindCounters]] = {}
        for node_id in sorted(self.nodes):
            nrt = self.nodes[node_id]
            if nrt.lal is None:
                continue
            nrt.lal.flush()
            counters[node_id] = nrt.lal.stats
            for summary in nrt.lal.episodes:
                episodes.append((node_id, summary))
                if summary.transmissions > 0 or summary.outcome == "zero-tx-ack":
                    self.tally.tx_histogram[summary.transmissions] += 1

        apps_summary: dict[int, dict[str, int]] = {}
        for node_id in sorted(self.nodes):
            nrt = self.nodes[node_id]
            if not nrt.consumer_apps:
                continue
            apps_summary[node_id] = {
                "requests": sum(a.requests_issued for a in nrt.consumer_apps),
                "satisfied": sum(a.satisfied for a in nrt.consumer_apps),
                "unsatisfied": sum(a.unsatisfied for a in nrt.consumer_apps),
            }

        return SimResult(
            stats=finalize(self.tally),
            records=self.records,
            roles=dict(self.roles),
            lal_episodes=episodes,
            lal_counters=counters,
            apps_summary=apps_summary,
        )


def run_scenario(scenario: Scenario, seed: int | None = None) -> SimResult:
    if seed is not None and seed != scenario.seed:
        import dataclasses

        scenario = dataclasses.replace(scenario, seed=seed)
    return Simulator(scenario).run()
