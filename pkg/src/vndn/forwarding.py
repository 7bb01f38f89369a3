"""Per-node forwarding engine: faces, strategies, interest/data pipelines.

Broadcast forwarding re-emits the received packet verbatim. The link layer
recognizes rebroadcasts by a digest of the packet bytes, so a forwarder must
not alter them; per-hop metadata lives in the link-layer frame instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .geo import GeoPoint, RoadGraph, distance
from .names import Name
from .packets import Data, Interest, verify_data
from .tables import ContentStore, Pit, PitResult

LOCAL_APP = "local-app"
ADHOC_BROADCAST = "adhoc-broadcast"
INFRASTRUCTURE_LINK = "infrastructure-link"

CONTROLLED_FLOOD = "controlled-flood"
GREEDY_GEO = "greedy-geo"

DROP_DUPLICATE_NONCE = "duplicate-nonce"
DROP_INTEGRITY = "integrity"
DROP_PRODUCER_DELIVERED = "producer-delivered"
DROP_NO_ROUTE = "no-route"
DROP_GEO_SUPPRESSED = "geo-suppressed"


@dataclass(frozen=True)
class Face:
    id: int
    kind: str  # LOCAL_APP | ADHOC_BROADCAST | INFRASTRUCTURE_LINK


@dataclass(frozen=True)
class ReplyData:
    data: Data
    via: Face


@dataclass(frozen=True)
class DropPacket:
    reason: str


@dataclass(frozen=True)
class DeliverToApp:
    packet: Interest | Data
    face: Face


@dataclass(frozen=True)
class ForwardBroadcast:
    packet: Interest | Data


@dataclass(frozen=True)
class ForwardUnicast:
    packet: Interest | Data
    face: Face


@dataclass(frozen=True)
class CacheInsert:
    data: Data


Action = ReplyData | DropPacket | DeliverToApp | ForwardBroadcast | ForwardUnicast | CacheInsert


@dataclass
class ProducerBinding:
    """A local app that can answer interests under a prefix."""

    prefix: Name
    can_produce: Callable[[Interest, float], bool]


@dataclass
class NodeState:
    """Everything the forwarding pipeline needs about one node."""

    id: int
    faces: dict[int, Face]
    pit: Pit = field(default_factory=Pit)
    cs: ContentStore = field(default_factory=ContentStore)
    strategy: str = CONTROLLED_FLOOD
    fib: list[tuple[Name, int]] = field(default_factory=list)  # (prefix, face id)
    producers: list[ProducerBinding] = field(default_factory=list)
    position: GeoPoint | None = None

    def adhoc_face(self) -> Face | None:
        for face in self.faces.values():
            if face.kind == ADHOC_BROADCAST:
                return face
        return None


def geo_hint(name: Name, graph: RoadGraph) -> GeoPoint | None:
    """Location encoded in a name: the earliest component that is exactly an
    intersection label."""
    for comp in name.components:
        hit = graph.by_label(comp)
        if hit is not None:
            return hit.point
    return None


def _producer_match(state: NodeState, interest: Interest, now: float) -> bool:
    for binding in state.producers:
        if binding.prefix.is_prefix_of(interest.name) and binding.can_produce(interest, now):
            return True
    return False


def on_interest(
    state: NodeState,
    interest: Interest,
    arrival: Face,
    now: float,
    graph: RoadGraph,
    prev_hop_pos: GeoPoint | None = None,
) -> list[Action]:
    """Ordered interest pipeline: content store, nonce dedup, local producer,
    then record-and-forward per the active strategy."""
    state.pit.sweep(now)

    hit = state.cs.lookup(interest.name)
    if hit is not None:
        return [ReplyData(hit, arrival)]  # PIT untouched

    if state.pit.is_duplicate(interest.name, interest.nonce):
        return [DropPacket(DROP_DUPLICATE_NONCE)]

    if _producer_match(state, interest, now):
        # record so the produced Data can route back through the PIT
        state.pit.record(interest, arrival.id, now)
        return [DeliverToApp(interest, arrival)]

    state.pit.record(interest, arrival.id, now)

    actions: list[Action] = []
    adhoc = state.adhoc_face()
    if adhoc is not None:
        if state.strategy == GREEDY_GEO:
            hint = geo_hint(interest.name, graph)
            closer = (
                hint is None
                or prev_hop_pos is None
                or state.position is None
                or distance(state.position, hint) < distance(prev_hop_pos, hint)
            )
            if closer:
                actions.append(ForwardBroadcast(interest))
            else:
                actions.append(DropPacket(DROP_GEO_SUPPRESSED))
        else:
            actions.append(ForwardBroadcast(interest))

    for prefix, face_id in state.fib:
        face = state.faces.get(face_id)
        if face is None or face.kind != INFRASTRUCTURE_LINK or face_id == arrival.id:
            continue
        if prefix.is_prefix_of(interest.name):
            actions.append(ForwardUnicast(interest, face))

    if not any(isinstance(a, (ForwardBroadcast, ForwardUnicast)) for a in actions):
        if not any(isinstance(a, DropPacket) for a in actions):
            actions.append(DropPacket(DROP_NO_ROUTE))
    return actions


def on_data(state: NodeState, data: Data, arrival: Face, now: float) -> list[Action]:
    """Data pipeline: verify, always cache, then satisfy any matching PIT
    entries (exact name or entry-name-is-prefix) and consume them."""
    state.pit.sweep(now)

    if not verify_data(data):
        return [DropPacket(DROP_INTEGRITY)]

    actions: list[Action] = [CacheInsert(data)]

    matches = state.pit.match_data(data.name)
    if not matches:
        return actions  # cache-only; unsolicited data is never re-forwarded

    downstream: set[int] = set()
    for entry in matches:
        downstream |= entry.downstream_faces
        state.pit.consume(entry)

    broadcast_done = False
    for face_id in sorted(downstream):
        face = state.faces.get(face_id)
        if face is None:
            continue
        if face.kind == LOCAL_APP:
            actions.append(DeliverToApp(data, face))
        elif face.kind == ADHOC_BROADCAST:
            if not broadcast_done:
                actions.append(ForwardBroadcast(data))
                broadcast_done = True
        else:
            actions.append(ForwardUnicast(data, face))
    return actions
