"""Link adaptation layer for broadcast wireless.

Sits between the forwarding engine and the radio. Outgoing packets wait on two
timers (a distance-rank delay that favors the receiver farthest from the last
hop, plus a small random jitter) and are retransmitted until an implicit
acknowledgment is overheard or the attempt budget runs out. Overhearing the
same packet bytes rebroadcast by a third node counts as the acknowledgment;
a pending can therefore complete without ever being transmitted.
"""

from __future__ import annotations

import enum
import random
import struct
from dataclasses import dataclass, field

from .geo import GeoPoint, RoadGraph, distance, nearest_intersection, roads_at, direction_of
from .packets import BadKindError, KIND_DATA, KIND_INTEREST, TruncatedError, packet_id

FRAME_HEADER = struct.Struct(">QQddI")  # packet_id, last_hop_node, x, y, inner length


@dataclass(frozen=True)
class LalFrame:
    """Broadcast frame: per-hop metadata around untouched packet bytes."""

    packet_id: int  # digest of inner, see packets.packet_id
    last_hop_node: int
    last_hop_position: GeoPoint
    inner: bytes

    def packet_kind(self) -> str:
        return "interest" if self.inner[0] == KIND_INTEREST else "data"


def make_frame(inner: bytes, last_hop_node: int, last_hop_position: GeoPoint) -> LalFrame:
    return LalFrame(packet_id(inner), last_hop_node, last_hop_position, inner)


def frame_encode(frame: LalFrame) -> bytes:
    return (
        FRAME_HEADER.pack(
            frame.packet_id,
            frame.last_hop_node,
            frame.last_hop_position.x,
            frame.last_hop_position.y,
            len(frame.inner),
        )
        + frame.inner
    )


def frame_decode(raw: bytes) -> LalFrame:
    if len(raw) < FRAME_HEADER.size:
        raise TruncatedError(f"frame header needs {FRAME_HEADER.size} bytes, got {len(raw)}")
    pid, node, x, y, inner_len = FRAME_HEADER.unpack_from(raw)
    inner = raw[FRAME_HEADER.size : FRAME_HEADER.size + inner_len]
    if len(inner) != inner_len:
        raise TruncatedError(f"inner needs {inner_len} bytes, got {len(inner)}")
    if not inner or inner[0] not in (KIND_INTEREST, KIND_DATA):
        raise BadKindError("inner bytes do not start with a packet kind")
    return LalFrame(pid, node, GeoPoint(x, y), inner)


ACK_ANY = "any"
ACK_ALL_ROADS = "all-roads-at-intersection"


@dataclass(frozen=True)
class LalConfig:
    radio_range_m: float = 300.0
    t_rank_max_s: float = 0.020
    t_rand_max_s: float = 0.005  # 0 disables jitter
    retx_timeout_s: float = 0.100
    max_transmissions: int = 7  # total attempts, initial included
    ack_policy: str = ACK_ANY
    intersection_radius_m: float = 25.0  # all-roads applies within this radius

    def __post_init__(self) -> None:
        if self.radio_range_m <= 0 or self.t_rank_max_s <= 0 or self.retx_timeout_s <= 0:
            raise ValueError("range, rank delay, and retx timeout must be positive")
        if self.t_rand_max_s < 0:
            raise ValueError("jitter bound must be non-negative")
        if self.max_transmissions < 1:
            raise ValueError("need at least one transmission attempt")
        if self.ack_policy not in (ACK_ANY, ACK_ALL_ROADS):
            raise ValueError(f"unknown ack policy {self.ack_policy!r}")


def rank_delay(dist_m: float, cfg: LalConfig) -> float:
    """Contention delay decreasing linearly with distance from the last hop;
    distances at or beyond radio range wait zero."""
    capped = min(max(dist_m, 0.0), cfg.radio_range_m)
    return cfg.t_rank_max_s * (1.0 - capped / cfg.radio_range_m)


class PendingState(enum.Enum):
    SCHEDULED = "scheduled"
    AWAITING_ACK = "awaiting-ack"
    DONE = "done"
    GAVE_UP = "gave-up"


class OverhearResult(enum.Enum):
    IGNORED = "ignored"
    PARTIAL_ACK = "partial-ack"
    FULL_ACK_CANCELLED = "full-ack-cancelled"


@dataclass
class OverhearOutcome:
    result: OverhearResult
    became_done: bool = False
    zero_transmission: bool = False
    pending: "PendingTransmission | None" = None


@dataclass
class TimerTransmit:
    frame: LalFrame
    rearm_at: float


class TimerGiveUp:
    pass


@dataclass
class PendingTransmission:
    """One forwarding episode of one packet at one node."""

    frame: LalFrame  # as received; the upstream node is frame.last_hop_node
    packet_kind: str
    transmissions_done: int = 0
    next_fire: float = 0.0
    required_directions: frozenset[int] | None = None  # None = any ack suffices
    acked_directions: set[int] = field(default_factory=set)
    state: PendingState = PendingState.SCHEDULED
    episode: int = 1
    generation: int = 0  # bumps on every (re)arm and cancel; stale timers no-op
    anchor_intersection: int | None = None


@dataclass(frozen=True)
class EpisodeSummary:
    packet_id: int
    episode: int
    packet_kind: str
    transmissions: int
    outcome: str  # acked | zero-tx-ack | giveup | unresolved


@dataclass
class KindCounters:
    transmissions: int = 0
    zero_tx_acks: int = 0
    give_ups: int = 0
    acks_received: int = 0


class LinkAdaptationLayer:
    """Pending-transmission scheduler for one node's broadcast face."""

    def __init__(
        self,
        node_id: int,
        cfg: LalConfig,
        graph: RoadGraph | None = None,
        rng: random.Random | None = None,
    ):
        self.node_id = node_id
        self.cfg = cfg
        self.graph = graph
        self.rng = rng or random.Random(0)
        self.pendings: dict[int, PendingTransmission] = {}
        self.stats: dict[str, KindCounters] = {
            "interest": KindCounters(),
            "data": KindCounters(),
        }
        self.episodes: list[EpisodeSummary] = []

    # -- scheduling ---------------------------------------------------------

    def _required_directions(
        self, self_pos: GeoPoint
    ) -> tuple[frozenset[int] | None, int | None]:
        if self.cfg.ack_policy != ACK_ALL_ROADS or self.graph is None:
            return None, None
        iid = nearest_intersection(self.graph, self_pos)
        node = self.graph.intersection(iid)
        if distance(node.point, self_pos) > self.cfg.intersection_radius_m:
            return None, None  # away from intersections the policy degrades to any
        required = roads_at(self.graph, iid)
        if not required:
            return None, None
        return frozenset(required), iid

    def schedule_forward(
        self, frame: LalFrame, self_pos: GeoPoint, now: float
    ) -> PendingTransmission | None:
        """Queue packet bytes for contention-delayed broadcast.

        Returns the pending whose timer the caller must arm, or None when an
        active pending for the same bytes absorbs the request. A terminal
        pending is re-armed as a fresh episode with a fresh budget.
        """
        pid = frame.packet_id
        pending = self.pendings.get(pid)
        if pending is not None and pending.state in (
            PendingState.SCHEDULED,
            PendingState.AWAITING_ACK,
        ):
            return None
        delay = rank_delay(distance(frame.last_hop_position, self_pos), self.cfg)
        if self.cfg.t_rand_max_s > 0:
            delay += self.rng.uniform(0.0, self.cfg.t_rand_max_s)
        required, anchor = self._required_directions(self_pos)
        if pending is None:
            pending = PendingTransmission(
                frame=frame,
                packet_kind=frame.packet_kind(),
                next_fire=now + delay,
                required_directions=required,
                anchor_intersection=anchor,
            )
            self.pendings[pid] = pending
        else:
            pending.frame = frame
            pending.packet_kind = frame.packet_kind()
            pending.transmissions_done = 0
            pending.next_fire = now + delay
            pending.required_directions = required
            pending.acked_directions = set()
            pending.state = PendingState.SCHEDULED
            pending.episode += 1
            pending.generation += 1
            pending.anchor_intersection = anchor
        return pending

    # -- acknowledgment -----------------------------------------------------

    def on_overhear(
        self, frame: LalFrame, heard_from: int, heard_pos: GeoPoint, now: float
    ) -> OverhearOutcome:
        """Account an overheard frame against a pending with the same bytes."""
        pending = self.pendings.get(frame.packet_id)
        if pending is None or pending.state in (PendingState.DONE, PendingState.GAVE_UP):
            return OverhearOutcome(OverhearResult.IGNORED)
        if heard_from == self.node_id or heard_from == pending.frame.last_hop_node:
            # a retry by the original sender is not forward progress
            return OverhearOutcome(OverhearResult.IGNORED, pending=pending)
        counters = self.stats[pending.packet_kind]
        if pending.required_directions is not None:
            assert pending.anchor_intersection is not None
            direction = direction_of(self.graph, pending.anchor_intersection, heard_pos)
            pending.acked_directions.add(direction)
            counters.acks_received += 1
            if not pending.required_directions <= pending.acked_directions:
                return OverhearOutcome(OverhearResult.PARTIAL_ACK, pending=pending)
        else:
            counters.acks_received += 1
        zero_tx = pending.transmissions_done == 0
        pending.state = PendingState.DONE
        pending.generation += 1  # cancels any armed timer
        if zero_tx:
            counters.zero_tx_acks += 1
        self.episodes.append(
            EpisodeSummary(
                frame.packet_id,
                pending.episode,
                pending.packet_kind,
                pending.transmissions_done,
                "zero-tx-ack" if zero_tx else "acked",
            )
        )
        return OverhearOutcome(
            OverhearResult.FULL_ACK_CANCELLED,
            became_done=True,
            zero_transmission=zero_tx,
            pending=pending,
        )

    # -- timers -------------------------------------------------------------

    def on_timer(
        self, pid: int, episode: int, generation: int, now: float
    ) -> TimerTransmit | TimerGiveUp | None:
        """Fire a pending's timer; None means the timer was stale."""
        pending = self.pendings.get(pid)
        if (
            pending is None
            or pending.episode != episode
            or pending.generation != generation
            or pending.state not in (PendingState.SCHEDULED, PendingState.AWAITING_ACK)
        ):
            return None
        if pending.transmissions_done < self.cfg.max_transmissions:
            pending.transmissions_done += 1
            pending.state = PendingState.AWAITING_ACK
            pending.generation += 1
            pending.next_fire = now + self.cfg.retx_timeout_s
            self.stats[pending.packet_kind].transmissions += 1
            return TimerTransmit(frame=pending.frame, rearm_at=pending.next_fire)
        pending.state = PendingState.GAVE_UP
        pending.generation += 1
        self.stats[pending.packet_kind].give_ups += 1
        self.episodes.append(
            EpisodeSummary(
                pid,
                pending.episode,
                pending.packet_kind,
                pending.transmissions_done,
                "giveup",
            )
        )
        return TimerGiveUp()

    def cancel_all(self) -> None:
        """Invalidate every armed timer (node switched off)."""
        for pending in self.pendings.values():
            pending.generation += 1

    def flush(self) -> None:
        """Summarize in-flight episodes that already went on the air."""
        for pid, pending in self.pendings.items():
            if (
                pending.state in (PendingState.SCHEDULED, PendingState.AWAITING_ACK)
                and pending.transmissions_done > 0
            ):
                self.episodes.append(
                    EpisodeSummary(
                        pid,
                        pending.episode,
                        pending.packet_kind,
                        pending.transmissions_done,
                        "unresolved",
                    )
                )
