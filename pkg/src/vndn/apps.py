"""Applications: intersection-status producers/consumers, photo transfer, mules.

Apps are passive state machines. The simulator calls step/on_data/on_reexpress
and executes the commands they return, so every app decision is unit-testable
without a running simulation.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from typing import Callable

from .geo import GeoPoint, RoadGraph, reverse_geocode
from .names import Name, parse_name
from .packets import Data, chunk_content, make_data
from .rng import substream

TRAFFIC_PREFIX = "traffic"
PHOTO_PREFIX = "picture"
DEFAULT_CHUNK_SIZE = 1300
DEFAULT_FRESHNESS_WINDOW_S = 300.0

_CHUNK_COMPONENT = re.compile(r"^c\d+$")
_CONGESTION_LEVELS = ("free", "light", "heavy", "jam")

VERSION_NONE = "none"
VERSION_PER_ISSUE = "per-issue"
VERSION_WINDOW = "window"


# -- app -> engine commands --------------------------------------------------


@dataclass(frozen=True)
class IssueInterest:
    name: Name
    request_id: str
    attempt: int  # 0 = first expression
    lifetime_ms: int


@dataclass(frozen=True)
class MarkSatisfied:
    request_id: str
    name: Name
    response_time_s: float


AppCommand = IssueInterest | MarkSatisfied


# -- traffic payloads ---------------------------------------------------------


def encode_traffic_payload(label: str, observed_ms: int, congestion: str) -> bytes:
    return f"{label}|{observed_ms}|{congestion}".encode("utf-8")


def decode_traffic_payload(payload: bytes) -> tuple[str, int, str]:
    label, observed_ms, congestion = payload.decode("utf-8").split("|")
    return label, int(observed_ms), congestion


def congestion_token(label: str, observed_ms: int, producer_id: int) -> str:
    digest = hashlib.sha256(f"{label}|{observed_ms}|{producer_id}".encode()).digest()
    return _CONGESTION_LEVELS[digest[0] % len(_CONGESTION_LEVELS)]


# -- consumer scheduling ------------------------------------------------------


@dataclass(frozen=True)
class ConsumerSchedule:
    targets: tuple[str, ...]  # rendered base names
    start_s: float = 1.0
    issue_period_s: float = 1.0
    max_issues: int | None = None
    interest_lifetime_ms: int = 4000
    reexpress_timeout_s: float = 2.0
    max_reexpress: int = 2
    version_mode: str = VERSION_PER_ISSUE
    version_window_s: float = 30.0

    def __post_init__(self) -> None:
        if not self.targets:
            raise ValueError("consumer needs at least one target name")
        if self.issue_period_s <= 0 or self.reexpress_timeout_s <= 0:
            raise ValueError("periods must be positive")
        if self.interest_lifetime_ms <= 0:
            raise ValueError("interest lifetime must be positive")
        if self.max_reexpress < 0:
            raise ValueError("max_reexpress must be non-negative")
        if self.version_mode not in (VERSION_NONE, VERSION_PER_ISSUE, VERSION_WINDOW):
            raise ValueError(f"unknown version mode {self.version_mode!r}")
        if self.version_mode == VERSION_WINDOW and self.version_window_s <= 0:
            raise ValueError("version window must be positive")


@dataclass
class _Request:
    request_id: str
    name: Name
    first_issue: float
    attempt: int = 0
    satisfied: bool = False


class TrafficConsumerApp:
    """Polls intersection-status names on a schedule; a request is satisfied by
    the first matching Data and re-expressed with a fresh nonce until the
    budget runs out."""

    def __init__(self, node_id: int, cfg: ConsumerSchedule):
        self.node_id = node_id
        self.cfg = cfg
        self.issue_index = 0
        self.open: dict[str, _Request] = {}  # rendered name -> request
        self.requests_issued = 0
        self.satisfied = 0
        self.unsatisfied = 0

    def _versioned(self, base: str, now: float) -> Name:
        name = parse_name(base)
        mode = self.cfg.version_mode
        if mode == VERSION_PER_ISSUE:
            return name.child(f"t{self.issue_index}")
        if mode == VERSION_WINDOW:
            return name.child(f"w{int(now // self.cfg.version_window_s)}")
        return name

    def step(self, now: float) -> list[AppCommand]:
        base = self.cfg.targets[self.issue_index % len(self.cfg.targets)]
        name = self._versioned(base, now)
        request_id = f"n{self.node_id}:{name.render()}#{self.issue_index}"
        self.issue_index += 1
        if name.render() in self.open:
            return []  # the previous request for this name is still in flight
        request = _Request(request_id, name, now)
        self.open[name.render()] = request
        self.requests_issued += 1
        return [IssueInterest(name, request_id, 0, self.cfg.interest_lifetime_ms)]

    def on_reexpress(self, request_id: str, name: Name, attempt: int,
                     now: float) -> list[AppCommand]:
        request = self.open.get(name.render())
        if request is None or request.request_id != request_id or request.attempt != attempt:
            return []  # stale timer
        if request.attempt >= self.cfg.max_reexpress:
            del self.open[name.render()]
            self.unsatisfied += 1
            return []
        request.attempt += 1
        return [IssueInterest(name, request_id, request.attempt,
                              self.cfg.interest_lifetime_ms)]

    def on_data(self, data: Data, now: float) -> list[AppCommand]:
        request = self.open.get(data.name.render())
        if request is None:
            # chunked answers satisfy the base-name request they extend
            for key, candidate in self.open.items():
                if candidate.name.is_prefix_of(data.name):
                    request = candidate
                    break
        if request is None:
            return []
        del self.open[request.name.render()]
        request.satisfied = True
        self.satisfied += 1
        return [MarkSatisfied(request.request_id, request.name,
                              now - request.first_issue)]


@dataclass
class _PhotoFetch:
    request_id: str
    base: Name
    first_issue: float
    outstanding: Name
    attempt: int = 0
    chunk_count: int | None = None
    chunks: dict[int, Data] = field(default_factory=dict)


class PhotoConsumerApp:
    """Fetches chunked photos: a base-name interest pulls chunk 0 (which
    carries the chunk count), then chunks are requested one at a time. The
    photo counts as received only when every chunk reassembles."""

    def __init__(self, node_id: int, cfg: ConsumerSchedule):
        self.node_id = node_id
        self.cfg = cfg
        self.issue_index = 0
        self.fetches: dict[str, _PhotoFetch] = {}  # base rendered -> fetch
        self.requests_issued = 0
        self.satisfied = 0
        self.unsatisfied = 0
        self.completed_payloads: dict[str, bytes] = {}

    def _versioned(self, base: str, now: float) -> Name:
        name = parse_name(base)
        mode = self.cfg.version_mode
        if mode == VERSION_PER_ISSUE:
            return name.child(f"t{self.issue_index}")
        if mode == VERSION_WINDOW:
            return name.child(f"w{int(now // self.cfg.version_window_s)}")
        return name

    def step(self, now: float) -> list[AppCommand]:
        base_str = self.cfg.targets[self.issue_index % len(self.cfg.targets)]
        base = self._versioned(base_str, now)
        request_id = f"n{self.node_id}:{base.render()}#{self.issue_index}"
        self.issue_index += 1
        if base.render() in self.fetches:
            return []
        fetch = _PhotoFetch(request_id, base, now, outstanding=base)
        self.fetches[base.render()] = fetch
        self.requests_issued += 1
        return [IssueInterest(base, request_id, 0, self.cfg.interest_lifetime_ms)]

    def on_reexpress(self, request_id: str, name: Name, attempt: int,
                     now: float) -> list[AppCommand]:
        fetch = None
        for candidate in self.fetches.values():
            if candidate.request_id == request_id:
                fetch = candidate
                break
        if fetch is None or fetch.outstanding != name or fetch.attempt != attempt:
            return []
        if fetch.attempt >= self.cfg.max_reexpress:
            del self.fetches[fetch.base.render()]
            self.unsatisfied += 1
            return []
        fetch.attempt += 1
        return [IssueInterest(name, request_id, fetch.attempt,
                              self.cfg.interest_lifetime_ms)]

    def _next_missing(self, fetch: _PhotoFetch) -> int | None:
        assert fetch.chunk_count is not None
        for idx in range(fetch.chunk_count):
            if idx not in fetch.chunks:
                return idx
        return None

    def on_data(self, data: Data, now: float) -> list[AppCommand]:
        if len(data.name) < 2:
            return []
        base_key = data.name.parent().render()
        fetch = self.fetches.get(base_key)
        if fetch is None or not _CHUNK_COMPONENT.match(data.name.components[-1]):
            return []
        if fetch.chunk_count is None:
            fetch.chunk_count = data.chunk_count
        if data.chunk_count != fetch.chunk_count:
            return []
        fetch.chunks.setdefault(data.chunk_index, data)
        missing = self._next_missing(fetch)
        if missing is None:
            payload = b"".join(fetch.chunks[i].payload for i in range(fetch.chunk_count))
            self.completed_payloads[fetch.base.render()] = payload
            del self.fetches[base_key]
            self.satisfied += 1
            return [MarkSatisfied(fetch.request_id, fetch.base,
                                  now - fetch.first_issue)]
        next_name = fetch.base.child(f"c{missing}")
        if next_name == fetch.outstanding:
            return []  # already chasing this chunk; the re-express timer owns it
        fetch.outstanding = next_name
        fetch.attempt = 0
        return [IssueInterest(next_name, fetch.request_id, 0,
                              self.cfg.interest_lifetime_ms)]


# -- producers ----------------------------------------------------------------


class TrafficProducerApp:
    """Answers /traffic/<label>/... interests for intersections visited within
    the freshness window. The visit log is fed by position samples."""

    def __init__(self, node_id: int, freshness_window_s: float = DEFAULT_FRESHNESS_WINDOW_S):
        if freshness_window_s <= 0:
            raise ValueError("freshness window must be positive")
        self.node_id = node_id
        self.freshness_window_s = freshness_window_s
        self.visit_log: dict[str, float] = {}
        self.prefix = Name((TRAFFIC_PREFIX,))

    def observe(self, label: str, now: float) -> None:
        self.visit_log[label] = now

    def _fresh_visit(self, label: str, now: float) -> float | None:
        visited = self.visit_log.get(label)
        if visited is None or now - visited > self.freshness_window_s:
            return None
        return visited

    def can_produce(self, interest, now: float) -> bool:
        comps = interest.name.components
        if len(comps) < 2 or comps[0] != TRAFFIC_PREFIX:
            return False
        return self._fresh_visit(comps[1], now) is not None

    def produce(self, interest, now: float) -> list[Data]:
        comps = interest.name.components
        label = comps[1]
        visited = self._fresh_visit(label, now)
        if visited is None:
            return []
        observed_ms = int(visited * 1000)
        payload = encode_traffic_payload(
            label, observed_ms, congestion_token(label, observed_ms, self.node_id)
        )
        return [make_data(interest.name, payload, 0, 1, self.node_id)]


class PhotoProducerApp:
    """Answers /picture/<label>/... interests when parked at the named
    intersection, publishing a deterministic pseudo-random photo in chunks."""

    def __init__(
        self,
        node_id: int,
        scenario_seed: int,
        photo_size_bytes: int | tuple[int, int] = (68000, 100000),
        chunk_size: int = DEFAULT_CHUNK_SIZE,
    ):
        if chunk_size <= 0:
            raise ValueError("chunk size must be positive")
        self.node_id = node_id
        self.scenario_seed = scenario_seed
        self.photo_size_bytes = photo_size_bytes
        self.chunk_size = chunk_size
        self.prefix = Name((PHOTO_PREFIX,))
        self.graph: RoadGraph | None = None
        self.position_fn: Callable[[], GeoPoint] | None = None

    def _at_label(self, label: str) -> bool:
        if self.graph is None or self.position_fn is None:
            return False
        return reverse_geocode(self.graph, self.position_fn()) == label

    def can_produce(self, interest, now: float) -> bool:
        comps = interest.name.components
        if len(comps) < 2 or comps[0] != PHOTO_PREFIX:
            return False
        if _CHUNK_COMPONENT.match(comps[-1]):
            return False  # chunk retrieval is served from the content store
        return self._at_label(comps[1])

    def photo_payload(self, base: Name) -> bytes:
        rng = substream(self.scenario_seed, "photo", base.render())
        size = self.photo_size_bytes
        if isinstance(size, tuple):
            size = rng.randint(size[0], size[1])
        return rng.randbytes(size)

    def produce(self, interest, now: float) -> list[Data]:
        if not self.can_produce(interest, now):
            return []
        payload = self.photo_payload(interest.name)
        return chunk_content(interest.name, payload, self.chunk_size, self.node_id)


def mule_tick(node, now: float = 0.0) -> None:
    """Mules run no application; they relay and cache through the stack alone."""
    return None
