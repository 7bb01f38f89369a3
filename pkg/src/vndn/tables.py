"""Pending-interest table and content store."""

from __future__ import annotations

import enum
import math
from collections import OrderedDict
from dataclasses import dataclass, field

from .names import Name
from .packets import Data, Interest

DEFAULT_CS_CAPACITY = 10 * 1024 * 1024  # bytes
DEFAULT_PIT_LIFETIME_S = 4.0


class OversizedItemError(ValueError):
    """Raised when a single payload exceeds the store capacity."""


class PitResult(enum.Enum):
    NEW = "new"
    AGGREGATED = "aggregated"
    DUPLICATE_NONCE = "duplicate-nonce"


@dataclass
class PitEntry:
    name: Name
    downstream_faces: set[int]
    nonces_seen: set[int]
    expiry: float


@dataclass
class Pit:
    """Pending interests keyed by rendered name."""

    default_lifetime_s: float = DEFAULT_PIT_LIFETIME_S
    entries: dict[str, PitEntry] = field(default_factory=dict)
    _next_expiry: float = math.inf  # soonest entry expiry; sweeps skip until then

    def sweep(self, now: float) -> None:
        if now <= self._next_expiry:
            return
        dead = [key for key, e in self.entries.items() if e.expiry < now]
        for key in dead:
            del self.entries[key]
        self._next_expiry = min(
            (e.expiry for e in self.entries.values()), default=math.inf
        )

    def is_duplicate(self, name: Name, nonce: int) -> bool:
        entry = self.entries.get(name.render())
        return entry is not None and nonce in entry.nonces_seen

    def record(self, interest: Interest, face_id: int, now: float) -> PitResult:
        """File an interest under its name; entry lifetime is capped by both
        the table default and the interest's own lifetime."""
        key = interest.name.render()
        entry = self.entries.get(key)
        if entry is not None:
            if interest.nonce in entry.nonces_seen:
                return PitResult.DUPLICATE_NONCE
            entry.downstream_faces.add(face_id)
            entry.nonces_seen.add(interest.nonce)
            return PitResult.AGGREGATED
        lifetime = min(self.default_lifetime_s, interest.lifetime_ms / 1000.0)
        expiry = now + lifetime
        self.entries[key] = PitEntry(interest.name, {face_id}, {interest.nonce}, expiry)
        if expiry < self._next_expiry:
            self._next_expiry = expiry
        return PitResult.NEW

    def match_data(self, name: Name) -> list[PitEntry]:
        """Entries satisfied by a Data name: exact, or entry name is a prefix."""
        return [e for e in self.entries.values() if e.name.is_prefix_of(name)]

    def consume(self, entry: PitEntry) -> None:
        self.entries.pop(entry.name.render(), None)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class ContentStore:
    """LRU-evicting store of Data packets keyed by (name, chunk_index)."""

    capacity_bytes: int = DEFAULT_CS_CAPACITY
    _entries: OrderedDict = field(default_factory=OrderedDict)  # key -> Data
    _bytes: int = 0
    _chunks_by_name: dict = field(default_factory=dict)  # rendered -> set of chunk indices
    _descendants: dict = field(default_factory=dict)  # ancestor rendered -> set of keys

    def __post_init__(self) -> None:
        if self.capacity_bytes < 0:
            raise ValueError("capacity_bytes must be non-negative")

    @property
    def total_bytes(self) -> int:
        return self._bytes

    def __len__(self) -> int:
        return len(self._entries)

    def insert(self, d: Data) -> list[Name]:
        """Store a (verified) Data packet; returns names evicted to make room.

        A duplicate key only refreshes recency.
        """
        if len(d.payload) > self.capacity_bytes:
            raise OversizedItemError(
                f"payload of {len(d.payload)} bytes exceeds capacity {self.capacity_bytes}"
            )
        key = (d.name.render(), d.chunk_index)
        if key in self._entries:
            self._entries.move_to_end(key)
            return []
        self._entries[key] = d
        self._bytes += len(d.payload)
        self._chunks_by_name.setdefault(key[0], set()).add(d.chunk_index)
        for ancestor in self._ancestors(d.name):
            self._descendants.setdefault(ancestor, set()).add(key)
        evicted = []
        while self._bytes > self.capacity_bytes:
            old_key, old = self._entries.popitem(last=False)
            self._bytes -= len(old.payload)
            indices = self._chunks_by_name[old_key[0]]
            indices.discard(old_key[1])
            if not indices:
                del self._chunks_by_name[old_key[0]]
            for ancestor in self._ancestors(old.name):
                keys = self._descendants[ancestor]
                keys.discard(old_key)
                if not keys:
                    del self._descendants[ancestor]
            evicted.append(old.name)
        return evicted

    @staticmethod
    def _ancestors(name: Name):
        comps = name.components
        parts = []
        for c in comps[:-1]:
            parts.append(c)
            yield "/" + "/".join(parts)

    def lookup(self, interest_name: Name) -> Data | None:
        """Exact-name match first, else the stored name with interest_name as a
        strict prefix; lowest chunk_index (then name) wins. Hits refresh
        recency."""
        # components cannot contain '/', so component-wise prefix testing
        # reduces to string prefix testing with a '/' boundary
        target = interest_name.render()
        exact = self._chunks_by_name.get(target)
        if exact:
            best_key = (target, min(exact))
            self._entries.move_to_end(best_key)
            return self._entries[best_key]
        under = self._descendants.get(target)
        if not under:
            return None
        best_key = min(under, key=lambda k: (k[1], k[0]))
        self._entries.move_to_end(best_key)
        return self._entries[best_key]
