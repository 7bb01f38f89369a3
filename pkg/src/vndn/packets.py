"""Interest and Data packets: canonical encoding, integrity tags, chunking.

Wire format (all integers big-endian):

  byte 0            kind: 1 = Interest, 2 = Data
  name              u16 component count, then per component u16 length + UTF-8 bytes
  Interest          nonce u64, lifetime u32 (ms), hop_count u16
  Data              chunk_index u32, chunk_count u32, producer_id u64,
                    payload u32 length + bytes, integrity_tag 32 bytes
"""

from __future__ import annotations

import functools
import hashlib
import math
import struct
from dataclasses import dataclass

from .geo import GeoPoint
from .names import InvalidComponentError, Name

KIND_INTEREST = 1
KIND_DATA = 2

TAG_LEN = 32


class TruncatedError(ValueError):
    """Raised when encoded bytes end before the structure does."""


class BadKindError(ValueError):
    """Raised when the kind byte is not a known packet kind."""


class MixedContentError(ValueError):
    """Raised when reassembly sees chunks from different contents."""


@dataclass(frozen=True)
class Interest:
    name: Name
    nonce: int  # 64-bit, identifies one emission
    lifetime_ms: int
    hop_count: int = 0
    origin_position: GeoPoint | None = None  # metrics only, not on the wire

    def __post_init__(self) -> None:
        if not 0 <= self.nonce < 1 << 64:
            raise ValueError(f"nonce out of range: {self.nonce}")
        if self.lifetime_ms <= 0:
            raise ValueError(f"lifetime must be positive, got {self.lifetime_ms}")
        if self.hop_count < 0:
            raise ValueError("hop_count must be non-negative")


@dataclass(frozen=True)
class Data:
    name: Name
    payload: bytes
    chunk_index: int
    chunk_count: int
    producer_id: int
    integrity_tag: bytes

    def __post_init__(self) -> None:
        if not 0 <= self.chunk_index < self.chunk_count:
            raise ValueError(
                f"chunk_index {self.chunk_index} outside [0, {self.chunk_count})"
            )
        if len(self.integrity_tag) != TAG_LEN:
            raise ValueError(f"integrity tag must be {TAG_LEN} bytes")


def _encode_name(name: Name) -> bytes:
    out = [struct.pack(">H", len(name.components))]
    for comp in name.components:
        raw = comp.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise InvalidComponentError("component longer than 65535 bytes")
        out.append(struct.pack(">H", len(raw)))
        out.append(raw)
    return b"".join(out)


class _Reader:
    def __init__(self, raw: bytes):
        self.raw = raw
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.raw):
            raise TruncatedError(f"need {n} bytes at offset {self.pos}, have {len(self.raw)}")
        chunk = self.raw[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u(self, fmt: str) -> int:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))[0]


def _decode_name(r: _Reader) -> Name:
    count = r.u(">H")
    comps = []
    for _ in range(count):
        raw = r.take(r.u(">H"))
        comps.append(raw.decode("utf-8"))
    return Name(tuple(comps))


def _data_body(name: Name, payload: bytes, chunk_index: int, chunk_count: int,
               producer_id: int) -> bytes:
    return b"".join(
        (
            bytes([KIND_DATA]),
            _encode_name(name),
            struct.pack(">IIQ", chunk_index, chunk_count, producer_id),
            struct.pack(">I", len(payload)),
            payload,
        )
    )


def compute_tag(name: Name, payload: bytes, chunk_index: int, chunk_count: int,
                producer_id: int) -> bytes:
    """Integrity digest over everything that precedes the tag on the wire."""
    return hashlib.sha256(_data_body(name, payload, chunk_index, chunk_count,
                                     producer_id)).digest()


def make_data(name: Name, payload: bytes, chunk_index: int = 0, chunk_count: int = 1,
              producer_id: int = 0) -> Data:
    tag = compute_tag(name, payload, chunk_index, chunk_count, producer_id)
    return Data(name, payload, chunk_index, chunk_count, producer_id, tag)


@functools.lru_cache(maxsize=4096)
def verify_data(d: Data) -> bool:
    # Cached: the same immutable Data object is typically verified once per
    # overhearing node, and the digest is the expensive part.
    return d.integrity_tag == compute_tag(
        d.name, d.payload, d.chunk_index, d.chunk_count, d.producer_id
    )


def encode_packet(pkt: Interest | Data) -> bytes:
    if isinstance(pkt, Interest):
        return b"".join(
            (
                bytes([KIND_INTEREST]),
                _encode_name(pkt.name),
                struct.pack(">QIH", pkt.nonce, pkt.lifetime_ms, pkt.hop_count),
            )
        )
    if isinstance(pkt, Data):
        return _data_body(pkt.name, pkt.payload, pkt.chunk_index, pkt.chunk_count,
                          pkt.producer_id) + pkt.integrity_tag
    raise BadKindError(f"not a packet: {pkt!r}")


@functools.lru_cache(maxsize=4096)
def decode_packet(raw: bytes) -> Interest | Data:
    # Cached: retransmissions and rebroadcasts re-decode identical bytes.
    r = _Reader(raw)
    kind = r.take(1)[0]
    if kind == KIND_INTEREST:
        name = _decode_name(r)
        nonce, lifetime_ms, hop_count = r.u(">Q"), r.u(">I"), r.u(">H")
        return Interest(name, nonce, lifetime_ms, hop_count)
    if kind == KIND_DATA:
        name = _decode_name(r)
        chunk_index, chunk_count, producer_id = r.u(">I"), r.u(">I"), r.u(">Q")
        payload = r.take(r.u(">I"))
        tag = r.take(TAG_LEN)
        return Data(name, payload, chunk_index, chunk_count, producer_id, tag)
    raise BadKindError(f"unknown packet kind {kind}")


def packet_kind(raw: bytes) -> str:
    if not raw:
        raise TruncatedError("empty packet")
    if raw[0] == KIND_INTEREST:
        return "interest"
    if raw[0] == KIND_DATA:
        return "data"
    raise BadKindError(f"unknown packet kind {raw[0]}")


def packet_id(raw: bytes) -> int:
    """64-bit digest of canonical packet bytes; ids collide only if bytes do."""
    return int.from_bytes(hashlib.sha256(raw).digest()[:8], "big")


def chunk_content(name: Name, payload: bytes, chunk_size: int,
                  producer_id: int = 0) -> list[Data]:
    """Split payload into chunk Data packets named <name>/c<index>.

    An empty payload still produces one empty chunk so the content remains
    retrievable.
    """
    if chunk_size <= 0:
        raise ValueError(f"chunk_size must be positive, got {chunk_size}")
    count = max(1, math.ceil(len(payload) / chunk_size))
    chunks = []
    for idx in range(count):
        piece = payload[idx * chunk_size : (idx + 1) * chunk_size]
        chunks.append(make_data(name.child(f"c{idx}"), piece, idx, count, producer_id))
    return chunks


def reassemble(chunks: list[Data]) -> bytes | None:
    """Concatenate a complete chunk set; None when indices are missing.

    Raises MixedContentError when base names or chunk counts disagree.
    """
    if not chunks:
        return None
    if len(chunks[0].name) < 2:
        raise MixedContentError(f"{chunks[0].name} has no base name")
    base = chunks[0].name.parent()
    count = chunks[0].chunk_count
    by_index: dict[int, Data] = {}
    for c in chunks:
        if len(c.name) < 2 or c.name.parent() != base or c.chunk_count != count:
            raise MixedContentError(
                f"chunk {c.name} does not belong to {base} x{count}"
            )
        by_index.setdefault(c.chunk_index, c)
    if set(by_index) != set(range(count)):
        return None
    return b"".join(by_index[i].payload for i in range(count))
