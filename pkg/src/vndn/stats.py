"""Run statistics: an online tally fed by the simulator at decision points and
an independent offline aggregator that re-derives the same numbers from the
event log. Keeping both routes separate lets tests cross-check them."""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

EVENT_KINDS = frozenset(
    {"tx", "rx", "drop", "cache_hit", "pit_forward", "giveup", "app_issue", "app_satisfy"}
)

ROLES = ("producer", "consumer", "mule")


class MalformedLogError(ValueError):
    """Raised when an event log is not something this package produced."""


@dataclass(eq=True)
class ScopeCounters:
    interests_received: int = 0
    cache_hits: int = 0
    interests_forwarded: int = 0
    interest_drops: int = 0

    def add(self, other: "ScopeCounters") -> None:
        self.interests_received += other.interests_received
        self.cache_hits += other.cache_hits
        self.interests_forwarded += other.interests_forwarded
        self.interest_drops += other.interest_drops

    def cache_hit_ratio(self) -> float:
        if self.interests_received == 0:
            return 0.0
        return self.cache_hits / self.interests_received


@dataclass
class Tally:
    """Raw counters accumulated while a run is in progress."""

    per_role: dict[str, ScopeCounters] = field(
        default_factory=lambda: {role: ScopeCounters() for role in ROLES}
    )
    tx_histogram: Counter = field(default_factory=Counter)
    response_times: list[float] = field(default_factory=list)
    request_ids: set[str] = field(default_factory=set)
    satisfied: int = 0
    app_interests_issued: int = 0
    adhoc_interest_tx: int = 0
    adhoc_data_tx: int = 0
    giveup_count: int = 0
    zero_tx_ack_count: int = 0


@dataclass(eq=True)
class Stats:
    """Final per-run statistics; equal across the online and offline routes."""

    per_role: dict[str, ScopeCounters]
    scopes: dict[str, ScopeCounters]  # all | consumers_and_mules | mules
    tx_histogram: dict[int, int]
    response_times: tuple[float, ...]
    requests: int
    satisfied: int
    satisfaction_rate: float
    app_interests_issued: int
    adhoc_interest_transmissions: int
    adhoc_data_transmissions: int
    overhead_ratio: float
    giveup_count: int
    zero_tx_ack_count: int

    def mean_response_time(self) -> float:
        if not self.response_times:
            return 0.0
        return sum(self.response_times) / len(self.response_times)


def finalize(tally: Tally) -> Stats:
    scope_all = ScopeCounters()
    scope_cm = ScopeCounters()
    scope_mules = ScopeCounters()
    for role in ROLES:
        counters = tally.per_role[role]
        scope_all.add(counters)
        if role in ("consumer", "mule"):
            scope_cm.add(counters)
        if role == "mule":
            scope_mules.add(counters)
    requests = len(tally.request_ids)
    rate = tally.satisfied / requests if requests else 0.0
    overhead = (
        tally.adhoc_interest_tx / tally.app_interests_issued
        if tally.app_interests_issued
        else 0.0
    )
    return Stats(
        per_role={role: tally.per_role[role] for role in ROLES},
        scopes={"all": scope_all, "consumers_and_mules": scope_cm, "mules": scope_mules},
        tx_histogram={k: tally.tx_histogram[k] for k in sorted(tally.tx_histogram)},
        response_times=tuple(tally.response_times),
        requests=requests,
        satisfied=tally.satisfied,
        satisfaction_rate=rate,
        app_interests_issued=tally.app_interests_issued,
        adhoc_interest_transmissions=tally.adhoc_interest_tx,
        adhoc_data_transmissions=tally.adhoc_data_tx,
        overhead_ratio=overhead,
        giveup_count=tally.giveup_count,
        zero_tx_ack_count=tally.zero_tx_ack_count,
    )


# -- offline aggregation ------------------------------------------------------


def _field(record: dict, key: str):
    try:
        return record[key]
    except (KeyError, TypeError):
        raise MalformedLogError(f"record missing {key!r}: {record!r}") from None


def aggregate(records: Iterable[dict]) -> Stats:
    """Rebuild Stats from an event log alone."""
    tally = Tally()
    episode_tx: dict[tuple[int, int, int], int] = {}
    for record in records:
        kind = _field(record, "kind")
        if kind not in EVENT_KINDS:
            raise MalformedLogError(f"unknown event kind {kind!r}")
        node = _field(record, "node")
        extra = _field(record, "extra")
        role = extra.get("role")
        if role not in ROLES:
            raise MalformedLogError(f"record with bad role {role!r}: {record!r}")
        counters = tally.per_role[role]

        if kind == "rx":
            if "ignored" not in extra and extra.get("kind_of_packet") == "interest":
                counters.interests_received += 1
        elif kind == "app_issue":
            counters.interests_received += 1
            tally.app_interests_issued += 1
            tally.request_ids.add(_field(extra, "request"))
        elif kind == "cache_hit":
            counters.cache_hits += 1
        elif kind == "pit_forward":
            if extra.get("kind_of_packet") == "interest":
                counters.interests_forwarded += 1
        elif kind == "drop":
            layer = extra.get("layer")
            if layer == "ndn":
                if extra.get("kind_of_packet") == "interest":
                    counters.interest_drops += 1
            elif layer == "lal":
                if extra.get("reason") == "zero-tx-ack":
                    tally.zero_tx_ack_count += 1
                    tally.tx_histogram[0] += 1
            else:
                raise MalformedLogError(f"drop with bad layer {layer!r}")
        elif kind == "tx":
            if extra.get("medium") == "adhoc":
                if extra.get("kind_of_packet") == "interest":
                    tally.adhoc_interest_tx += 1
                else:
                    tally.adhoc_data_tx += 1
                key = (node, _field(record, "packet_id"), _field(extra, "episode"))
                episode_tx[key] = max(episode_tx.get(key, 0), _field(extra, "transmission"))
        elif kind == "giveup":
            tally.giveup_count += 1
        elif kind == "app_satisfy":
            tally.satisfied += 1
            tally.response_times.append(_field(extra, "response_time_s"))

    for count in episode_tx.values():
        tally.tx_histogram[count] += 1
    return finalize(tally)


def check_broadcast_conservation(records: list[dict]) -> list[str]:
    """For every adhoc transmission, the logged receptions (node-off arrivals
    included) must match the sender's receiver count exactly. Returns
    human-readable violations; an empty list means the log conserves."""
    rx_by_tx: Counter = Counter()
    for record in records:
        if record["kind"] == "rx" and record["extra"].get("medium") == "adhoc":
            rx_by_tx[record["extra"]["tx_seq"]] += 1
    violations = []
    for record in records:
        if record["kind"] != "tx" or record["extra"].get("medium") != "adhoc":
            continue
        extra = record["extra"]
        seq = extra["tx_seq"]
        if extra["received"] + extra["lost"] + extra["out_of_range"] != extra["candidates"]:
            violations.append(f"tx_seq {seq}: received+lost+out_of_range != candidates: {extra}")
        if extra["received"] > extra["in_range"] or extra["in_range"] > extra["candidates"]:
            violations.append(f"tx_seq {seq}: counts out of order: {extra}")
        if rx_by_tx[seq] != extra["received"]:
            violations.append(
                f"tx_seq {seq}: sender counted {extra['received']} receivers, "
                f"log holds {rx_by_tx[seq]} receptions"
            )
    return violations


# -- reports ------------------------------------------------------------------


def stats_to_dict(stats: Stats) -> dict:
    def scope(c: ScopeCounters) -> dict:
        return {
            "interests_received": c.interests_received,
            "cache_hits": c.cache_hits,
            "interests_forwarded": c.interests_forwarded,
            "interest_drops": c.interest_drops,
            "cache_hit_ratio": c.cache_hit_ratio(),
        }

    return {
        "per_role": {role: scope(c) for role, c in stats.per_role.items()},
        "scopes": {name: scope(c) for name, c in stats.scopes.items()},
        "tx_histogram": {str(k): v for k, v in stats.tx_histogram.items()},
        "response_times": list(stats.response_times),
        "requests": stats.requests,
        "satisfied": stats.satisfied,
        "satisfaction_rate": stats.satisfaction_rate,
        "mean_response_time_s": stats.mean_response_time(),
        "app_interests_issued": stats.app_interests_issued,
        "adhoc_interest_transmissions": stats.adhoc_interest_transmissions,
        "adhoc_data_transmissions": stats.adhoc_data_transmissions,
        "overhead_ratio": stats.overhead_ratio,
        "giveup_count": stats.giveup_count,
        "zero_tx_ack_count": stats.zero_tx_ack_count,
    }


def cdf_rows(histogram: dict) -> list[tuple[float, float]]:
    """Cumulative distribution rows (value, cum_fraction) from value counts."""
    total = sum(histogram.values())
    rows = []
    running = 0
    for value in sorted(histogram):
        running += histogram[value]
        rows.append((value, running / total if total else 0.0))
    return rows


def write_cdf_csv(path: str, histogram: dict) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value", "cum_fraction"])
        for value, fraction in cdf_rows(histogram):
            writer.writerow([value, fraction])


def _flatten(doc: dict, prefix: str = "") -> list[tuple[str, object]]:
    rows: list[tuple[str, object]] = []
    for key in sorted(doc):
        value = doc[key]
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            rows.extend(_flatten(value, dotted + "."))
        elif isinstance(value, list):
            rows.append((dotted, json.dumps(value)))
        else:
            rows.append((dotted, value))
    return rows


def write_report(stats: Stats, fmt: str, out_dir: str) -> list[str]:
    """Emit stats plus transmission-count and response-time CDF tables."""
    import os

    if fmt not in ("json", "csv"):
        raise ValueError(f"unknown report format {fmt!r}")
    os.makedirs(out_dir, exist_ok=True)
    written = []
    doc = stats_to_dict(stats)
    if fmt == "json":
        path = os.path.join(out_dir, "stats.json")
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        path = os.path.join(out_dir, "stats.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["key", "value"])
            writer.writerows(_flatten(doc))
    written.append(path)

    tx_path = os.path.join(out_dir, "transmission_cdf.csv")
    write_cdf_csv(tx_path, stats.tx_histogram)
    written.append(tx_path)

    rt_path = os.path.join(out_dir, "response_time_cdf.csv")
    write_cdf_csv(rt_path, Counter(stats.response_times))
    written.append(rt_path)
    return written


def read_events(path: str) -> list[dict]:
    """Load an NDJSON event log."""
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise MalformedLogError(f"line {lineno}: {exc}") from None
    return records
