"""Tests for the pending-interest table and the LRU content store."""

from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from vndn.names import Name
from vndn.packets import make_data
from vndn.tables import ContentStore, OversizedItemError, Pit, PitResult


def interest_for(name: Name, nonce: int, lifetime_ms: int = 4000):
    from vndn.packets import Interest

    return Interest(name, nonce, lifetime_ms, 0)


def test_first_record_is_new():
    pit = Pit()
    name = Name(("traffic", "main"))
    assert pit.record(interest_for(name, 1), 1, 0.0) is PitResult.NEW
    assert len(pit) == 1


def test_same_name_new_nonce_aggregates_faces():
    pit = Pit()
    name = Name(("traffic", "main"))
    pit.record(interest_for(name, 1), 1, 0.0)
    assert pit.record(interest_for(name, 2), 3, 0.1) is PitResult.AGGREGATED
    assert len(pit) == 1
    (entry,) = pit.match_data(name)
    assert entry.downstream_faces == {1, 3}
    assert entry.nonces_seen == {1, 2}


def test_same_nonce_is_duplicate():
    pit = Pit()
    name = Name(("traffic", "main"))
    pit.record(interest_for(name, 7), 1, 0.0)
    assert pit.is_duplicate(name, 7)
    assert pit.record(interest_for(name, 7), 2, 0.1) is PitResult.DUPLICATE_NONCE
    (entry,) = pit.match_data(name)
    assert entry.downstream_faces == {1}


def test_entry_expires_after_default_lifetime():
    pit = Pit()
    name = Name(("traffic", "main"))
    pit.record(interest_for(name, 1), 1, 0.0)
    pit.sweep(3.99)
    assert len(pit) == 1
    pit.sweep(4.01)
    assert len(pit) == 0
    assert not pit.is_duplicate(name, 1)


def test_entry_lifetime_capped_by_interest_lifetime():
    pit = Pit()
    name = Name(("traffic", "main"))
    pit.record(interest_for(name, 1, lifetime_ms=1000), 1, 0.0)
    pit.sweep(0.99)
    assert len(pit) == 1
    pit.sweep(1.01)
    assert len(pit) == 0


def test_entry_lifetime_capped_by_table_default():
    pit = Pit(default_lifetime_s=0.5)
    name = Name(("traffic", "main"))
    pit.record(interest_for(name, 1, lifetime_ms=60000), 1, 0.0)
    pit.sweep(0.51)
    assert len(pit) == 0


def test_expiry_frees_nonce_memory():
    pit = Pit()
    name = Name(("traffic", "main"))
    pit.record(interest_for(name, 9), 1, 0.0)
    pit.sweep(5.0)
    assert pit.record(interest_for(name, 9), 1, 5.0) is PitResult.NEW


def test_consume_frees_nonce_memory():
    pit = Pit()
    name = Name(("traffic", "main"))
    pit.record(interest_for(name, 9), 1, 0.0)
    (entry,) = pit.match_data(name)
    pit.consume(entry)
    assert len(pit) == 0
    assert not pit.is_duplicate(name, 9)
    assert pit.record(interest_for(name, 9), 1, 0.5) is PitResult.NEW


def test_match_data_uses_component_prefix():
    pit = Pit()
    pit.record(interest_for(Name(("picture", "w")), 1), 1, 0.0)
    assert pit.match_data(Name(("picture", "w", "c0")))
    assert pit.match_data(Name(("picture", "w")))
    assert not pit.match_data(Name(("picture", "x")))
    assert not pit.match_data(Name(("picture",)))


def test_match_data_returns_all_matching_entries():
    pit = Pit()
    pit.record(interest_for(Name(("picture",)), 1), 1, 0.0)
    pit.record(interest_for(Name(("picture", "w")), 2), 2, 0.0)
    matched = pit.match_data(Name(("picture", "w")))
    assert {e.name for e in matched} == {Name(("picture",)), Name(("picture", "w"))}


def chunk(label: str, size: int, index: int = 0, count: int = 1):
    return make_data(Name(("picture", label)), bytes(size), index, count, 0)


def test_insert_within_capacity_evicts_nothing():
    cs = ContentStore(capacity_bytes=2600)
    assert cs.insert(chunk("a", 1300)) == []
    assert cs.insert(chunk("b", 1300)) == []
    assert cs.total_bytes == 2600
    assert len(cs) == 2


def test_insert_over_capacity_evicts_least_recently_used():
    cs = ContentStore(capacity_bytes=2600)
    cs.insert(chunk("a", 1300))
    cs.insert(chunk("b", 1300))
    evicted = cs.insert(chunk("c", 1300))
    assert evicted == [Name(("picture", "a"))]
    assert cs.lookup(Name(("picture", "a"))) is None
    assert cs.total_bytes == 2600


def test_lookup_hit_refreshes_recency():
    cs = ContentStore(capacity_bytes=2600)
    cs.insert(chunk("a", 1300))
    cs.insert(chunk("b", 1300))
    assert cs.lookup(Name(("picture", "a"))) is not None
    evicted = cs.insert(chunk("c", 1300))
    assert evicted == [Name(("picture", "b"))]


def test_duplicate_insert_refreshes_recency():
    cs = ContentStore(capacity_bytes=2600)
    cs.insert(chunk("a", 1300))
    cs.insert(chunk("b", 1300))
    assert cs.insert(chunk("a", 1300)) == []
    assert cs.total_bytes == 2600
    evicted = cs.insert(chunk("c", 1300))
    assert evicted == [Name(("picture", "b"))]


def test_oversized_payload_rejected():
    cs = ContentStore(capacity_bytes=2600)
    with pytest.raises(OversizedItemError):
        cs.insert(chunk("big", 2601))


def test_zero_capacity_store_accepts_only_empty_payloads():
    cs = ContentStore(capacity_bytes=0)
    assert cs.insert(chunk("empty", 0)) == []
    with pytest.raises(OversizedItemError):
        cs.insert(chunk("tiny", 1))


def test_lookup_on_empty_store():
    assert ContentStore().lookup(Name(("picture", "a"))) is None


def test_exact_match_beats_descendants():
    cs = ContentStore()
    exact = make_data(Name(("picture", "w", "s")), b"whole", 0, 1, 0)
    child = make_data(Name(("picture", "w", "s", "c0")), b"part", 0, 5, 0)
    cs.insert(child)
    cs.insert(exact)
    assert cs.lookup(Name(("picture", "w", "s"))) == exact


def test_descendant_lookup_prefers_lowest_chunk_index():
    cs = ContentStore()
    c2 = make_data(Name(("picture", "w", "c2")), b"x", 2, 5, 0)
    c1 = make_data(Name(("picture", "w", "c1")), b"y", 1, 5, 0)
    cs.insert(c2)
    cs.insert(c1)
    assert cs.lookup(Name(("picture", "w"))) == c1


def test_descendant_lookup_ties_break_on_name():
    cs = ContentStore()
    b = make_data(Name(("picture", "b", "c0")), b"x", 0, 2, 0)
    a = make_data(Name(("picture", "a", "c0")), b"y", 0, 2, 0)
    cs.insert(b)
    cs.insert(a)
    assert cs.lookup(Name(("picture",))) == a


def test_exact_match_prefers_lowest_chunk_index():
    cs = ContentStore()
    later = make_data(Name(("picture", "w")), b"x", 1, 3, 0)
    first = make_data(Name(("picture", "w")), b"y", 0, 3, 0)
    cs.insert(later)
    cs.insert(first)
    assert cs.lookup(Name(("picture", "w"))) == first


class ModelLru:
    """Straight-line reference model: a recency list plus linear scans."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.order: list[tuple[str, int]] = []  # least recent first
        self.items: dict[tuple[str, int], object] = {}

    def insert(self, d):
        key = (d.name.render(), d.chunk_index)
        if key in self.items:
            self.order.remove(key)
            self.order.append(key)
            return []
        self.items[key] = d
        self.order.append(key)
        evicted = []
        while sum(len(x.payload) for x in self.items.values()) > self.capacity:
            old = self.order.pop(0)
            evicted.append(self.items.pop(old).name)
        return evicted

    def lookup(self, name):
        target = name.render()
        exact = [k for k in self.items if k[0] == target]
        if exact:
            key = min(exact, key=lambda k: k[1])
        else:
            under = [k for k in self.items if k[0].startswith(target + "/")]
            if not under:
                return None
            key = min(under, key=lambda k: (k[1], k[0]))
        self.order.remove(key)
        self.order.append(key)
        return self.items[key]

    @property
    def total_bytes(self):
        return sum(len(x.payload) for x in self.items.values())


name_pool = st.sampled_from([
    ("a",), ("b",), ("a", "b"), ("a", "c"), ("a", "b", "a"), ("b", "b"),
])
operations = st.lists(
    st.one_of(
        st.tuples(st.just("insert"), name_pool, st.integers(0, 2),
                  st.integers(0, 4)),
        st.tuples(st.just("lookup"), name_pool),
    ),
    max_size=40,
)


@settings(deadline=None, max_examples=200)
@given(ops=operations)
def test_store_matches_reference_model(ops):
    capacity = 6
    cs = ContentStore(capacity_bytes=capacity)
    model = ModelLru(capacity)
    for op in ops:
        if op[0] == "insert":
            _, parts, index, size = op
            d = make_data(Name(parts), bytes(size), index, 3, 0)
            assert cs.insert(d) == model.insert(d)
        else:
            _, parts = op
            assert cs.lookup(Name(parts)) == model.lookup(Name(parts))
        assert cs.total_bytes == model.total_bytes
        assert cs.total_bytes <= capacity
        assert len(cs) == len(model.items)
