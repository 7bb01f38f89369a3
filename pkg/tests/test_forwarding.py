"""Tests for the per-node forwarding pipeline."""

from __future__ import annotations

from vndn.forwarding import (
    ADHOC_BROADCAST,
    CONTROLLED_FLOOD,
    DROP_DUPLICATE_NONCE,
    DROP_GEO_SUPPRESSED,
    DROP_INTEGRITY,
    DROP_NO_ROUTE,
    DROP_PRODUCER_DELIVERED,
    GREEDY_GEO,
    INFRASTRUCTURE_LINK,
    LOCAL_APP,
    CacheInsert,
    DeliverToApp,
    DropPacket,
    Face,
    ForwardBroadcast,
    ForwardUnicast,
    NodeState,
    ProducerBinding,
    ReplyData,
    geo_hint,
    on_data,
    on_interest,
)
from vndn.geo import GeoPoint, Intersection, RoadGraph
from vndn.names import Name
from vndn.packets import Data, Interest, make_data

LOCAL = Face(0, LOCAL_APP)
ADHOC = Face(1, ADHOC_BROADCAST)
LINK = Face(2, INFRASTRUCTURE_LINK)

GRAPH = RoadGraph(
    intersections=(
        Intersection(0, "main", GeoPoint(100.0, 0.0)),
        Intersection(1, "elm", GeoPoint(0.0, 100.0)),
    ),
    segments=(),
)


def node(*faces: Face, **kwargs) -> NodeState:
    if not faces:
        faces = (LOCAL, ADHOC)
    return NodeState(id=1, faces={f.id: f for f in faces}, **kwargs)


def interest(path: str = "/traffic/main", nonce: int = 1) -> Interest:
    return Interest(Name(tuple(path.strip("/").split("/"))), nonce, 4000, 0)


def test_content_store_hit_replies_without_touching_pit():
    state = node()
    data = make_data(Name(("traffic", "main")), b"free", 0, 1, 9)
    state.cs.insert(data)
    actions = on_interest(state, interest(), ADHOC, 1.0, GRAPH)
    assert actions == [ReplyData(data, ADHOC)]
    assert len(state.pit) == 0


def test_content_store_hit_beats_nonce_dedup():
    state = node()
    first = on_interest(state, interest(nonce=5), ADHOC, 1.0, GRAPH)
    assert first == [ForwardBroadcast(interest(nonce=5))]
    data = make_data(Name(("traffic", "main")), b"free", 0, 1, 9)
    state.cs.insert(data)
    again = on_interest(state, interest(nonce=5), ADHOC, 1.1, GRAPH)
    assert again == [ReplyData(data, ADHOC)]


def test_duplicate_nonce_is_dropped():
    state = node()
    on_interest(state, interest(nonce=5), ADHOC, 1.0, GRAPH)
    actions = on_interest(state, interest(nonce=5), ADHOC, 1.1, GRAPH)
    assert actions == [DropPacket(DROP_DUPLICATE_NONCE)]


def test_same_name_new_nonce_is_forwarded_again():
    state = node()
    on_interest(state, interest(nonce=5), ADHOC, 1.0, GRAPH)
    actions = on_interest(state, interest(nonce=6), ADHOC, 1.1, GRAPH)
    assert actions == [ForwardBroadcast(interest(nonce=6))]
    assert len(state.pit) == 1


def test_producer_match_delivers_to_app_and_records_pit():
    state = node(LOCAL, ADHOC, producers=[
        ProducerBinding(Name(("traffic",)), lambda i, now: True),
    ])
    actions = on_interest(state, interest(), ADHOC, 1.0, GRAPH)
    assert actions == [DeliverToApp(interest(), ADHOC)]
    assert len(state.pit) == 1  # produced data must route back via the PIT


def test_unproducible_interest_falls_through_to_forwarding():
    state = node(LOCAL, ADHOC, producers=[
        ProducerBinding(Name(("traffic",)), lambda i, now: False),
    ])
    actions = on_interest(state, interest(), ADHOC, 1.0, GRAPH)
    assert actions == [ForwardBroadcast(interest())]


def test_flood_strategy_broadcasts_on_adhoc_face():
    state = node()
    actions = on_interest(state, interest(), LOCAL, 1.0, GRAPH)
    assert actions == [ForwardBroadcast(interest())]
    assert len(state.pit) == 1


def test_interest_without_route_is_dropped():
    state = node(LOCAL)
    actions = on_interest(state, interest(), LOCAL, 1.0, GRAPH)
    assert actions == [DropPacket(DROP_NO_ROUTE)]


def test_fib_match_unicasts_on_link_face():
    state = node(LOCAL, LINK, fib=[(Name(("traffic",)), LINK.id)])
    actions = on_interest(state, interest(), LOCAL, 1.0, GRAPH)
    assert actions == [ForwardUnicast(interest(), LINK)]


def test_fib_skips_arrival_face():
    state = node(LOCAL, LINK, fib=[(Name(("traffic",)), LINK.id)])
    actions = on_interest(state, interest(), LINK, 1.0, GRAPH)
    assert actions == [DropPacket(DROP_NO_ROUTE)]


def test_fib_mismatch_is_not_forwarded():
    state = node(LOCAL, LINK, fib=[(Name(("picture",)), LINK.id)])
    actions = on_interest(state, interest(), LOCAL, 1.0, GRAPH)
    assert actions == [DropPacket(DROP_NO_ROUTE)]


def test_adhoc_and_matching_fib_both_forward():
    state = node(LOCAL, ADHOC, LINK, fib=[(Name(("traffic",)), LINK.id)])
    actions = on_interest(state, interest(), LOCAL, 1.0, GRAPH)
    assert actions == [ForwardBroadcast(interest()),
                       ForwardUnicast(interest(), LINK)]


def test_greedy_geo_forwards_when_strictly_closer_to_hint():
    state = node(strategy=GREEDY_GEO, position=GeoPoint(50.0, 0.0))
    actions = on_interest(state, interest(), ADHOC, 1.0, GRAPH,
                          prev_hop_pos=GeoPoint(0.0, 0.0))
    assert actions == [ForwardBroadcast(interest())]


def test_greedy_geo_suppresses_when_farther_from_hint():
    state = node(strategy=GREEDY_GEO, position=GeoPoint(0.0, 0.0))
    actions = on_interest(state, interest(), ADHOC, 1.0, GRAPH,
                          prev_hop_pos=GeoPoint(50.0, 0.0))
    assert actions == [DropPacket(DROP_GEO_SUPPRESSED)]


def test_greedy_geo_suppresses_on_equal_distance():
    state = node(strategy=GREEDY_GEO, position=GeoPoint(50.0, 0.0))
    actions = on_interest(state, interest(), ADHOC, 1.0, GRAPH,
                          prev_hop_pos=GeoPoint(150.0, 0.0))
    assert actions == [DropPacket(DROP_GEO_SUPPRESSED)]


def test_greedy_geo_floods_without_location_hint():
    state = node(strategy=GREEDY_GEO, position=GeoPoint(0.0, 0.0))
    actions = on_interest(state, interest("/traffic/nowhere"), ADHOC, 1.0,
                          GRAPH, prev_hop_pos=GeoPoint(50.0, 0.0))
    assert actions == [ForwardBroadcast(interest("/traffic/nowhere"))]


def test_greedy_geo_floods_without_previous_hop():
    state = node(strategy=GREEDY_GEO, position=GeoPoint(0.0, 0.0))
    actions = on_interest(state, interest(), ADHOC, 1.0, GRAPH,
                          prev_hop_pos=None)
    assert actions == [ForwardBroadcast(interest())]


def test_geo_hint_uses_earliest_label_component():
    assert geo_hint(Name(("traffic", "main")), GRAPH) == GeoPoint(100.0, 0.0)
    assert geo_hint(Name(("picture", "elm", "main")), GRAPH) == GeoPoint(0.0, 100.0)
    assert geo_hint(Name(("traffic", "nowhere")), GRAPH) is None


def test_corrupted_data_is_dropped_and_never_cached():
    state = node()
    good = make_data(Name(("traffic", "main")), b"free", 0, 1, 9)
    forged = Data(good.name, b"evil", good.chunk_index, good.chunk_count,
                  good.producer_id, good.integrity_tag)
    actions = on_data(state, forged, ADHOC, 1.0)
    assert actions == [DropPacket(DROP_INTEGRITY)]
    assert len(state.cs) == 0


def test_data_without_pit_match_is_cache_only():
    state = node()
    data = make_data(Name(("traffic", "main")), b"free", 0, 1, 9)
    actions = on_data(state, data, ADHOC, 1.0)
    assert actions == [CacheInsert(data)]


def test_data_with_pit_match_is_cached_then_delivered():
    state = node()
    on_interest(state, interest(), LOCAL, 1.0, GRAPH)  # records PIT
    data = make_data(Name(("traffic", "main")), b"free", 0, 1, 9)
    actions = on_data(state, data, ADHOC, 1.2)
    assert actions == [CacheInsert(data), DeliverToApp(data, LOCAL)]
    assert len(state.pit) == 0  # satisfied entries are consumed


def test_data_forwarded_downstream_broadcasts_once():
    state = node()
    state.pit.record(interest("/traffic", nonce=1), ADHOC.id, 1.0)
    state.pit.record(interest("/traffic/main", nonce=2), ADHOC.id, 1.0)
    data = make_data(Name(("traffic", "main")), b"free", 0, 1, 9)
    actions = on_data(state, data, ADHOC, 1.2)
    assert actions == [CacheInsert(data), ForwardBroadcast(data)]
    assert len(state.pit) == 0


def test_data_fans_out_per_downstream_face_kind():
    state = node(LOCAL, ADHOC, LINK)
    state.pit.record(interest(nonce=1), LOCAL.id, 1.0)
    state.pit.record(interest(nonce=2), ADHOC.id, 1.0)
    state.pit.record(interest(nonce=3), LINK.id, 1.0)
    data = make_data(Name(("traffic", "main")), b"free", 0, 1, 9)
    actions = on_data(state, data, ADHOC, 1.2)
    assert actions == [
        CacheInsert(data),
        DeliverToApp(data, LOCAL),
        ForwardBroadcast(data),
        ForwardUnicast(data, LINK),
    ]


def test_data_skips_vanished_downstream_faces():
    state = node()
    state.pit.record(interest(), 9, 1.0)  # face 9 no longer exists
    data = make_data(Name(("traffic", "main")), b"free", 0, 1, 9)
    actions = on_data(state, data, ADHOC, 1.2)
    assert actions == [CacheInsert(data)]


def test_expired_pit_entry_does_not_route_data():
    state = node()
    on_interest(state, interest(), LOCAL, 1.0, GRAPH)
    data = make_data(Name(("traffic", "main")), b"free", 0, 1, 9)
    actions = on_data(state, data, ADHOC, 9.0)  # past the 4 s entry lifetime
    assert actions == [CacheInsert(data)]


def test_strategy_constants_are_distinct():
    assert CONTROLLED_FLOOD != GREEDY_GEO
    assert DROP_PRODUCER_DELIVERED == "producer-delivered"
