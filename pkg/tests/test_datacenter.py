import pytest

from chainanchor.chainsim import DropTx
from chainanchor.datacenter import (
    DAY_SECONDS,
    DuplicateEventError,
    IntegrityError,
    NotFoundError,
    Store,
    daily_sync,
)
from chainanchor.edge import ChainSubmission, EventRecord, SubmissionRecord
from chainanchor.merkle import MerkleProof, hash_leaf, verify_proof
from conftest import build_world


def make_event(i: int, timestamp: int = 1000) -> EventRecord:
    return EventRecord(
        event_id=f"ev-{i:04d}",
        boat_id="boat-000",
        device_id="dev-0",
        timestamp=timestamp,
        kind="accident",
        payload=f"payload {i}".encode(),
        lat=0.5,
        lon=0.5,
    )


def make_submission(event: EventRecord) -> SubmissionRecord:
    from decimal import Decimal

    return SubmissionRecord(
        event_id=event.event_id,
        payload_digest=event.payload_digest(),
        created_at=event.timestamp,
        entries={
            "eos": ChainSubmission("eos", "aa" * 32, "pending", Decimal("0.001"), 0),
        },
    )


# --- store basics -------------------------------------------------------------


def test_store_and_read_round_trip(tmp_path):
    store = Store(tmp_path / "s")
    event = make_event(0)
    store.store_event(event, make_submission(event))
    assert store.read_payload(event.event_id) == event.payload
    assert store.row_event(event.event_id) == event


def test_duplicate_event_rejected(tmp_path):
    store = Store(tmp_path / "s")
    event = make_event(0)
    store.store_event(event, make_submission(event))
    with pytest.raises(DuplicateEventError):
        store.store_event(event, make_submission(event))


def test_digest_mismatch_rejected(tmp_path):
    store = Store(tmp_path / "s")
    event = make_event(0)
    submission = make_submission(event)
    submission.payload_digest = hash_leaf(b"wrong")
    with pytest.raises(IntegrityError):
        store.store_event(event, submission)


def test_offsets_monotone_and_full_rescan_matches(tmp_path):
    store = Store(tmp_path / "s")
    events = [make_event(i, timestamp=1000 + i) for i in range(100)]
    for event in events:
        store.store_event(event, make_submission(event))
    offsets = [store.get_row(e.event_id)["payload_ref"] for e in events]
    assert offsets == sorted(offsets)
    for event in events:
        row = store.get_row(event.event_id)
        recomputed = store.row_event(event.event_id).payload_digest()
        assert recomputed.hex() == row["payload_digest"]


def test_store_reload_from_disk(tmp_path):
    path = tmp_path / "s"
    store = Store(path)
    event = make_event(0)
    store.store_event(event, make_submission(event))
    again = Store(path)
    assert again.get_row(event.event_id) == store.get_row(event.event_id)
    assert again.read_payload(event.event_id) == event.payload


def test_get_row_unknown(tmp_path):
    store = Store(tmp_path / "s")
    with pytest.raises(NotFoundError):
        store.get_row("nope")


def test_list_rows_by_day(tmp_path):
    store = Store(tmp_path / "s")
    for i, day in enumerate([0, 0, 1]):
        event = make_event(i, timestamp=day * DAY_SECONDS + 100)
        store.store_event(event, make_submission(event))
    day0 = store.list_rows(day=0)
    assert [r["event_id"] for r in day0] == ["ev-0000", "ev-0001"]
    assert len(store.list_rows(day=1)) == 1
    assert len(store.list_rows()) == 3


# --- daily sync ---------------------------------------------------------------


def test_daily_sync_anchors_and_backfills(small_world):
    world = small_world
    store = world.store
    rows = store.list_rows()
    assert len(rows) == 6
    anchors = store.anchors()
    assert {(a["day"], a["chain_id"]) for a in anchors} == {(0, "eos"), (0, "stellar")}
    assert all(a["leaf_count"] == 6 for a in anchors)
    for row in rows:
        assert set(row["merkle_paths"]) == {"eos", "stellar"}
        assert set(row["merkle_roots"]) == {"eos", "stellar"}
        assert set(row["anchor_refs"]) == {"eos", "stellar"}


def test_sync_requires_elapsed_day(tmp_path):
    world = build_world(tmp_path / "s")
    world.process_events(world.generate_day_events(0))
    with pytest.raises(Exception):
        daily_sync(world.store, 0, world.first_level, world.second_level, world.anchor_wallet)


def test_sync_empty_day_produces_no_anchor(tmp_path):
    world = build_world(tmp_path / "s")
    world.advance_all(DAY_SECONDS)
    report = world.sync_day(0)
    assert all(c["leaf_count"] == 0 for c in report["chains"].values())
    assert world.store.anchors() == []


def test_sync_is_idempotent(small_world):
    world = small_world
    rows_before = world.store.rows_path.read_bytes()
    anchors_before = world.store.anchors_path.read_bytes()
    report = daily_sync(
        world.store, 0, world.first_level, world.second_level, world.anchor_wallet
    )
    assert all(c.get("already_anchored") for c in report["chains"].values())
    assert world.store.rows_path.read_bytes() == rows_before
    assert world.store.anchors_path.read_bytes() == anchors_before


def test_path_validity_from_live_txs(small_world):
    world = small_world
    for row in world.store.list_rows():
        for cid, chain in world.first_level.items():
            tx = chain.query_tx(row["first_level"][cid]["tx_id"])
            leaf = hash_leaf(tx.leaf_encoding())
            proof = MerkleProof.from_obj(row["merkle_paths"][cid])
            root = bytes.fromhex(row["merkle_roots"][cid])
            assert verify_proof(leaf, proof, root)


def test_anchor_consistency_on_second_level(small_world):
    world = small_world
    for anchor in world.store.anchors():
        assert anchor["status"] == "confirmed"
        tx = world.second_level.query_tx(anchor["second_level_tx"])
        assert tx.status == "confirmed"
        assert tx.payload_digest.hex() == anchor["merkle_root"]


def test_sync_completeness_bijection(small_world):
    world = small_world
    for cid, chain in world.first_level.items():
        confirmed = chain.fetch_confirmed(0, DAY_SECONDS)
        row_txids = {
            row["first_level"][cid]["tx_id"]
            for row in world.store.list_rows()
            if cid in row["merkle_paths"]
        }
        assert row_txids == {tx.tx_id for tx in confirmed}
        # leaf order is the canonical (block_height, tx_id) order
        anchor = world.store.find_anchor(0, cid)
        assert anchor["leaf_count"] == len(confirmed)
        for index, tx in enumerate(confirmed):
            event_id = next(
                r["event_id"]
                for r in world.store.list_rows()
                if r["first_level"][cid]["tx_id"] == tx.tx_id
            )
            proof = world.store.get_row(event_id)["merkle_paths"][cid]
            assert proof["leaf_index"] == index


def test_dropped_tx_rolls_into_next_day(tmp_path):
    world = build_world(tmp_path / "s", days=2)
    events = world.generate_day_events(0)
    world.process_events(events, advance=False)
    victim = world.pipelines["boat-000"].records[0]
    for cid, entry in victim.entries.items():
        world.first_level[cid].inject_attack(DropTx(entry.tx_id))
    world.advance_all(DAY_SECONDS)
    day0 = world.sync_day(0)
    for c in day0["chains"].values():
        assert victim.event_id in c["missing"]
    world.run_day(1, events=[])
    world.settle()
    row = world.store.get_row(victim.event_id)
    assert set(row["merkle_paths"]) == {"eos", "stellar"}
    # included in day 1's tree, not day 0's
    for cid in world.first_level:
        assert world.store.find_anchor(1, cid) is not None
        assert row["merkle_roots"][cid] == world.store.find_anchor(1, cid)["merkle_root"]


# --- tamper hook --------------------------------------------------------------


def test_tamper_payload_changes_bytes(small_world):
    store = small_world.store
    event_id = store.all_event_ids()[0]
    before = store.read_payload(event_id)
    result = store.tamper_row(event_id, "payload")
    assert result["field"] == "payload"
    assert store.read_payload(event_id) != before


def test_tamper_unknown_field_and_event(small_world):
    store = small_world.store
    with pytest.raises(NotFoundError):
        store.tamper_row(store.all_event_ids()[0], "bogus")
    with pytest.raises(NotFoundError):
        store.tamper_row("no-such-event", "payload")


def test_tamper_noop_is_noop(small_world):
    store = small_world.store
    event_id = store.all_event_ids()[0]
    before = store.rows_path.read_bytes()
    store.tamper_row(event_id, "none")
    assert store.rows_path.read_bytes() == before
