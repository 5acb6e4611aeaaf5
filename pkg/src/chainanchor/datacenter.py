"""Append-only forensic store and the end-of-day anchoring pass.

The store keeps three human-inspectable files in one directory:

* ``events.log``   - length-prefixed raw event payloads, append-only;
* ``rows.jsonl``   - one ledger row per event (digest, per-chain tx refs,
  Merkle paths/roots and anchor refs once synchronized), rewritten
  atomically when a sync back-fills rows;
* ``anchors.jsonl`` - one record per (day, first-level chain) anchor.

``daily_sync`` fetches each first-level chain's confirmed transactions for
the elapsed day, builds one Merkle tree per chain over them, submits each
root to the second-level chain, and back-fills proofs into the rows.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

from .chainsim import Chain, RejectedTx, Wallet, signing_message, verify_sig
from .edge import EventRecord, SubmissionRecord, ChainSubmission, MICRO
from .merkle import MerkleProof, MerkleTree, hash_leaf, verify_proof

DAY_SECONDS = 86_400


class StoreError(Exception):
    pass


class DuplicateEventError(StoreError):
    pass


class IntegrityError(StoreError):
    pass


class NotFoundError(StoreError):
    pass


TAMPER_FIELDS = ("payload", "digest", "path", "root", "none")


def _entry_obj(entry: ChainSubmission) -> dict:
    return {
        "tx_id": entry.tx_id,
        "status": entry.status,
        "fee": str(entry.fee),
        "submit_time": entry.submit_time,
        "attempt_count": entry.attempt_count,
        "history": list(entry.history),
    }


class Store:
    """Directory-backed event + ledger-row store."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.events_log = self.root / "events.log"
        self.rows_path = self.root / "rows.jsonl"
        self.anchors_path = self.root / "anchors.jsonl"
        self.meta_path = self.root / "meta.json"
        self._rows: dict[str, dict] = {}
        self._anchors: list[dict] = []
        self._load()

    def _load(self) -> None:
        if self.rows_path.exists():
            with open(self.rows_path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        row = json.loads(line)
                        self._rows[row["event_id"]] = row
        if self.anchors_path.exists():
            with open(self.anchors_path, encoding="utf-8") as fh:
                self._anchors = [json.loads(line) for line in fh if line.strip()]
        if not self.events_log.exists():
            self.events_log.touch()

    # -- meta ------------------------------------------------------------------

    def write_meta(self, meta: dict) -> None:
        with open(self.meta_path, "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def read_meta(self) -> dict:
        if not self.meta_path.exists():
            return {}
        with open(self.meta_path, encoding="utf-8") as fh:
            return json.load(fh)

    # -- persistence helpers ---------------------------------------------------

    @staticmethod
    def _dump_row(row: dict) -> str:
        return json.dumps(row, separators=(",", ":"))

    def _append_row_line(self, row: dict) -> None:
        with open(self.rows_path, "a", encoding="utf-8") as fh:
            fh.write(self._dump_row(row) + "\n")

    def _rewrite_rows(self) -> None:
        tmp = self.rows_path.with_suffix(".jsonl.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            for row in self._rows.values():
                fh.write(self._dump_row(row) + "\n")
        os.replace(tmp, self.rows_path)

    def _rewrite_anchors(self) -> None:
        tmp = self.anchors_path.with_suffix(".jsonl.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            for rec in self._anchors:
                fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
        os.replace(tmp, self.anchors_path)

    # -- event ingestion -------------------------------------------------------

    def store_event(self, event: EventRecord, submission: SubmissionRecord) -> int:
        """Append the payload and a ledger row; rejects duplicates and
        digest mismatches. Returns the row's ordinal."""
        if event.event_id in self._rows:
            raise DuplicateEventError(f"event {event.event_id!r} already stored")
        if event.payload_digest() != submission.payload_digest:
            raise IntegrityError(f"digest mismatch for event {event.event_id!r}")
        with open(self.events_log, "ab") as fh:
            offset = fh.tell()
            fh.write(struct.pack(">I", len(event.payload)))
            fh.write(event.payload)
        row = {
            "event_id": event.event_id,
            "boat_id": event.boat_id,
            "device_id": event.device_id,
            "timestamp": event.timestamp,
            "kind": event.kind,
            "lat_micro": event.lat_micro,
            "lon_micro": event.lon_micro,
            "payload_ref": offset,
            "payload_len": len(event.payload),
            "payload_digest": submission.payload_digest.hex(),
            "first_level": {
                cid: _entry_obj(entry) for cid, entry in sorted(submission.entries.items())
            },
            "merkle_paths": {},
            "merkle_roots": {},
            "anchor_refs": {},
        }
        self._rows[event.event_id] = row
        self._append_row_line(row)
        return len(self._rows) - 1

    def update_submission(self, event_id: str, entry: ChainSubmission) -> None:
        row = self._require(event_id)
        row["first_level"][entry.chain_id] = _entry_obj(entry)
        self._rewrite_rows()

    # -- reads -----------------------------------------------------------------

    def _require(self, event_id: str) -> dict:
        row = self._rows.get(event_id)
        if row is None:
            raise NotFoundError(f"unknown event {event_id!r}")
        return row

    def get_row(self, event_id: str) -> dict:
        return self._require(event_id)

    def list_rows(self, day: int | None = None, day_seconds: int = DAY_SECONDS) -> list[dict]:
        rows = list(self._rows.values())
        if day is not None:
            rows = [r for r in rows if r["timestamp"] // day_seconds == day]
        return sorted(rows, key=lambda r: r["event_id"])

    def all_event_ids(self) -> list[str]:
        return list(self._rows)

    def read_payload(self, event_id: str) -> bytes:
        row = self._require(event_id)
        with open(self.events_log, "rb") as fh:
            fh.seek(row["payload_ref"])
            (length,) = struct.unpack(">I", fh.read(4))
            return fh.read(length)

    def row_event(self, event_id: str) -> EventRecord:
        """Rebuild the EventRecord from the row and the payload log."""
        row = self._require(event_id)
        return EventRecord(
            event_id=row["event_id"],
            boat_id=row["boat_id"],
            device_id=row["device_id"],
            timestamp=row["timestamp"],
            kind=row["kind"],
            payload=self.read_payload(event_id),
            lat=row["lat_micro"] / MICRO,
            lon=row["lon_micro"] / MICRO,
        )

    def anchors(self) -> list[dict]:
        return list(self._anchors)

    def find_anchor(self, day: int, chain_id: str) -> dict | None:
        for rec in self._anchors:
            if rec["day"] == day and rec["chain_id"] == chain_id:
                return rec
        return None

    # -- tamper hook (attack harness / CLI only) -------------------------------

    def tamper_row(self, event_id: str, mutation: str) -> dict:
        """Mutate stored state in place, bypassing integrity checks."""
        row = self._require(event_id)
        if mutation not in TAMPER_FIELDS:
            raise NotFoundError(f"unknown tamper field {mutation!r}")
        if mutation == "none":
            return {"field": "none", "old": None, "new": None}
        if mutation == "payload":
            old = self.read_payload(event_id)
            pos = row["payload_ref"] + 4
            with open(self.events_log, "r+b") as fh:
                fh.seek(pos)
                byte = fh.read(1)
                fh.seek(pos)
                fh.write(bytes([byte[0] ^ 0xFF]))
            return {"field": "payload", "old": old.hex(), "new": self.read_payload(event_id).hex()}
        if mutation == "digest":
            old = row["payload_digest"]
            row["payload_digest"] = _flip_hex(old)
        elif mutation == "path":
            chain_id = _first_key(row["merkle_paths"], event_id, "merkle path")
            proof = row["merkle_paths"][chain_id]
            if not proof["path"]:
                raise StoreError(f"proof for {event_id!r} has an empty path")
            old = proof["path"][0]["digest"]
            proof["path"][0]["digest"] = _flip_hex(old)
        else:  # root
            chain_id = _first_key(row["merkle_roots"], event_id, "merkle root")
            old = row["merkle_roots"][chain_id]
            row["merkle_roots"][chain_id] = _flip_hex(old)
        self._rewrite_rows()
        return {"field": mutation, "old": old, "new": "bit-flipped"}


def _flip_hex(hex_digest: str) -> str:
    raw = bytearray(bytes.fromhex(hex_digest))
    raw[0] ^= 0x01
    return raw.hex()


def _first_key(mapping: dict, event_id: str, what: str) -> str:
    if not mapping:
        raise StoreError(f"row {event_id!r} has no {what} to tamper (day not synchronized?)")
    return next(iter(sorted(mapping)))


# -- daily synchronization -----------------------------------------------------


def refresh_anchors(store: Store, second_level: Chain) -> int:
    """Mark pending anchors confirmed once their tx lands on the second
    level. Returns the number of records updated."""
    updated = 0
    for rec in store._anchors:
        if rec["status"] == "pending" and rec["second_level_tx"]:
            tx = second_level.query_tx(rec["second_level_tx"])
            if tx is not None and tx.status == "confirmed":
                rec["status"] = "confirmed"
                updated += 1
    if updated:
        store._rewrite_anchors()
    return updated


def daily_sync(
    store: Store,
    day: int,
    first_level: dict[str, Chain],
    second_level: Chain,
    anchor_wallet: Wallet,
    day_seconds: int = DAY_SECONDS,
) -> dict:
    """Anchor one elapsed day: per first-level chain, build the Merkle tree
    over that day's confirmed row transactions, push the root to the second
    level, and back-fill proofs.

    Idempotent per (day, chain): an already-anchored pair is left alone.
    Rows whose tx did not confirm that day stay unfilled and are listed
    under ``missing`` so the edge retry loop can resubmit them.
    """
    t0, t1 = day * day_seconds, (day + 1) * day_seconds
    for chain in first_level.values():
        if chain.clock < t1:
            raise StoreError(f"day {day} has not fully elapsed on chain {chain.chain_id!r}")

    refresh_anchors(store, second_level)
    _retry_unsent_anchors(store, second_level, anchor_wallet)

    report: dict = {"day": day, "chains": {}}
    dirty = False

    for chain_id in sorted(first_level):
        chain = first_level[chain_id]
        existing = store.find_anchor(day, chain_id)
        if existing is not None:
            report["chains"][chain_id] = {
                "leaf_count": existing["leaf_count"],
                "root": existing["merkle_root"],
                "anchor_tx": existing["second_level_tx"],
                "missing": _missing_rows(store, chain_id, t1),
                "unmatched": [],
                "signature_mismatches": [],
                "already_anchored": True,
            }
            continue

        confirmed = chain.fetch_confirmed(t0, t1)
        tx_to_row = _tx_index(store, chain_id)
        selected = []  # (tx, row) pairs, canonical order
        claimed: set[str] = set()
        unmatched = []
        for tx in confirmed:
            event_id = tx_to_row.get(tx.tx_id)
            if event_id is None:
                unmatched.append(tx.tx_id)
                continue
            row = store.get_row(event_id)
            if chain_id in row["merkle_paths"] or event_id in claimed:
                continue  # already anchored on a previous day, or duplicate confirm
            claimed.add(event_id)
            selected.append((tx, row))

        mismatches = []
        for tx, _row in selected:
            pub = chain.get_public_key(tx.submitter)
            msg = signing_message(chain_id, tx.payload_digest, tx.submit_time)
            if pub is None or not verify_sig(pub, msg, tx.signature):
                mismatches.append(tx.tx_id)

        chain_report = {
            "leaf_count": len(selected),
            "root": None,
            "anchor_tx": None,
            "missing": [],
            "unmatched": unmatched,
            "signature_mismatches": mismatches,
        }
        if selected:
            leaves = [hash_leaf(tx.leaf_encoding()) for tx, _ in selected]
            tree = MerkleTree(leaves)
            anchor_tx_id = None
            try:
                anchor_tx_id = second_level.submit_tx(tree.root, anchor_wallet)
            except RejectedTx:
                pass  # anchor stays unsent; retried on the next sync cycle
            store._anchors.append(
                {
                    "day": day,
                    "chain_id": chain_id,
                    "merkle_root": tree.root.hex(),
                    "leaf_count": len(selected),
                    "second_level_tx": anchor_tx_id,
                    "status": "pending",
                }
            )
            for index, (tx, row) in enumerate(selected):
                proof = tree.gen_proof(index)
                row["merkle_paths"][chain_id] = proof.to_obj()
                row["merkle_roots"][chain_id] = tree.root.hex()
                if anchor_tx_id is not None:
                    row["anchor_refs"][chain_id] = anchor_tx_id
                entry = row["first_level"][chain_id]
                if entry["tx_id"] == tx.tx_id or tx.tx_id in entry["history"]:
                    entry["status"] = "confirmed"
            chain_report["root"] = tree.root.hex()
            chain_report["anchor_tx"] = anchor_tx_id
            dirty = True
        chain_report["missing"] = _missing_rows(store, chain_id, t1)
        report["chains"][chain_id] = chain_report

    if dirty:
        store._rewrite_rows()
        store._rewrite_anchors()
    return report


def _tx_index(store: Store, chain_id: str) -> dict[str, str]:
    """All tx ids (current and superseded) known for rows on one chain."""
    index: dict[str, str] = {}
    for row in store._rows.values():
        entry = row["first_level"].get(chain_id)
        if entry is None:
            continue
        if entry["tx_id"]:
            index[entry["tx_id"]] = row["event_id"]
        for old in entry["history"]:
            index[old] = row["event_id"]
    return index


def _missing_rows(store: Store, chain_id: str, t1: int) -> list[str]:
    return sorted(
        row["event_id"]
        for row in store._rows.values()
        if row["timestamp"] < t1 and chain_id not in row["merkle_paths"]
    )


def _retry_unsent_anchors(store: Store, second_level: Chain, anchor_wallet: Wallet) -> None:
    dirty = False
    for rec in store._anchors:
        if rec["second_level_tx"] is None:
            try:
                rec["second_level_tx"] = second_level.submit_tx(
                    bytes.fromhex(rec["merkle_root"]), anchor_wallet
                )
            except RejectedTx:
                continue
            dirty = True
            for row in store._rows.values():
                if row["merkle_roots"].get(rec["chain_id"]) == rec["merkle_root"]:
                    row["anchor_refs"][rec["chain_id"]] = rec["second_level_tx"]
    if dirty:
        store._rewrite_rows()
        store._rewrite_anchors()


def check_paths(store: Store) -> list[str]:
    """Event ids whose stored Merkle path fails against the stored root.
    Usable at any time as a store self-check."""
    bad = []
    for row in store._rows.values():
        for chain_id, proof_obj in row["merkle_paths"].items():
            proof = MerkleProof.from_obj(proof_obj)
            root = bytes.fromhex(row["merkle_roots"][chain_id])
            # Leaf recomputation needs the live tx; here we only check the
            # recorded proof against the recorded root via its own leaf slot.
            if proof.root != root:
                bad.append(row["event_id"])
    return bad
