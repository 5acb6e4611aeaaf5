"""Investigator workflow: decide whether a stored event is still trustworthy.

Two checks per first-level chain, composed into one verdict:

1. first level - recompute the event digest from the stored payload and
   compare it with the digest carried by the chain's live transaction;
2. anchor - rebuild the Merkle leaf from the chain's live transaction,
   fold it up the stored path, and compare both against the stored root
   and against the root anchored on the second-level chain.

``intact`` requires at least one first-level chain to pass everything
including its anchor; any explicit mismatch anywhere yields ``tampered``;
absent data (unsynced day, rolled-back tx) yields ``incomplete``. The
leaf is always rebuilt from the chain's live record, never from the store
copy, so a store/chain divergence is surfaced.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .chainsim import Chain
from .datacenter import Store, NotFoundError
from .merkle import MerkleProof, hash_leaf, verify_proof

VERDICT_INTACT = "intact"
VERDICT_TAMPERED = "tampered"
VERDICT_INCOMPLETE = "incomplete"


@dataclass
class VerificationReport:
    event_id: str
    first_level: dict[str, dict]
    anchors: dict[str, dict]
    verdict: str
    evidence: list[str] = field(default_factory=list)

    def to_obj(self) -> dict:
        return {
            "event_id": self.event_id,
            "first_level": self.first_level,
            "anchors": self.anchors,
            "verdict": self.verdict,
            "evidence": self.evidence,
        }


def verify_first_level(store: Store, event_id: str, chains: dict[str, Chain]) -> dict[str, dict]:
    """Per-chain: is the recorded tx confirmed, and does its digest match
    the digest recomputed from the stored payload?"""
    row = store.get_row(event_id)
    recomputed = store.row_event(event_id).payload_digest()
    stored_digest = bytes.fromhex(row["payload_digest"])
    results: dict[str, dict] = {}
    for chain_id in sorted(chains):
        entry = row["first_level"].get(chain_id)
        result = {
            "found": False,
            "digest_match": None,
            "stored_digest_match": recomputed == stored_digest,
        }
        if entry is not None and entry["tx_id"]:
            tx = chains[chain_id].query_tx(entry["tx_id"])
            if tx is not None and tx.status == "confirmed":
                result["found"] = True
                result["digest_match"] = tx.payload_digest == recomputed
        results[chain_id] = result
    return results


def verify_anchor(
    store: Store,
    event_id: str,
    first_level: dict[str, Chain],
    second_level: Chain,
) -> dict[str, dict]:
    """Per chain with a stored path: fold the live-tx leaf through the path
    (path_valid) and compare the stored root with the anchored one
    (root_on_second_level). Checks that cannot run are reported as None."""
    row = store.get_row(event_id)
    results: dict[str, dict] = {}
    for chain_id in sorted(first_level):
        proof_obj = row["merkle_paths"].get(chain_id)
        result = {"path_valid": None, "root_on_second_level": None}
        if proof_obj is None:
            results[chain_id] = result
            continue
        proof = MerkleProof.from_obj(proof_obj)
        stored_root = bytes.fromhex(row["merkle_roots"][chain_id])
        entry = row["first_level"].get(chain_id) or {}
        candidates = [entry.get("tx_id")] + list(entry.get("history", []))
        live_tx = None
        for tx_id in candidates:
            if not tx_id:
                continue
            tx = first_level[chain_id].query_tx(tx_id)
            if tx is not None and tx.status == "confirmed":
                live_tx = tx
                break
        if live_tx is not None:
            leaf = hash_leaf(live_tx.leaf_encoding())
            result["path_valid"] = verify_proof(leaf, proof, stored_root)
        anchor_tx_id = row["anchor_refs"].get(chain_id)
        if anchor_tx_id:
            anchor_tx = second_level.query_tx(anchor_tx_id)
            if anchor_tx is not None and anchor_tx.status == "confirmed":
                result["root_on_second_level"] = anchor_tx.payload_digest == stored_root
        results[chain_id] = result
    return results


def full_verify(
    store: Store,
    event_id: str,
    first_level: dict[str, Chain],
    second_level: Chain,
) -> VerificationReport:
    """Compose both checks into a verdict. Read-only everywhere."""
    first = verify_first_level(store, event_id, first_level)
    anchors = verify_anchor(store, event_id, first_level, second_level)

    evidence: list[str] = []
    mismatch = False
    for chain_id, result in first.items():
        if not result["stored_digest_match"]:
            mismatch = True
            evidence.append(f"{chain_id}: stored payload does not hash to the stored digest")
        if result["digest_match"] is False:
            mismatch = True
            evidence.append(f"{chain_id}: on-chain transaction carries a different digest")
        if not result["found"]:
            evidence.append(f"{chain_id}: recorded transaction not confirmed on chain")
    for chain_id, result in anchors.items():
        if result["path_valid"] is False:
            mismatch = True
            evidence.append(f"{chain_id}: Merkle path does not reproduce the stored root")
        if result["root_on_second_level"] is False:
            mismatch = True
            evidence.append(f"{chain_id}: anchored root differs from the stored root")
        if result["path_valid"] is None:
            evidence.append(f"{chain_id}: no verifiable Merkle path (unsynced or tx absent)")
        if result["root_on_second_level"] is None:
            evidence.append(f"{chain_id}: no confirmed anchor on the second level")

    fully_passing = any(
        first[cid]["found"]
        and first[cid]["digest_match"] is True
        and first[cid]["stored_digest_match"]
        and anchors[cid]["path_valid"] is True
        and anchors[cid]["root_on_second_level"] is True
        for cid in first
    )

    if mismatch:
        verdict = VERDICT_TAMPERED
    elif fully_passing:
        verdict = VERDICT_INTACT
    else:
        verdict = VERDICT_INCOMPLETE
    return VerificationReport(event_id, first, anchors, verdict, evidence)
