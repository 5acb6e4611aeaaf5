"""Executable threat scenarios against the full pipeline.

Four scripted attacks, each asserting the detection or mitigation the
two-level design is supposed to provide, plus a no-attack control:

* T1 - masquerade: a stolen single-chain key pushes a bogus digest to one
  chain only; the end-of-day sync's cross-chain coverage check flags the
  transaction that matches no stored row.
* T2 - mempool flood: high-fee spam evicts the fleet's pending txs; after
  the flood ceases, fee-escalating retries get every event anchored
  within two extra days.
* T3 - MitM drop: submitted txs are censored before confirmation; the sync
  reports them missing and the next day's resubmission recovers them.
* T4 - second-level counterfeit: rewriting an anchored root requires a
  deep rollback whose estimated cost is prohibitive, and if forced
  through anyway, the anchored root no longer matches the stored data.
* null - an attack-free month must produce zero detections.

Every scenario is deterministic under its seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from decimal import Decimal
from pathlib import Path

from .chainsim import DropTx, Flood, RewriteTx, Rollback, default_profiles
from .datacenter import DAY_SECONDS
from .merkle import hash_leaf
from .simulation import RunConfig, World
from .verifier import VERDICT_INTACT, VERDICT_TAMPERED, full_verify

THREAT_IDS = ("T1", "T2", "T3", "T4", "null")

FLOOD_MEMPOOL_CAPACITY = 64
ROLLBACK_HOURS = 6


class ScenarioError(Exception):
    """Scenario script references unknown entities or parameters."""


@dataclass(frozen=True)
class ThreatScenario:
    id: str
    seed: int = 42
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.id not in THREAT_IDS:
            raise ScenarioError(f"unknown threat id {self.id!r}; expected one of {THREAT_IDS}")

    @classmethod
    def from_obj(cls, obj: dict) -> "ThreatScenario":
        try:
            return cls(id=obj["id"], seed=int(obj.get("seed", 42)), params=obj.get("params", {}))
        except KeyError as exc:
            raise ScenarioError(f"scenario script missing field {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "ThreatScenario":
        with open(path, encoding="utf-8") as fh:
            return cls.from_obj(json.load(fh))


@dataclass
class ScenarioResult:
    threat_id: str
    detection: bool
    mitigation: bool
    details: dict

    def to_obj(self) -> dict:
        return {
            "threat_id": self.threat_id,
            "detection": self.detection,
            "mitigation": self.mitigation,
            "details": self.details,
        }


def _small_world(seed: int, store_dir, boats: int = 2, events: int = 3, **kwargs) -> World:
    config = RunConfig(
        seed=seed,
        boats=boats,
        events_per_boat_per_day=events,
        days=1,
        store_dir=store_dir,
        **kwargs,
    )
    return World(config)


def run_scenario(scenario: ThreatScenario, store_dir: str | Path) -> ScenarioResult:
    runner = {
        "T1": _run_t1,
        "T2": _run_t2,
        "T3": _run_t3,
        "T4": _run_t4,
        "null": _run_null,
    }[scenario.id]
    return runner(scenario, Path(store_dir))


def _run_t1(scenario: ThreatScenario, store_dir: Path) -> ScenarioResult:
    """Masquerade with a stolen single-chain key."""
    world = _small_world(scenario.seed, store_dir)
    target_chain = scenario.params.get("chain", "eos")
    if target_chain not in world.first_level:
        raise ScenarioError(f"unknown chain {target_chain!r}")
    world.process_events(world.generate_day_events(0))
    # The adversary holds boat-000's key for one chain only and injects a
    # digest that was never stored in the data center.
    stolen = world.wallets["boat-000"][target_chain]
    bogus_digest = hash_leaf(b"fabricated incident report")
    bogus_tx = world.first_level[target_chain].submit_tx(bogus_digest, stolen)
    world.advance_all(DAY_SECONDS)
    report = world.sync_day(0)
    world.settle()
    unmatched = report["chains"][target_chain]["unmatched"]
    others_clean = all(
        not report["chains"][cid]["unmatched"]
        for cid in world.first_level
        if cid != target_chain
    )
    detected = bogus_tx in unmatched and others_clean
    return ScenarioResult(
        "T1",
        detection=detected,
        mitigation=detected,
        details={
            "divergent_chain": target_chain if detected else None,
            "bogus_tx": bogus_tx,
            "unmatched": unmatched,
        },
    )


def _run_t2(scenario: ThreatScenario, store_dir: Path) -> ScenarioResult:
    """Mempool flood and eviction, then fee-escalating recovery."""
    profiles = {
        cid: (p if cid == "ethereum" else replace(p, mempool_capacity=FLOOD_MEMPOOL_CAPACITY))
        for cid, p in default_profiles().items()
    }
    world = _small_world(scenario.seed, store_dir, profiles=profiles)
    events = world.generate_day_events(0)
    # Submit everything without advancing time, then flood both chains
    # before any legitimate tx can confirm.
    world.process_events(events, advance=False)
    flood_fee = Decimal("1.0")
    for chain in world.first_level.values():
        chain.inject_attack(Flood(count=FLOOD_MEMPOOL_CAPACITY, fee=flood_fee))
    evicted = [
        entry.tx_id
        for pipeline in world.pipelines.values()
        for record in pipeline.records
        for entry in record.entries.values()
        if entry.tx_id and world.first_level[entry.chain_id].query_tx(entry.tx_id).status == "evicted"
    ]
    world.advance_all(DAY_SECONDS)
    day0 = world.sync_day(0)
    detected = bool(evicted) and any(c["missing"] for c in day0["chains"].values())
    # Flood has ceased; give the retry loop up to two extra days.
    recovered_day = None
    for day in (1, 2):
        report = world.run_day(day, events=[])
        if all(not c["missing"] for c in report["chains"].values()):
            recovered_day = day
            break
    world.settle()
    anchored = all(
        len(row["merkle_paths"]) == len(world.first_level) for row in world.store.list_rows()
    )
    return ScenarioResult(
        "T2",
        detection=detected,
        mitigation=anchored and recovered_day is not None,
        details={
            "evicted_count": len(evicted),
            "recovered_on_day": recovered_day,
            "rows": len(world.store.list_rows()),
        },
    )


def _run_t3(scenario: ThreatScenario, store_dir: Path) -> ScenarioResult:
    """MitM censorship of submitted transactions."""
    world = _small_world(scenario.seed, store_dir)
    events = world.generate_day_events(0)
    world.process_events(events, advance=False)
    dropped = 0
    for pipeline in world.pipelines.values():
        for record in pipeline.records:
            for entry in record.entries.values():
                if entry.tx_id:
                    world.first_level[entry.chain_id].inject_attack(DropTx(entry.tx_id))
                    dropped += 1
    world.advance_all(DAY_SECONDS)
    day0 = world.sync_day(0)
    detected = all(c["missing"] for c in day0["chains"].values())
    # Resubmission (modeling a switch to different network nodes) next day.
    day1 = world.run_day(1, events=[])
    world.settle()
    recovered = all(not c["missing"] for c in day1["chains"].values())
    return ScenarioResult(
        "T3",
        detection=detected,
        mitigation=recovered,
        details={"dropped": dropped, "missing_day0": day0["chains"]},
    )


def _run_t4(scenario: ThreatScenario, store_dir: Path) -> ScenarioResult:
    """Counterfeit on the second-level chain: price it, then force it."""
    world = _small_world(scenario.seed, store_dir)
    world.run_day(0)
    world.settle()  # anchors confirmed on the second level
    second = world.second_level
    depth = ROLLBACK_HOURS * 3600 // second.profile.block_interval
    report = second.inject_attack(Rollback(depth))
    cost = report["attack_cost_usd"]
    cost_prohibitive = cost >= 2_400_000
    # Force the rewrite through anyway: every anchor tx that fell back to
    # pending gets a counterfeit root, then the chain re-mines.
    rewritten = []
    for anchor in world.store.anchors():
        tx_id = anchor["second_level_tx"]
        if tx_id in report["restored_txs"]:
            second.inject_attack(RewriteTx(tx_id, hash_leaf(b"counterfeit root " + tx_id.encode())))
            rewritten.append(tx_id)
    second.advance(second.profile.confirmation_latency + 2 * second.profile.block_interval)
    verdicts = [
        full_verify(world.store, event_id, world.first_level, second).verdict
        for event_id in world.store.all_event_ids()
    ]
    counterfeit_detected = bool(verdicts) and all(v == VERDICT_TAMPERED for v in verdicts)
    return ScenarioResult(
        "T4",
        detection=cost_prohibitive and counterfeit_detected,
        mitigation=cost_prohibitive,
        details={
            "rollback_depth": depth,
            "attack_cost_usd": cost,
            "rewritten_anchors": rewritten,
            "verdicts": sorted(set(verdicts)),
        },
    )


def _run_null(scenario: ThreatScenario, store_dir: Path) -> ScenarioResult:
    """Attack-free control run: a month with zero detections."""
    days = int(scenario.params.get("days", 30))
    config = RunConfig(
        seed=scenario.seed,
        boats=2,
        events_per_boat_per_day=2,
        days=days,
        store_dir=store_dir,
    )
    world = World(config)
    reports = world.run()
    detections = sum(
        len(c["missing"]) + len(c["unmatched"]) + len(c["signature_mismatches"])
        for report in reports
        for c in report["chains"].values()
    )
    verdicts = [
        full_verify(world.store, event_id, world.first_level, world.second_level).verdict
        for event_id in world.store.all_event_ids()
    ]
    clean = detections == 0 and all(v == VERDICT_INTACT for v in verdicts)
    return ScenarioResult(
        "null",
        detection=False,
        mitigation=clean,
        details={"days": days, "detections": detections, "rows": len(verdicts)},
    )
