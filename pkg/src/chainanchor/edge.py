"""Boat-side pipeline: significance filtering, hashing, dual-chain submission.

An event is worth recording when its kind is inherently significant (an
accident, a speed violation, ...) or when the boat has left the permitted
zone. Significant events are canonically encoded, hashed, written to the
data-center store, and their digest is submitted to every configured
first-level chain; unconfirmed submissions are retried with fee escalation.
"""

from __future__ import annotations

import base64
import json
import struct
from dataclasses import dataclass, field
from decimal import Decimal

from .chainsim import Chain, RejectedTx, Wallet, _lp
from .merkle import hash_leaf

EVENT_KINDS = ("accident", "geofence_exit", "speed_violation", "heartbeat", "other")
DEFAULT_SIGNIFICANT_KINDS = frozenset({"accident", "geofence_exit", "speed_violation"})

MICRO = 1_000_000  # fixed-point scale for coordinates

_EDGE_EPS = 1e-9


class EdgeError(Exception):
    pass


class PolicyError(EdgeError):
    """Degenerate or inconsistent significance policy."""


@dataclass(frozen=True)
class EventRecord:
    event_id: str
    boat_id: str
    device_id: str
    timestamp: int  # logical seconds
    kind: str
    payload: bytes
    lat: float
    lon: float

    def __post_init__(self) -> None:
        if self.kind not in EVENT_KINDS:
            raise EdgeError(f"unknown event kind {self.kind!r}")
        if not self.payload:
            raise EdgeError("payload must be non-empty")
        if not -90.0 <= self.lat <= 90.0 or not -180.0 <= self.lon <= 180.0:
            raise EdgeError(f"coordinates out of range: ({self.lat}, {self.lon})")

    @property
    def lat_micro(self) -> int:
        return round(self.lat * MICRO)

    @property
    def lon_micro(self) -> int:
        return round(self.lon * MICRO)

    def canonical_encoding(self) -> bytes:
        """Byte layout every component hashes identically: length-prefixed
        identifiers, fixed-width time and fixed-point micro-degree coords."""
        return (
            _lp(self.event_id.encode())
            + _lp(self.boat_id.encode())
            + _lp(self.device_id.encode())
            + struct.pack(">q", self.timestamp)
            + _lp(self.kind.encode())
            + struct.pack(">q", self.lat_micro)
            + struct.pack(">q", self.lon_micro)
            + _lp(self.payload)
        )

    def payload_digest(self) -> bytes:
        return hash_leaf(self.canonical_encoding())

    def to_obj(self) -> dict:
        return {
            "event_id": self.event_id,
            "boat_id": self.boat_id,
            "device_id": self.device_id,
            "timestamp": self.timestamp,
            "kind": self.kind,
            "payload": base64.b64encode(self.payload).decode(),
            "lat": self.lat,
            "lon": self.lon,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "EventRecord":
        return cls(
            event_id=obj["event_id"],
            boat_id=obj["boat_id"],
            device_id=obj["device_id"],
            timestamp=int(obj["timestamp"]),
            kind=obj["kind"],
            payload=base64.b64decode(obj["payload"]),
            lat=float(obj["lat"]),
            lon=float(obj["lon"]),
        )


def load_events_jsonl(path) -> list[EventRecord]:
    events = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                events.append(EventRecord.from_obj(json.loads(line)))
    return events


def _polygon_area2(fence: tuple[tuple[float, float], ...]) -> float:
    area = 0.0
    n = len(fence)
    for i in range(n):
        y1, x1 = fence[i]
        y2, x2 = fence[(i + 1) % n]
        area += x1 * y2 - x2 * y1
    return area


@dataclass(frozen=True)
class SignificancePolicy:
    fence: tuple[tuple[float, float], ...]  # (lat, lon) vertices
    significant_kinds: frozenset[str] = DEFAULT_SIGNIFICANT_KINDS
    max_events_per_day: int = 10_000

    def __post_init__(self) -> None:
        if len(self.fence) < 3:
            raise PolicyError("fence needs at least 3 vertices")
        if abs(_polygon_area2(self.fence)) < _EDGE_EPS:
            raise PolicyError("fence polygon is degenerate (zero area)")
        if not self.significant_kinds:
            raise PolicyError("significant_kinds must be non-empty")
        unknown = self.significant_kinds - set(EVENT_KINDS)
        if unknown:
            raise PolicyError(f"unknown kinds in policy: {sorted(unknown)}")

    def to_obj(self) -> dict:
        return {
            "fence": [[lat, lon] for lat, lon in self.fence],
            "significant_kinds": sorted(self.significant_kinds),
            "max_events_per_day": self.max_events_per_day,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "SignificancePolicy":
        return cls(
            fence=tuple((float(a), float(b)) for a, b in obj["fence"]),
            significant_kinds=frozenset(obj["significant_kinds"]),
            max_events_per_day=int(obj.get("max_events_per_day", 10_000)),
        )

    @classmethod
    def load(cls, path) -> "SignificancePolicy":
        with open(path, encoding="utf-8") as fh:
            return cls.from_obj(json.load(fh))


def _on_segment(py: float, px: float, ay: float, ax: float, by: float, bx: float) -> bool:
    cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    if abs(cross) > _EDGE_EPS:
        return False
    return (
        min(ax, bx) - _EDGE_EPS <= px <= max(ax, bx) + _EDGE_EPS
        and min(ay, by) - _EDGE_EPS <= py <= max(ay, by) + _EDGE_EPS
    )


def point_in_polygon(lat: float, lon: float, fence: tuple[tuple[float, float], ...]) -> bool:
    """Ray casting on (lat, lon) vertices; a point on the boundary counts
    as inside."""
    n = len(fence)
    for i in range(n):
        ay, ax = fence[i]
        by, bx = fence[(i + 1) % n]
        if _on_segment(lat, lon, ay, ax, by, bx):
            return True
    inside = False
    for i in range(n):
        ay, ax = fence[i]
        by, bx = fence[(i + 1) % n]
        if (ay > lat) != (by > lat):
            x_cross = ax + (lat - ay) * (bx - ax) / (by - ay)
            if lon < x_cross:
                inside = not inside
    return inside


def filter_event(event: EventRecord, policy: SignificancePolicy) -> bool:
    """True iff the event must be recorded: significant kind, or position
    outside the permitted zone."""
    if event.kind in policy.significant_kinds:
        return True
    return not point_in_polygon(event.lat, event.lon, policy.fence)


@dataclass
class ChainSubmission:
    chain_id: str
    tx_id: str | None
    status: str  # pending | confirmed | evicted | failed
    fee: Decimal
    submit_time: int
    attempt_count: int = 1
    history: list[str] = field(default_factory=list)  # superseded tx_ids


@dataclass
class SubmissionRecord:
    event_id: str
    payload_digest: bytes
    created_at: int
    entries: dict[str, ChainSubmission]


def process_event(
    event: EventRecord,
    chains: dict[str, Chain],
    wallets: dict[str, Wallet],
    store=None,
) -> SubmissionRecord:
    """Hash, sign, and submit one significant event to every first-level
    chain, then persist it in the data-center store.

    A rejection on one chain is recorded as a failed entry and does not
    abort the submissions to the others.
    """
    digest = event.payload_digest()
    entries: dict[str, ChainSubmission] = {}
    for chain_id, chain in chains.items():
        wallet = wallets[chain_id]
        fee = chain.profile.fee_per_tx
        try:
            tx_id = chain.submit_tx(digest, wallet, fee)
            entries[chain_id] = ChainSubmission(chain_id, tx_id, "pending", fee, chain.clock)
        except RejectedTx:
            entries[chain_id] = ChainSubmission(chain_id, None, "failed", fee, chain.clock)
    record = SubmissionRecord(event.event_id, digest, min(c.clock for c in chains.values()), entries)
    if store is not None:
        store.store_event(event, record)
    return record


def retry_unconfirmed(
    records: list[SubmissionRecord],
    chains: dict[str, Chain],
    wallets: dict[str, Wallet],
    now: int,
    timeout: int,
    fee_multiplier: int = 2,
    store=None,
) -> list[str]:
    """Resubmit stale entries (evicted, failed, or pending past ``timeout``)
    at an escalated fee. The superseded tx_id is kept in the entry history."""
    if timeout <= 0:
        raise EdgeError("timeout must be > 0")
    resubmitted = []
    for record in records:
        for chain_id, entry in record.entries.items():
            chain = chains[chain_id]
            if entry.tx_id is not None:
                tx = chain.query_tx(entry.tx_id)
                if tx is not None:
                    entry.status = tx.status
            stale = entry.status in ("evicted", "failed") or (
                entry.status == "pending" and now - entry.submit_time > timeout
            )
            if not stale:
                continue
            new_fee = entry.fee * fee_multiplier
            try:
                tx_id = chain.submit_tx(record.payload_digest, wallets[chain_id], new_fee)
            except RejectedTx:
                entry.status = "failed"
                continue
            if entry.tx_id is not None:
                entry.history.append(entry.tx_id)
            entry.tx_id = tx_id
            entry.status = "pending"
            entry.fee = new_fee
            entry.submit_time = chain.clock
            entry.attempt_count += 1
            resubmitted.append(tx_id)
            if store is not None:
                store.update_submission(record.event_id, entry)
    return resubmitted


class EdgePipeline:
    """Per-boat loop: apply the policy, enforce the daily cap on events
    that are only positionally significant, and submit what passes."""

    def __init__(
        self,
        boat_id: str,
        policy: SignificancePolicy,
        chains: dict[str, Chain],
        wallets: dict[str, Wallet],
        store,
        day_seconds: int = 86_400,
    ):
        self.boat_id = boat_id
        self.policy = policy
        self.chains = chains
        self.wallets = wallets
        self.store = store
        self.day_seconds = day_seconds
        self.records: list[SubmissionRecord] = []
        self._day = -1
        self._day_count = 0

    def accept(self, event: EventRecord) -> SubmissionRecord | None:
        """Filter and, if the event survives, process it. Returns the
        submission record or None when the event was dropped."""
        if not filter_event(event, self.policy):
            return None
        day = event.timestamp // self.day_seconds
        if day != self._day:
            self._day, self._day_count = day, 0
        if (
            event.kind not in self.policy.significant_kinds
            and self._day_count >= self.policy.max_events_per_day
        ):
            return None  # rate cap drops positional-only events, never significant kinds
        self._day_count += 1
        record = process_event(event, self.chains, self.wallets, self.store)
        self.records.append(record)
        return record
