"""Seeded end-to-end world: fleet, chains, store, and the per-day loop.

One :class:`World` owns two first-level chains, one second-level chain,
per-(boat, chain) wallets, the data-center store, and a per-boat edge
pipeline. ``run_day`` plays one simulated day: retry stale submissions,
generate and process the day's events in time order, advance every chain
to midnight, then run the daily sync. Everything is driven by a single
run seed, so a rerun with the same config is byte-identical.
"""

from __future__ import annotations

import datetime as dt
import random
from dataclasses import dataclass, field
from pathlib import Path

from .chainsim import Chain, ChainProfile, ConfigError, Wallet, default_profiles
from .datacenter import DAY_SECONDS, Store, daily_sync, refresh_anchors
from .edge import EdgePipeline, EventRecord, SignificancePolicy, retry_unconfirmed

DEFAULT_ORIGIN = dt.datetime(2020, 1, 1, tzinfo=dt.timezone.utc)

# Permitted zone for the default fleet: a rectangle off a coastline.
DEFAULT_FENCE = ((25.0, -81.0), (25.0, -80.0), (26.0, -80.0), (26.0, -81.0))

RETRY_TIMEOUT = 3600  # seconds before a still-pending submission is escalated

# Events are generated early enough in the day that first-level confirmation
# (<= latency + 2 block intervals) lands before midnight.
_LAST_EVENT_MARGIN = 3600


@dataclass
class RunConfig:
    seed: int = 42
    boats: int = 10
    events_per_boat_per_day: int = 10
    days: int = 3
    store_dir: str | Path = "store"
    policy: SignificancePolicy | None = None
    first_level: tuple[str, ...] = ("eos", "stellar")
    second_level: str = "ethereum"
    profiles: dict[str, ChainProfile] = field(default_factory=default_profiles)
    origin: dt.datetime = DEFAULT_ORIGIN

    def __post_init__(self) -> None:
        if self.days < 1 or self.boats < 1 or self.events_per_boat_per_day < 1:
            raise ConfigError("days, boats and events_per_boat_per_day must be >= 1")
        if self.policy is None:
            self.policy = SignificancePolicy(fence=DEFAULT_FENCE)
        ids = list(self.first_level) + [self.second_level]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate chain_id in configuration")
        for cid in ids:
            if cid not in self.profiles:
                raise ConfigError(f"no profile for chain {cid!r}")


def day_to_date(day: int, origin: dt.datetime = DEFAULT_ORIGIN) -> str:
    return (origin + dt.timedelta(days=day)).date().isoformat()


def date_to_day(date_str: str, origin: dt.datetime = DEFAULT_ORIGIN) -> int:
    date = dt.date.fromisoformat(date_str)
    return (date - origin.date()).days


class World:
    def __init__(self, config: RunConfig):
        self.config = config
        self.rng = random.Random(config.seed)
        chain_seed = random.Random(config.seed ^ 0x5EED)
        self.first_level: dict[str, Chain] = {
            cid: Chain(config.profiles[cid], chain_seed.getrandbits(64))
            for cid in config.first_level
        }
        self.second_level = Chain(config.profiles[config.second_level], chain_seed.getrandbits(64))
        self.anchor_wallet = Wallet.generate("datacenter@second-level", self.rng)
        self.store = Store(config.store_dir)
        self.store.write_meta(
            {
                "seed": config.seed,
                "origin": config.origin.isoformat(),
                "first_level": sorted(self.first_level),
                "second_level": self.second_level.chain_id,
                "anchor_wallet_private": self.anchor_wallet.private_bytes().hex(),
            }
        )
        self.wallets: dict[str, dict[str, Wallet]] = {}
        self.pipelines: dict[str, EdgePipeline] = {}
        for b in range(config.boats):
            boat_id = f"boat-{b:03d}"
            wallets = {
                cid: Wallet.generate(f"{boat_id}/dev-0@{cid}", self.rng)
                for cid in self.first_level
            }
            self.wallets[boat_id] = wallets
            self.pipelines[boat_id] = EdgePipeline(
                boat_id, config.policy, self.first_level, wallets, self.store
            )
        self.sync_reports: list[dict] = []

    # -- clock helpers ---------------------------------------------------------

    def all_chains(self) -> list[Chain]:
        return list(self.first_level.values()) + [self.second_level]

    def advance_all(self, t: int) -> None:
        for chain in self.all_chains():
            chain.advance_to(t)

    @property
    def clock(self) -> int:
        return self.second_level.clock

    # -- event generation ------------------------------------------------------

    def generate_day_events(self, day: int) -> list[EventRecord]:
        """The day's feed across the fleet, time-ordered. Mostly significant
        events inside the fence, a sprinkle of out-of-zone and heartbeat
        traffic to exercise the filter."""
        policy = self.config.policy
        (lat0, lon0), (lat1, lon1) = DEFAULT_FENCE[0], DEFAULT_FENCE[2]
        events: list[EventRecord] = []
        start = day * DAY_SECONDS
        horizon = DAY_SECONDS - _LAST_EVENT_MARGIN
        for boat_id in sorted(self.pipelines):
            n = self.config.events_per_boat_per_day
            times = sorted(self.rng.sample(range(1, horizon), n + 2))
            for i, t in enumerate(times):
                if i < n:
                    kind = self.rng.choice(("accident", "speed_violation", "geofence_exit"))
                else:
                    kind = "heartbeat"  # filtered out: inside fence, insignificant
                inside = kind != "geofence_exit"
                if inside:
                    lat = round(self.rng.uniform(lat0 + 0.01, lat1 - 0.01), 6)
                    lon = round(self.rng.uniform(lon0 + 0.01, lon1 - 0.01), 6)
                else:
                    lat = round(self.rng.uniform(lat1 + 0.1, lat1 + 1.0), 6)
                    lon = round(self.rng.uniform(lon0 + 0.01, lon1 - 0.01), 6)
                events.append(
                    EventRecord(
                        event_id=f"{boat_id}-d{day:03d}-e{i:03d}",
                        boat_id=boat_id,
                        device_id="dev-0",
                        timestamp=start + t,
                        kind=kind,
                        payload=self.rng.getrandbits(512).to_bytes(64, "big"),
                        lat=lat,
                        lon=lon,
                    )
                )
        events.sort(key=lambda e: (e.timestamp, e.event_id))
        return events

    # -- day loop --------------------------------------------------------------

    def retry_stale(self, now: int) -> list[str]:
        resubmitted = []
        for boat_id, pipeline in sorted(self.pipelines.items()):
            resubmitted.extend(
                retry_unconfirmed(
                    pipeline.records,
                    self.first_level,
                    self.wallets[boat_id],
                    now=now,
                    timeout=RETRY_TIMEOUT,
                    store=self.store,
                )
            )
        return resubmitted

    def process_events(self, events: list[EventRecord], advance: bool = True) -> None:
        for event in events:
            if advance:
                self.advance_all(event.timestamp)
            self.pipelines[event.boat_id].accept(event)

    def sync_day(self, day: int) -> dict:
        report = daily_sync(
            self.store, day, self.first_level, self.second_level, self.anchor_wallet
        )
        report["date"] = day_to_date(day, self.config.origin)
        self.sync_reports.append(report)
        return report

    def run_day(self, day: int, events: list[EventRecord] | None = None) -> dict:
        day_start = day * DAY_SECONDS
        if self.clock < day_start:
            self.advance_all(day_start)
        self.retry_stale(day_start)
        self.process_events(self.generate_day_events(day) if events is None else events)
        self.advance_all((day + 1) * DAY_SECONDS)
        return self.sync_day(day)

    def settle(self) -> None:
        """Let outstanding second-level anchors confirm, then record it."""
        profile = self.second_level.profile
        self.second_level.advance(profile.confirmation_latency + 2 * profile.block_interval)
        refresh_anchors(self.store, self.second_level)

    def run(self) -> list[dict]:
        reports = [self.run_day(day) for day in range(self.config.days)]
        self.settle()
        return reports

    # -- persistence -----------------------------------------------------------

    def save_chains(self) -> None:
        chains_dir = Path(self.config.store_dir) / "chains"
        chains_dir.mkdir(exist_ok=True)
        for chain in self.all_chains():
            chain.save(chains_dir / f"{chain.chain_id}.json.gz")


def load_chains(store_dir: str | Path) -> tuple[dict[str, Chain], Chain, Wallet]:
    """Reload saved chain state and the anchoring credential for a store."""
    store = Store(store_dir)
    meta = store.read_meta()
    if not meta:
        raise ConfigError(f"store {store_dir} has no meta.json")
    chains_dir = Path(store_dir) / "chains"
    first_level = {}
    for cid in meta["first_level"]:
        path = chains_dir / f"{cid}.json.gz"
        if not path.exists():
            raise ConfigError(f"missing saved chain state {path}")
        first_level[cid] = Chain.load(path)
    second_level = Chain.load(chains_dir / f"{meta['second_level']}.json.gz")
    anchor_wallet = Wallet.from_private_bytes(
        "datacenter@second-level", bytes.fromhex(meta["anchor_wallet_private"])
    )
    return first_level, second_level, anchor_wallet
