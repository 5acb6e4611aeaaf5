"""Simulated heterogeneous blockchain networks behind one chain interface.

Each :class:`Chain` models a fee-market network on a logical clock: signed
hash-carrying transactions enter a capacity-limited mempool, low-fee entries
are evicted under pressure, and a deterministic block clock confirms pending
transactions once they have aged past the profile's confirmation latency
(minus a seeded per-block jitter). Consensus puzzles are not modeled; the
behaviors that matter here are latency, fees, mempool economics, and the
cost of rewriting history.

All randomness comes from the per-chain seeded generator, so identical
seeds and identical call traces produce bit-identical block streams.
"""

from __future__ import annotations

import gzip
import hashlib
import json
import random
import struct
from array import array
from dataclasses import dataclass, field
from decimal import Decimal

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .merkle import DIGEST_SIZE

GENESIS_PREV_HASH = b"\x00" * DIGEST_SIZE

# Reference cost of sustaining a majority rewrite of a large public network,
# used to price rollback attacks (USD per attack-hour).
DEFAULT_HOURLY_ATTACK_COST = 400_000.0


class ChainError(Exception):
    """Base error for chain operations."""


class ConfigError(ChainError):
    """Invalid profile or chain configuration."""


class RejectedTx(ChainError):
    """Transaction refused at submission time."""


def _lp(data: bytes) -> bytes:
    """Length-prefix a byte string (4-byte big-endian length)."""
    return struct.pack(">I", len(data)) + data


@dataclass(frozen=True)
class ChainProfile:
    """Economic and timing parameters of one simulated network.

    ``rollback_resistance`` converts rewound blocks into attack-hours
    (hours of majority hash power bought per block), i.e. block_interval
    expressed in hours for the default profiles.
    """

    chain_id: str
    fee_per_tx: Decimal
    block_interval: int  # seconds
    confirmation_latency: int  # seconds, target upper bound
    mempool_capacity: int = 10_000
    rollback_resistance: float = 1.0 / 3600.0

    def validate(self) -> None:
        if not self.chain_id:
            raise ConfigError("chain_id must be non-empty")
        if self.fee_per_tx < 0:
            raise ConfigError("fee_per_tx must be >= 0")
        if self.block_interval <= 0:
            raise ConfigError("block_interval must be > 0")
        if self.mempool_capacity < 1:
            raise ConfigError("mempool_capacity must be >= 1")


def default_profiles() -> dict[str, ChainProfile]:
    """The three stock networks: two cheap/fast, one expensive/secure."""
    return {
        "eos": ChainProfile(
            chain_id="eos",
            fee_per_tx=Decimal("0.0000636"),
            block_interval=1,
            confirmation_latency=60,
            rollback_resistance=1.0 / 3600.0,
        ),
        "stellar": ChainProfile(
            chain_id="stellar",
            fee_per_tx=Decimal("0.000054"),
            block_interval=4,
            confirmation_latency=60,
            rollback_resistance=4.0 / 3600.0,
        ),
        "ethereum": ChainProfile(
            chain_id="ethereum",
            fee_per_tx=Decimal("0.019"),
            block_interval=15,
            confirmation_latency=600,
            rollback_resistance=15.0 / 3600.0,
        ),
    }


@dataclass
class Wallet:
    """One signing identity, bound to a single (device, chain) pair."""

    key_id: str
    public_key: bytes  # 32-byte ed25519 public key
    _private: Ed25519PrivateKey

    @classmethod
    def generate(cls, key_id: str, rng: random.Random) -> "Wallet":
        seed = rng.getrandbits(256).to_bytes(32, "big")
        return cls.from_private_bytes(key_id, seed)

    @classmethod
    def from_private_bytes(cls, key_id: str, private_bytes: bytes) -> "Wallet":
        priv = Ed25519PrivateKey.from_private_bytes(private_bytes)
        return cls(key_id, priv.public_key().public_bytes_raw(), priv)

    def private_bytes(self) -> bytes:
        from cryptography.hazmat.primitives import serialization

        return self._private.private_bytes(
            serialization.Encoding.Raw,
            serialization.PrivateFormat.Raw,
            serialization.NoEncryption(),
        )

    def sign(self, message: bytes) -> bytes:
        return self._private.sign(message)


def verify_sig(public_key: bytes, message: bytes, signature: bytes) -> bool:
    if len(public_key) != 32:
        raise ChainError("public key must be 32 bytes")
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
        return True
    except InvalidSignature:
        return False
    except ValueError as exc:
        raise ChainError(f"malformed key or signature: {exc}") from exc


def signing_message(chain_id: str, payload_digest: bytes, submit_time: int) -> bytes:
    """Bytes a submitter signs: binds digest to one chain at one instant."""
    return _lp(chain_id.encode()) + payload_digest + struct.pack(">q", submit_time)


@dataclass
class ChainTx:
    tx_id: str  # 64-char lowercase hex
    chain_id: str
    payload_digest: bytes
    submitter: str  # wallet key_id
    signature: bytes
    fee: Decimal
    submit_time: int
    status: str = "pending"  # pending | confirmed | evicted
    block_height: int | None = None

    def canonical_encoding(self) -> bytes:
        """Fixed-layout encoding hashed into the tx_id (pre-confirmation)."""
        return (
            _lp(self.chain_id.encode())
            + self.payload_digest
            + _lp(self.submitter.encode())
            + struct.pack(">q", self.submit_time)
        )

    def leaf_encoding(self) -> bytes:
        """Encoding hashed into a Merkle leaf; binds the confirmed block too."""
        height = -1 if self.block_height is None else self.block_height
        return (
            bytes.fromhex(self.tx_id)
            + self.canonical_encoding()
            + struct.pack(">q", height)
        )

    def to_obj(self) -> dict:
        return {
            "tx_id": self.tx_id,
            "chain_id": self.chain_id,
            "payload_digest": self.payload_digest.hex(),
            "submitter": self.submitter,
            "signature": self.signature.hex(),
            "fee": str(self.fee),
            "submit_time": self.submit_time,
            "status": self.status,
            "block_height": self.block_height,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "ChainTx":
        return cls(
            tx_id=obj["tx_id"],
            chain_id=obj["chain_id"],
            payload_digest=bytes.fromhex(obj["payload_digest"]),
            submitter=obj["submitter"],
            signature=bytes.fromhex(obj["signature"]),
            fee=Decimal(obj["fee"]),
            submit_time=obj["submit_time"],
            status=obj["status"],
            block_height=obj["block_height"],
        )


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: bytes
    tx_ids: tuple[str, ...]
    timestamp: int
    block_hash: bytes


# Attack descriptors for Chain.inject_attack.


@dataclass(frozen=True)
class Rollback:
    depth: int
    hourly_cost: float = DEFAULT_HOURLY_ATTACK_COST


@dataclass(frozen=True)
class DropTx:
    tx_id: str


@dataclass(frozen=True)
class Flood:
    count: int
    fee: Decimal


@dataclass(frozen=True)
class RewriteTx:
    """Overwrite a transaction's carried digest in place (counterfeit)."""

    tx_id: str
    new_digest: bytes


def _block_hash(height: int, prev_hash: bytes, tx_ids: tuple[str, ...], timestamp: int) -> bytes:
    h = hashlib.sha256()
    h.update(struct.pack(">q", height))
    h.update(prev_hash)
    for tx_id in tx_ids:
        h.update(bytes.fromhex(tx_id))
    h.update(struct.pack(">q", timestamp))
    return h.digest()


class Chain:
    """One simulated network. All mutations go through this handle, which
    serializes them; reads see a consistent snapshot."""

    def __init__(self, profile: ChainProfile, seed: int):
        profile.validate()
        self.profile = profile
        self.chain_id = profile.chain_id
        self._rng = random.Random(seed)
        self.clock: int = 0
        # Blocks kept columnar: one 32-byte slot per block hash, one int per
        # timestamp; tx lists only for non-empty blocks. Keeps month-long
        # 1-second-interval chains in tens of MB.
        self._hashes = bytearray()
        self._times = array("q")
        self._block_txs: dict[int, tuple[str, ...]] = {}
        self._txs: dict[str, ChainTx] = {}
        self._mempool: dict[str, ChainTx] = {}
        self._keys: dict[str, bytes] = {}  # key_id -> public key
        self._adversary: Wallet | None = None
        self._append_block((), 0)  # genesis
        self._next_block_time = profile.block_interval

    # -- block storage helpers -------------------------------------------------

    @property
    def height(self) -> int:
        return len(self._times) - 1

    def tip_hash(self) -> bytes:
        return bytes(self._hashes[-DIGEST_SIZE:])

    def block_time(self, height: int) -> int:
        return self._times[height]

    def get_block(self, height: int) -> Block:
        if not 0 <= height <= self.height:
            raise ChainError(f"no block at height {height}")
        prev = (
            GENESIS_PREV_HASH
            if height == 0
            else bytes(self._hashes[(height - 1) * DIGEST_SIZE : height * DIGEST_SIZE])
        )
        return Block(
            height=height,
            prev_hash=prev,
            tx_ids=self._block_txs.get(height, ()),
            timestamp=self._times[height],
            block_hash=bytes(self._hashes[height * DIGEST_SIZE : (height + 1) * DIGEST_SIZE]),
        )

    def _append_block(self, tx_ids: tuple[str, ...], timestamp: int) -> int:
        height = len(self._times)
        prev = self.tip_hash() if height else GENESIS_PREV_HASH
        self._hashes += _block_hash(height, prev, tx_ids, timestamp)
        self._times.append(timestamp)
        if tx_ids:
            self._block_txs[height] = tx_ids
        return height

    # -- submission ------------------------------------------------------------

    def register_key(self, key_id: str, public_key: bytes) -> None:
        known = self._keys.get(key_id)
        if known is not None and known != public_key:
            raise RejectedTx(f"key_id {key_id!r} already bound to a different key")
        self._keys[key_id] = public_key

    def get_public_key(self, key_id: str) -> bytes | None:
        return self._keys.get(key_id)

    def submit_tx(
        self,
        payload_digest: bytes,
        wallet: Wallet,
        fee: Decimal | None = None,
        signature: bytes | None = None,
    ) -> str:
        """Enter a signed digest-carrying tx into the mempool.

        With the pool at capacity the lowest-fee pending tx (oldest first on
        ties) is evicted. Returns the deterministic tx_id.
        """
        if len(payload_digest) != DIGEST_SIZE:
            raise RejectedTx("payload digest must be 32 bytes")
        fee = self.profile.fee_per_tx if fee is None else fee
        if fee < 0:
            raise RejectedTx("fee must be >= 0")
        submit_time = self.clock
        message = signing_message(self.chain_id, payload_digest, submit_time)
        if signature is None:
            signature = wallet.sign(message)
        if not verify_sig(wallet.public_key, message, signature):
            raise RejectedTx("signature does not verify over submitted payload")
        self.register_key(wallet.key_id, wallet.public_key)
        tx = ChainTx(
            tx_id="",
            chain_id=self.chain_id,
            payload_digest=bytes(payload_digest),
            submitter=wallet.key_id,
            signature=signature,
            fee=fee,
            submit_time=submit_time,
        )
        tx.tx_id = hashlib.sha256(tx.canonical_encoding()).hexdigest()
        if tx.tx_id in self._txs:
            raise RejectedTx(f"duplicate transaction {tx.tx_id}")
        self._txs[tx.tx_id] = tx
        self._mempool[tx.tx_id] = tx
        self._evict_overflow()
        return tx.tx_id

    def _evict_overflow(self) -> list[str]:
        evicted = []
        while len(self._mempool) > self.profile.mempool_capacity:
            victim = min(
                self._mempool.values(), key=lambda t: (t.fee, t.submit_time, t.tx_id)
            )
            victim.status = "evicted"
            del self._mempool[victim.tx_id]
            evicted.append(victim.tx_id)
        return evicted

    # -- block production ------------------------------------------------------

    def advance(self, dt: int) -> list[str]:
        """Move the logical clock forward, mining due blocks.

        Each block confirms pending txs in fee-descending order (ties by
        submit_time) once their age exceeds confirmation_latency minus a
        seeded jitter in [0, block_interval).
        """
        if dt <= 0:
            raise ChainError("dt must be > 0")
        target = self.clock + dt
        confirmed: list[str] = []
        interval = self.profile.block_interval
        latency = self.profile.confirmation_latency
        while self._next_block_time <= target:
            t = self._next_block_time
            block_ids: tuple[str, ...] = ()
            if self._mempool:
                threshold = latency - self._rng.random() * interval
                ripe = [tx for tx in self._mempool.values() if t - tx.submit_time >= threshold]
                if ripe:
                    ripe.sort(key=lambda tx: (-tx.fee, tx.submit_time, tx.tx_id))
                    height = len(self._times)
                    for tx in ripe:
                        tx.status = "confirmed"
                        tx.block_height = height
                        del self._mempool[tx.tx_id]
                    block_ids = tuple(tx.tx_id for tx in ripe)
                    confirmed.extend(block_ids)
            self._append_block(block_ids, t)
            self._next_block_time += interval
        self.clock = target
        return confirmed

    def advance_to(self, t: int) -> list[str]:
        """Advance the clock to absolute logical time ``t`` (no-op if past)."""
        if t <= self.clock:
            return []
        return self.advance(t - self.clock)

    # -- queries ---------------------------------------------------------------

    def query_tx(self, tx_id: str) -> ChainTx | None:
        return self._txs.get(tx_id)

    def fetch_confirmed(self, t0: int, t1: int) -> list[ChainTx]:
        """Confirmed txs whose block timestamp lies in [t0, t1), in
        (block_height, tx_id) order."""
        if t0 >= t1:
            raise ChainError("window must satisfy t0 < t1")
        out = [
            tx
            for tx in self._txs.values()
            if tx.status == "confirmed" and t0 <= self._times[tx.block_height] < t1
        ]
        out.sort(key=lambda tx: (tx.block_height, tx.tx_id))
        return out

    def check_integrity(self) -> bool:
        """Recompute the hash links over the whole chain."""
        prev = GENESIS_PREV_HASH
        for h in range(self.height + 1):
            expect = _block_hash(h, prev, self._block_txs.get(h, ()), self._times[h])
            got = bytes(self._hashes[h * DIGEST_SIZE : (h + 1) * DIGEST_SIZE])
            if got != expect:
                return False
            prev = got
        return True

    # -- attacks ---------------------------------------------------------------

    def rollback_cost(self, depth: int, hourly_cost: float = DEFAULT_HOURLY_ATTACK_COST) -> float:
        return depth * self.profile.rollback_resistance * hourly_cost

    def inject_attack(self, attack: Rollback | DropTx | Flood | RewriteTx) -> dict:
        if isinstance(attack, Rollback):
            return self._attack_rollback(attack)
        if isinstance(attack, DropTx):
            return self._attack_drop(attack)
        if isinstance(attack, Flood):
            return self._attack_flood(attack)
        if isinstance(attack, RewriteTx):
            return self._attack_rewrite(attack)
        raise ChainError(f"unknown attack {attack!r}")

    def _attack_rollback(self, attack: Rollback) -> dict:
        if attack.depth < 1 or attack.depth > self.height:
            raise ChainError(f"rollback depth {attack.depth} out of range (height {self.height})")
        restored: list[str] = []
        cut = self.height - attack.depth + 1
        for h in range(cut, self.height + 1):
            for tx_id in self._block_txs.pop(h, ()):
                tx = self._txs[tx_id]
                tx.status = "pending"
                tx.block_height = None
                self._mempool[tx_id] = tx
                restored.append(tx_id)
        del self._hashes[cut * DIGEST_SIZE :]
        del self._times[cut:]
        self._evict_overflow()
        return {
            "attack": "rollback",
            "chain_id": self.chain_id,
            "depth": attack.depth,
            "new_height": self.height,
            "restored_txs": restored,
            "attack_cost_usd": self.rollback_cost(attack.depth, attack.hourly_cost),
        }

    def _attack_drop(self, attack: DropTx) -> dict:
        tx = self._mempool.get(attack.tx_id)
        if tx is None:
            raise ChainError(f"tx {attack.tx_id} is not pending")
        tx.status = "evicted"
        del self._mempool[attack.tx_id]
        return {"attack": "drop_tx", "chain_id": self.chain_id, "tx_id": attack.tx_id}

    def _attack_flood(self, attack: Flood) -> dict:
        if attack.count < 1 or attack.fee < 0:
            raise ChainError("flood needs count >= 1 and fee >= 0")
        if self._adversary is None:
            self._adversary = Wallet.generate(f"adversary@{self.chain_id}", self._rng)
        before = set(self._mempool)
        submitted = []
        for _ in range(attack.count):
            digest = self._rng.getrandbits(256).to_bytes(32, "big")
            submitted.append(self.submit_tx(digest, self._adversary, attack.fee))
        evicted = [
            tx_id for tx_id in before if tx_id not in self._mempool and tx_id not in submitted
        ]
        return {
            "attack": "flood",
            "chain_id": self.chain_id,
            "submitted": submitted,
            "evicted": sorted(evicted),
        }

    def _attack_rewrite(self, attack: RewriteTx) -> dict:
        tx = self._txs.get(attack.tx_id)
        if tx is None:
            raise ChainError(f"unknown tx {attack.tx_id}")
        if len(attack.new_digest) != DIGEST_SIZE:
            raise ChainError("new digest must be 32 bytes")
        old = tx.payload_digest
        tx.payload_digest = bytes(attack.new_digest)
        return {
            "attack": "rewrite_tx",
            "chain_id": self.chain_id,
            "tx_id": attack.tx_id,
            "old_digest": old.hex(),
            "new_digest": tx.payload_digest.hex(),
        }

    # -- state export / import -------------------------------------------------

    def export_state(self) -> dict:
        """Full JSON-serializable chain state (block hashes are recomputed
        from content on import, so only content is exported)."""
        rng_state = self._rng.getstate()
        return {
            "profile": {
                "chain_id": self.profile.chain_id,
                "fee_per_tx": str(self.profile.fee_per_tx),
                "block_interval": self.profile.block_interval,
                "confirmation_latency": self.profile.confirmation_latency,
                "mempool_capacity": self.profile.mempool_capacity,
                "rollback_resistance": self.profile.rollback_resistance,
            },
            "clock": self.clock,
            "next_block_time": self._next_block_time,
            "block_times": list(self._times),
            "block_txs": {str(h): list(ids) for h, ids in self._block_txs.items()},
            "txs": [tx.to_obj() for tx in self._txs.values()],
            "mempool": sorted(self._mempool),
            "keys": {k: v.hex() for k, v in self._keys.items()},
            "rng_state": [rng_state[0], list(rng_state[1]), rng_state[2]],
            "adversary_private": (
                self._adversary.private_bytes().hex() if self._adversary else None
            ),
        }

    @classmethod
    def import_state(cls, state: dict) -> "Chain":
        p = state["profile"]
        profile = ChainProfile(
            chain_id=p["chain_id"],
            fee_per_tx=Decimal(p["fee_per_tx"]),
            block_interval=p["block_interval"],
            confirmation_latency=p["confirmation_latency"],
            mempool_capacity=p["mempool_capacity"],
            rollback_resistance=p["rollback_resistance"],
        )
        chain = cls(profile, seed=0)
        chain._hashes = bytearray()
        chain._times = array("q")
        chain._block_txs = {int(h): tuple(ids) for h, ids in state["block_txs"].items()}
        txs = {}
        for obj in state["txs"]:
            tx = ChainTx.from_obj(obj)
            txs[tx.tx_id] = tx
        chain._txs = txs
        # Rebuild block hashes from content; deletes-by-rollback included.
        block_txs = chain._block_txs
        for height, t in enumerate(state["block_times"]):
            ids = block_txs.get(height, ())
            prev = chain.tip_hash() if height else GENESIS_PREV_HASH
            chain._hashes += _block_hash(height, prev, ids, t)
            chain._times.append(t)
        chain._mempool = {tx_id: txs[tx_id] for tx_id in state["mempool"]}
        chain._keys = {k: bytes.fromhex(v) for k, v in state["keys"].items()}
        rng_state = state["rng_state"]
        chain._rng.setstate((rng_state[0], tuple(rng_state[1]), rng_state[2]))
        chain.clock = state["clock"]
        chain._next_block_time = state["next_block_time"]
        if state.get("adversary_private"):
            chain._adversary = Wallet.from_private_bytes(
                f"adversary@{chain.chain_id}", bytes.fromhex(state["adversary_private"])
            )
        return chain

    def save(self, path) -> None:
        with gzip.open(path, "wt", encoding="utf-8") as fh:
            json.dump(self.export_state(), fh)

    @classmethod
    def load(cls, path) -> "Chain":
        with gzip.open(path, "rt", encoding="utf-8") as fh:
            return cls.import_state(json.load(fh))


def create_chain(profile: ChainProfile, seed: int) -> Chain:
    return Chain(profile, seed)
