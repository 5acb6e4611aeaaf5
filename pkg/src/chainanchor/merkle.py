"""Merkle trees over ordered 32-byte digests, with self-contained inclusion proofs.

Conventions (fixed; changing any of them changes every root):

* leaves are SHA-256 digests; ``hash_leaf`` prefixes raw data with ``0x00``
  and internal nodes are hashed with a ``0x01`` prefix, so a leaf can never
  be reinterpreted as an internal node (second-preimage hardening);
* at every level with an odd node count greater than one, the last node is
  duplicated before pairing, and pairing is strictly left-to-right;
* a single-leaf tree has height 0 and its root is the leaf itself.

Proofs carry explicit side flags ("L" means the sibling is concatenated on
the left of the running hash), so verification needs only the leaf, the
proof, and the expected root.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

DIGEST_SIZE = 32
LEAF_PREFIX = b"\x00"
NODE_PREFIX = b"\x01"

SIDE_LEFT = "L"
SIDE_RIGHT = "R"


class MerkleError(ValueError):
    """Invalid input to a Merkle operation."""


def _check_digest(value: bytes, what: str = "digest") -> bytes:
    if not isinstance(value, (bytes, bytearray)) or len(value) != DIGEST_SIZE:
        raise MerkleError(f"{what} must be {DIGEST_SIZE} bytes")
    return bytes(value)


def hash_leaf(data: bytes) -> bytes:
    """Hash raw data into a leaf digest: SHA-256(0x00 || data)."""
    if not data:
        raise MerkleError("leaf data must be non-empty")
    return hashlib.sha256(LEAF_PREFIX + bytes(data)).digest()


def hash_internal(left: bytes, right: bytes) -> bytes:
    """Hash two child digests into a parent: SHA-256(0x01 || left || right).

    Not commutative; the duplication case ``hash_internal(a, a)`` is valid.
    """
    return hashlib.sha256(
        NODE_PREFIX + _check_digest(left, "left") + _check_digest(right, "right")
    ).digest()


@dataclass(frozen=True)
class ProofStep:
    digest: bytes
    side: str  # SIDE_LEFT if the sibling goes on the left of the running hash

    def __post_init__(self) -> None:
        _check_digest(self.digest, "sibling digest")
        if self.side not in (SIDE_LEFT, SIDE_RIGHT):
            raise MerkleError(f"bad side flag {self.side!r}")


@dataclass(frozen=True)
class MerkleProof:
    leaf_index: int
    path: tuple[ProofStep, ...]
    root: bytes

    def __post_init__(self) -> None:
        if self.leaf_index < 0:
            raise MerkleError("leaf_index must be non-negative")
        _check_digest(self.root, "root")

    def to_obj(self) -> dict:
        """Canonical JSON-serializable form (lowercase hex, no prefixes)."""
        return {
            "leaf_index": self.leaf_index,
            "path": [{"digest": s.digest.hex(), "side": s.side} for s in self.path],
            "root": self.root.hex(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_obj(), separators=(",", ":"))

    @classmethod
    def from_obj(cls, obj: dict) -> "MerkleProof":
        try:
            steps = tuple(
                ProofStep(bytes.fromhex(s["digest"]), s["side"]) for s in obj["path"]
            )
            return cls(int(obj["leaf_index"]), steps, bytes.fromhex(obj["root"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise MerkleError(f"malformed proof object: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "MerkleProof":
        return cls.from_obj(json.loads(text))


class MerkleTree:
    """Full tree over an ordered, non-empty list of leaf digests."""

    def __init__(self, leaves: list[bytes]):
        if not leaves:
            raise MerkleError("at least one leaf required")
        level = [_check_digest(d, "leaf") for d in leaves]
        self.leaf_count = len(level)  # pre-duplication count
        if len(level) > 1 and len(level) % 2:
            level = level + [level[-1]]
        self.levels: list[list[bytes]] = [level]
        while len(level) > 1:
            nxt = [hash_internal(level[i], level[i + 1]) for i in range(0, len(level), 2)]
            if len(nxt) > 1 and len(nxt) % 2:
                nxt.append(nxt[-1])
            self.levels.append(nxt)
            level = nxt
        self.root: bytes = level[0]

    @property
    def height(self) -> int:
        return len(self.levels) - 1

    def gen_proof(self, index: int) -> MerkleProof:
        """Inclusion proof for the original leaf at ``index``."""
        if not 0 <= index < self.leaf_count:
            raise MerkleError(f"leaf index {index} out of range [0, {self.leaf_count})")
        path = []
        idx = index
        for level in self.levels[:-1]:
            if idx % 2 == 0:
                path.append(ProofStep(level[idx + 1], SIDE_RIGHT))
            else:
                path.append(ProofStep(level[idx - 1], SIDE_LEFT))
            idx //= 2
        return MerkleProof(index, tuple(path), self.root)


def build_tree(leaves: list[bytes]) -> MerkleTree:
    return MerkleTree(leaves)


def verify_proof(leaf: bytes, proof: MerkleProof, expected_root: bytes) -> bool:
    """Fold ``leaf`` up the proof path and compare against ``expected_root``.

    Pure function of its arguments: no tree access. Malformed inputs verify
    as False rather than raising.
    """
    try:
        node = _check_digest(leaf, "leaf")
        for step in proof.path:
            if step.side == SIDE_LEFT:
                node = hash_internal(step.digest, node)
            else:
                node = hash_internal(node, step.digest)
        return node == _check_digest(expected_root, "expected root")
    except MerkleError:
        return False
