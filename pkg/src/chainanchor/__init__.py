"""Two-level multi-chain anchoring simulator for IoT event forensics."""

from .merkle import MerkleProof, MerkleTree, build_tree, hash_internal, hash_leaf, verify_proof

__version__ = "0.1.0"

__all__ = [
    "MerkleProof",
    "MerkleTree",
    "build_tree",
    "hash_internal",
    "hash_leaf",
    "verify_proof",
    "__version__",
]
