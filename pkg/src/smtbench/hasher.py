"""Domain-separated node/leaf hashing and the empty-subtree digest chain."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass


class InvalidDigestError(ValueError):
    """A digest argument does not have the scheme's digest length."""


def _sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def _sha256_x64(data: bytes) -> bytes:
    # Deliberately slow backend: 64 chained rounds. Used by timing experiments
    # to magnify hash cost relative to traversal cost.
    out = hashlib.sha256(data).digest()
    for _ in range(63):
        out = hashlib.sha256(out).digest()
    return out


# scheme_id -> (digest size in bytes, raw hash over tagged preimage)
_BACKENDS = {
    "sha256": (32, _sha256),
    "sha256x64": (32, _sha256_x64),
}


@dataclass(frozen=True)
class HashScheme:
    """Names a backend hash plus the single-byte tags that keep leaf digests
    and internal-node digests in disjoint domains."""

    scheme_id: str = "sha256"
    leaf_domain_tag: bytes = b"\x00"
    node_domain_tag: bytes = b"\x01"
    default_payload: bytes = b""

    def __post_init__(self) -> None:
        if self.scheme_id not in _BACKENDS:
            raise ValueError(f"unknown hash scheme {self.scheme_id!r}")
        if len(self.leaf_domain_tag) != 1 or len(self.node_domain_tag) != 1:
            raise ValueError("domain tags must be single bytes")
        if self.leaf_domain_tag == self.node_domain_tag:
            raise ValueError("leaf and node domain tags must differ")

    @property
    def digest_size(self) -> int:
        return _BACKENDS[self.scheme_id][0]


DEFAULT_SCHEME = HashScheme()
SLOW_SCHEME = HashScheme(scheme_id="sha256x64")


def hash_leaf(scheme: HashScheme, payload: bytes) -> bytes:
    """Digest of a leaf value: backend(leaf_tag || payload)."""
    return _BACKENDS[scheme.scheme_id][1](scheme.leaf_domain_tag + payload)


def hash_node(scheme: HashScheme, left: bytes, right: bytes) -> bytes:
    """Digest of an internal node: backend(node_tag || left || right)."""
    size = scheme.digest_size
    if len(left) != size or len(right) != size:
        raise InvalidDigestError(
            f"child digests must be {size} bytes, got {len(left)} and {len(right)}"
        )
    return _BACKENDS[scheme.scheme_id][1](scheme.node_domain_tag + left + right)


def default_digests(scheme: HashScheme, depth: int) -> list[bytes]:
    """Per-level digests of all-empty subtrees for a tree of the given depth.

    Index by level: entry `depth` is the default leaf digest, entry 0 is the
    root of a fully empty tree. Entry L satisfies
    table[L] == hash_node(table[L+1], table[L+1]).
    """
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    table = [b""] * (depth + 1)
    table[depth] = hash_leaf(scheme, scheme.default_payload)
    for level in range(depth - 1, -1, -1):
        table[level] = hash_node(scheme, table[level + 1], table[level + 1])
    return table


def format_digest_table(table: list[bytes]) -> str:
    """Fixture encoding of a default-digest table: one lowercase-hex digest
    per line, line i = level i."""
    return "".join(d.hex() + "\n" for d in table)
