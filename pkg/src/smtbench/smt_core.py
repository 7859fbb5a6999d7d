"""Fixed-depth sparse Merkle tree with pruned storage.

Nodes use heap indexing: the root is index 1, children of j are 2j and 2j+1,
leaf k lives at heap index 2^depth + k. Only non-default nodes are kept in
the cache; absent entries resolve to the per-level default digest, which is
what makes empty subtrees free to store and non-membership proofs possible.

The leaf mutation primitives here deliberately do NOT refresh ancestor
hashes. Rehashing is the job of the engines in `batch`; between a mutation
and the next engine hash phase the cache invariant is allowed to be stale.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping

from .counters import CounterSet
from .hasher import DEFAULT_SCHEME, HashScheme, default_digests, hash_leaf, hash_node

MAX_DEPTH = 63  # heap indices stay within 64-bit unsigned range


class SmtError(Exception):
    """Base class for tree usage errors."""


class ConfigError(SmtError):
    pass


class LeafRangeError(SmtError):
    pass


class DuplicateLeafError(SmtError):
    pass


class MissingLeafError(SmtError):
    pass


class SnapshotFormatError(SmtError):
    pass


class OpKind(Enum):
    INSERT = "insert"
    UPDATE = "update"
    REMOVE = "remove"


@dataclass(frozen=True)
class LeafOperation:
    """One mutation of one indexed leaf; the atomic unit a transaction
    decomposes into."""

    kind: OpKind
    index: int
    value: bytes | None = None

    def __post_init__(self) -> None:
        if self.kind is OpKind.REMOVE:
            if self.value is not None:
                raise ValueError("remove carries no value")
        elif self.value is None:
            raise ValueError(f"{self.kind.value} requires a value")

    @classmethod
    def insert(cls, index: int, value: bytes) -> "LeafOperation":
        return cls(OpKind.INSERT, index, value)

    @classmethod
    def update(cls, index: int, value: bytes) -> "LeafOperation":
        return cls(OpKind.UPDATE, index, value)

    @classmethod
    def remove(cls, index: int) -> "LeafOperation":
        return cls(OpKind.REMOVE, index)


@dataclass(frozen=True)
class Witness:
    """Membership/non-membership proof: sibling digests ordered leaf to root."""

    leaf_index: int
    siblings: tuple[bytes, ...]


def level_of(node_index: int) -> int:
    return node_index.bit_length() - 1


class SparseMerkleTree:
    def __init__(self, depth: int, scheme: HashScheme = DEFAULT_SCHEME) -> None:
        if not 1 <= depth <= MAX_DEPTH:
            raise ConfigError(f"depth must be in [1, {MAX_DEPTH}], got {depth}")
        self.depth = depth
        self.scheme = scheme
        self.cache: dict[int, bytes] = {}
        self.leaf_values: dict[int, bytes] = {}
        self.defaults: list[bytes] = default_digests(scheme, depth)
        self.counters = CounterSet()

    @property
    def capacity(self) -> int:
        return 1 << self.depth

    def leaf_heap_index(self, index: int) -> int:
        return self.capacity + index

    def check_range(self, index: int) -> None:
        if not 0 <= index < self.capacity:
            raise LeafRangeError(
                f"leaf index {index} outside [0, {self.capacity}) at depth {self.depth}"
            )

    def resolve(self, node_index: int) -> bytes:
        """Digest of a node: cached value, or its level default when pruned."""
        digest = self.cache.get(node_index)
        if digest is None:
            return self.defaults[level_of(node_index)]
        return digest

    def root(self) -> bytes:
        return self.resolve(1)

    # -- O(1) / O(log n) leaf primitives ------------------------------------

    def insert_leaf(self, index: int, value: bytes) -> list[int]:
        """Add a new leaf and materialise its pruned path.

        Ancestor digests are left stale for the caller's hash phase. Costs
        exactly `depth` node visits: the leaf write plus one probe per
        internal path level below the root (the engines always rewrite the
        root, so no placeholder is needed there).

        Returns the cache keys this call created, for rollback journaling.
        """
        self.check_range(index)
        if index in self.leaf_values:
            raise DuplicateLeafError(f"leaf {index} already present")
        self.leaf_values[index] = value
        node = self.leaf_heap_index(index)
        created = [node]
        self.cache[node] = hash_leaf(self.scheme, value)
        self.counters.node_visits += 1
        node >>= 1
        while node > 1:
            if node not in self.cache:
                self.cache[node] = self.defaults[level_of(node)]
                created.append(node)
            self.counters.node_visits += 1
            node >>= 1
        return created

    def update_leaf(self, index: int, value: bytes) -> None:
        """Rewrite an existing leaf in place; one node visit, no ancestor work."""
        if index not in self.leaf_values:
            raise MissingLeafError(f"leaf {index} not present")
        self.leaf_values[index] = value
        self.cache[self.leaf_heap_index(index)] = hash_leaf(self.scheme, value)
        self.counters.node_visits += 1

    def remove_leaf(self, index: int) -> None:
        """Delete a leaf, reverting its slot to the pruned default; one visit."""
        if index not in self.leaf_values:
            raise MissingLeafError(f"leaf {index} not present")
        del self.leaf_values[index]
        del self.cache[self.leaf_heap_index(index)]
        self.counters.node_visits += 1

    # -- whole-tree operations ----------------------------------------------

    def commit(self, entries: Mapping[int, bytes]) -> bytes:
        """Write every entry (insert-or-update) and return the new root."""
        from .batch import batch_update

        ops = []
        for index in sorted(entries):
            self.check_range(index)
            if index in self.leaf_values:
                ops.append(LeafOperation.update(index, entries[index]))
            else:
                ops.append(LeafOperation.insert(index, entries[index]))
        return batch_update(self, ops).new_root

    def apply_op(self, op: LeafOperation) -> bytes:
        """Apply a single leaf operation and return the new root."""
        from .batch import batch_update

        return batch_update(self, [op]).new_root

    def member_witness_create(self, index: int) -> Witness:
        """Sibling path for a leaf slot, present or absent; pruned siblings
        resolve to their level defaults."""
        self.check_range(index)
        node = self.leaf_heap_index(index)
        siblings = []
        while node > 1:
            siblings.append(self.resolve(node ^ 1))
            node >>= 1
        return Witness(index, tuple(siblings))

    def clone(self) -> "SparseMerkleTree":
        """Independent copy sharing nothing mutable; used for run resets."""
        other = SparseMerkleTree.__new__(SparseMerkleTree)
        other.depth = self.depth
        other.scheme = self.scheme
        other.cache = dict(self.cache)
        other.leaf_values = dict(self.leaf_values)
        other.defaults = self.defaults
        other.counters = CounterSet()
        return other

    def export_snapshot(self) -> str:
        """Line-oriented fixture dump: cached nodes then leaf values, sorted."""
        lines = [f"{i} {d.hex()}" for i, d in sorted(self.cache.items())]
        lines += [f"L {k} {v.hex()}" for k, v in sorted(self.leaf_values.items())]
        return "".join(line + "\n" for line in lines)


def gen(depth: int, scheme: HashScheme = DEFAULT_SCHEME) -> SparseMerkleTree:
    """Empty tree of the given depth; its root is the all-default digest."""
    return SparseMerkleTree(depth, scheme)


def load_snapshot(
    text: str, depth: int, scheme: HashScheme = DEFAULT_SCHEME
) -> SparseMerkleTree:
    """Rebuild a tree from `export_snapshot` output."""
    tree = SparseMerkleTree(depth, scheme)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        if not line:
            continue
        parts = line.split(" ")
        try:
            if parts[0] == "L":
                if len(parts) == 2:  # empty leaf value hex
                    parts.append("")
                if len(parts) != 3:
                    raise ValueError("expected 'L <index> <hex>'")
                tree.leaf_values[int(parts[1])] = bytes.fromhex(parts[2])
            else:
                if len(parts) != 2:
                    raise ValueError("expected '<index> <hex>'")
                tree.cache[int(parts[0])] = bytes.fromhex(parts[1])
        except ValueError as exc:
            raise SnapshotFormatError(f"snapshot line {lineno}: {exc}") from exc
    return tree


def member_verify(
    root: bytes,
    witness: Witness,
    value: bytes,
    depth: int,
    scheme: HashScheme = DEFAULT_SCHEME,
) -> bool:
    """Fold a leaf value up through the witness siblings and compare to root.

    Pure function of its arguments; a malformed witness verifies false.
    """
    if len(witness.siblings) != depth:
        return False
    size = scheme.digest_size
    digest = hash_leaf(scheme, value)
    index = witness.leaf_index
    for distance, sibling in enumerate(witness.siblings):
        if len(sibling) != size:
            return False
        if (index >> distance) & 1:
            digest = hash_node(scheme, sibling, digest)
        else:
            digest = hash_node(scheme, digest, sibling)
    return digest == root


def non_member_verify(
    root: bytes, witness: Witness, depth: int, scheme: HashScheme = DEFAULT_SCHEME
) -> bool:
    """Absence proof: membership of the canonical default payload."""
    return member_verify(root, witness, scheme.default_payload, depth, scheme)


def check_consistency(tree: SparseMerkleTree) -> None:
    """Debug walker asserting the cache invariant over the whole tree.

    Valid only at public-operation boundaries (no stale nodes). Raises
    AssertionError on the first violation.
    """
    top = 1 << (tree.depth + 1)
    for node, digest in tree.cache.items():
        assert 1 <= node < top, f"cache key {node} out of heap range"
        level = level_of(node)
        if level < tree.depth:
            # Internal defaults must be pruned; a cached leaf digest may equal
            # the default when a present leaf holds the default payload.
            assert digest != tree.defaults[level], f"default digest cached at {node}"
            expect = hash_node(tree.scheme, tree.resolve(2 * node), tree.resolve(2 * node + 1))
            assert digest == expect, f"stale internal node {node}"
        else:
            leaf = node - tree.capacity
            assert leaf in tree.leaf_values, f"leaf digest cached for absent leaf {leaf}"
    for leaf, value in tree.leaf_values.items():
        heap = tree.leaf_heap_index(leaf)
        assert tree.cache.get(heap) == hash_leaf(tree.scheme, value), (
            f"leaf {leaf} digest missing or stale"
        )
