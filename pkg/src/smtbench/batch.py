"""The two root-hash engines.

`batch_update` is the one-phase engine: apply every leaf mutation through the
O(1)/O(log n) primitives while collecting a duplicate-free parent set, then
rehash dirty nodes level by level bottom-up until the root is rewritten. Each
affected path is walked once.

`two_phase_update` is the baseline it is measured against: a full root-to-leaf
traversal per operation to mutate the leaf, then a recursive top-down rehash
of the stale paths, so every affected path is walked twice.

Both engines produce bytewise-identical roots, final tree states, and hash
counts on the same inputs; the difference the benchmarks measure is traversal
work and thread structure.
"""

from __future__ import annotations

import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

from .counters import CounterSet
from .hasher import hash_leaf, hash_node
from .smt_core import (
    DuplicateLeafError,
    LeafOperation,
    MissingLeafError,
    OpKind,
    SmtError,
    SparseMerkleTree,
    level_of,
)

OBU = "obu"
TWO_PHASE = "two-phase"

# A level is handed to the pool only when every worker gets at least this
# many nodes; below that, dispatch costs more than the hashing it buys.
_MIN_NODES_PER_WORKER = 32

# One shared pool per worker count, created lazily and reused across engine
# runs so pool construction never lands inside a timed region.
_POOLS: dict[int, ThreadPoolExecutor] = {}
_POOLS_LOCK = threading.Lock()


def _shared_pool(threads: int) -> ThreadPoolExecutor:
    with _POOLS_LOCK:
        pool = _POOLS.get(threads)
        if pool is None:
            pool = ThreadPoolExecutor(max_workers=threads, thread_name_prefix="smt-level")
            _POOLS[threads] = pool
        return pool


class BatchPreconditionError(SmtError):
    """An operation's precondition failed mid-batch; the tree was rolled back
    to its pre-batch state."""

    def __init__(self, op_index: int, cause: SmtError) -> None:
        super().__init__(f"operation {op_index} rejected: {cause}")
        self.op_index = op_index
        self.cause = cause


@dataclass(frozen=True)
class EngineConfig:
    threads: int = 1


def set_parallelism(config: EngineConfig, threads: int | str | None) -> EngineConfig:
    """Return a config with the worker count set; None or "auto" means one
    worker per hardware thread. threads=1 is fully sequential."""
    if threads in (None, "auto"):
        threads = os.cpu_count() or 1
    threads = int(threads)
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    return replace(config, threads=threads)


@dataclass
class BatchResult:
    new_root: bytes
    counters: CounterSet
    engine: str
    # Ascending heap indices rehashed per level, bottom-up; recorded by the
    # one-phase engine so schedules can be asserted and compared.
    level_work_lists: list[list[int]] | None = None


# -- shared leaf-phase mechanics ---------------------------------------------

# Journal entries: (kind, index, (old_value, old_digest) | None, created_keys | None)
_Journal = list[tuple[OpKind, int, tuple[bytes, bytes] | None, list[int] | None]]


def _rollback(tree: SparseMerkleTree, journal: _Journal) -> None:
    for kind, index, old, created in reversed(journal):
        heap = tree.leaf_heap_index(index)
        if kind is OpKind.INSERT:
            del tree.leaf_values[index]
            for node in created:
                tree.cache.pop(node, None)
        else:
            value, digest = old
            tree.leaf_values[index] = value
            tree.cache[heap] = digest


def _journaled(tree: SparseMerkleTree, op: LeafOperation, journal: _Journal) -> None:
    """Apply one op through the counting primitives, recording undo state."""
    if op.kind is OpKind.INSERT:
        created = tree.insert_leaf(op.index, op.value)
        journal.append((OpKind.INSERT, op.index, None, created))
        return
    old_value = tree.leaf_values.get(op.index)
    old_digest = tree.cache.get(tree.leaf_heap_index(op.index))
    if op.kind is OpKind.UPDATE:
        tree.update_leaf(op.index, op.value)  # raises before mutating
        journal.append((OpKind.UPDATE, op.index, (old_value, old_digest), None))
    else:
        tree.remove_leaf(op.index)
        journal.append((OpKind.REMOVE, op.index, (old_value, old_digest), None))


# -- one-phase batch update ----------------------------------------------------


def batch_update(
    tree: SparseMerkleTree,
    ops: list[LeafOperation],
    config: EngineConfig = EngineConfig(),
) -> BatchResult:
    """One-phase engine: leaf phase via O(1)/O(log n) primitives feeding a
    duplicate-free parent set, then a bottom-up level sweep rehashing exactly
    the dirty nodes. Aborting ops roll the tree back untouched."""
    counters = CounterSet()
    tree.counters = counters
    if not ops:
        return BatchResult(tree.root(), counters, OBU, [])

    started = time.perf_counter_ns()
    parent_set: set[int] = set()
    touched: set[int] = set()
    hashed_leaves: set[int] = set()
    journal: _Journal = []
    leaf_base = tree.capacity
    for op_index, op in enumerate(ops):
        try:
            _journaled(tree, op, journal)
        except SmtError as exc:
            _rollback(tree, journal)
            raise BatchPreconditionError(op_index, exc) from exc
        if op.kind is not OpKind.REMOVE:
            hashed_leaves.add(op.index)
        touched.add(leaf_base + op.index)
        parent_set.add((leaf_base + op.index) >> 1)
    counters.leaf_phase_visits = counters.node_visits
    counters.leaf_phase_nanos = time.perf_counter_ns() - started

    started = time.perf_counter_ns()
    # The touched leaf slots are the schedule's first level; the sweeps below
    # append one list per internal level, bottom-up.
    work_lists: list[list[int]] = [sorted(touched)]
    while parent_set:
        current = sorted(parent_set)
        work_lists.append(current)
        _rehash_level(tree, current, counters, config.threads)
        counters.levels_processed += 1
        parent_set = {i >> 1 for i in current if i > 1}
    counters.hash_phase_nanos = time.perf_counter_ns() - started
    counters.hash_invocations += len(hashed_leaves)
    return BatchResult(tree.root(), counters, OBU, work_lists)


def _rehash_level(
    tree: SparseMerkleTree,
    indices: list[int],
    counters: CounterSet,
    threads: int,
) -> None:
    if threads <= 1 or len(indices) < threads * _MIN_NODES_PER_WORKER:
        _rehash_slice(tree, indices, counters)
        return
    # Disjoint same-level writes with read-only access to the level below;
    # the map() completion is the barrier between levels. Worker counters are
    # merged only after the barrier.
    chunk = (len(indices) + threads - 1) // threads
    slices = [indices[i : i + chunk] for i in range(0, len(indices), chunk)]
    locals_ = [CounterSet() for _ in slices]
    pool = _shared_pool(threads)
    list(pool.map(lambda sc: _rehash_slice(tree, sc[0], sc[1]), zip(slices, locals_)))
    for local in locals_:
        counters.merge(local)


def _rehash_slice(tree: SparseMerkleTree, indices: list[int], counters: CounterSet) -> None:
    cache = tree.cache
    defaults = tree.defaults
    scheme = tree.scheme
    level = level_of(indices[0])
    child_default = defaults[level + 1]
    own_default = defaults[level]
    for node in indices:
        left = cache.get(2 * node, child_default)
        right = cache.get(2 * node + 1, child_default)
        digest = hash_node(scheme, left, right)
        if digest == own_default:
            cache.pop(node, None)  # all-default subtree prunes away
        else:
            cache[node] = digest
        counters.node_visits += 1
        counters.hash_invocations += 1


# -- two-phase baseline --------------------------------------------------------


def two_phase_update(
    tree: SparseMerkleTree,
    ops: list[LeafOperation],
    config: EngineConfig = EngineConfig(),
) -> BatchResult:
    """Baseline engine: phase 1 charges a full root-to-leaf traversal for
    every operation (the benchmark system's O(log n) update) and marks the
    path stale; phase 2 recursively rehashes stale paths top-down."""
    counters = CounterSet()
    tree.counters = counters
    if not ops:
        return BatchResult(tree.root(), counters, TWO_PHASE)

    started = time.perf_counter_ns()
    stale: set[int] = set()
    hashed_leaves: set[int] = set()
    journal: _Journal = []
    for op_index, op in enumerate(ops):
        try:
            _two_phase_apply(tree, op, journal, counters)
        except SmtError as exc:
            _rollback(tree, journal)
            raise BatchPreconditionError(op_index, exc) from exc
        if op.kind is not OpKind.REMOVE:
            hashed_leaves.add(op.index)
        node = tree.leaf_heap_index(op.index)
        while node >= 1:
            stale.add(node)
            node >>= 1
    counters.leaf_phase_visits = counters.node_visits
    counters.leaf_phase_nanos = time.perf_counter_ns() - started

    started = time.perf_counter_ns()
    budget = max(config.threads, 1).bit_length() - 1  # fork depth: 2^budget leaf tasks
    new_root = _rehash_recursive(tree, 1, stale, counters, budget)
    counters.hash_phase_nanos = time.perf_counter_ns() - started
    counters.hash_invocations += len(hashed_leaves)
    counters.levels_processed = tree.depth
    return BatchResult(new_root, counters, TWO_PHASE)


def _two_phase_apply(
    tree: SparseMerkleTree,
    op: LeafOperation,
    journal: _Journal,
    counters: CounterSet,
) -> None:
    """Mutate one leaf the baseline way: validate, charge the root-to-leaf
    traversal, write directly (bypassing the O(1) primitives and their
    counter charges)."""
    heap = tree.leaf_heap_index(op.index)
    if op.kind is OpKind.INSERT:
        tree.check_range(op.index)
        if op.index in tree.leaf_values:
            raise DuplicateLeafError(f"leaf {op.index} already present")
        counters.node_visits += tree.depth
        tree.leaf_values[op.index] = op.value
        tree.cache[heap] = hash_leaf(tree.scheme, op.value)
        journal.append((OpKind.INSERT, op.index, None, [heap]))
        return
    if op.index not in tree.leaf_values:
        raise MissingLeafError(f"leaf {op.index} not present")
    counters.node_visits += tree.depth
    old = (tree.leaf_values[op.index], tree.cache[heap])
    if op.kind is OpKind.UPDATE:
        tree.leaf_values[op.index] = op.value
        tree.cache[heap] = hash_leaf(tree.scheme, op.value)
        journal.append((OpKind.UPDATE, op.index, old, None))
    else:
        del tree.leaf_values[op.index]
        del tree.cache[heap]
        journal.append((OpKind.REMOVE, op.index, old, None))


def _rehash_recursive(
    tree: SparseMerkleTree,
    node: int,
    stale: set[int],
    counters: CounterSet,
    fork_budget: int,
) -> bytes:
    counters.node_visits += 1  # the recursion entered this node
    if node not in stale:
        return tree.resolve(node)
    level = level_of(node)
    if level == tree.depth:
        # Leaf digest was written (or pruned away) in phase 1.
        return tree.resolve(node)
    if fork_budget > 0:
        # Nested fork-join: the left child runs on a spawned thread while the
        # right runs here; join before combining, merging the fork's counters.
        forked = CounterSet()
        result: list[bytes] = [b""]

        def run_left() -> None:
            result[0] = _rehash_recursive(tree, 2 * node, stale, forked, fork_budget - 1)

        worker = threading.Thread(target=run_left)
        worker.start()
        right = _rehash_recursive(tree, 2 * node + 1, stale, counters, fork_budget - 1)
        worker.join()
        counters.merge(forked)
        left = result[0]
    else:
        left = _rehash_recursive(tree, 2 * node, stale, counters, 0)
        right = _rehash_recursive(tree, 2 * node + 1, stale, counters, 0)
    digest = hash_node(tree.scheme, left, right)
    if digest == tree.defaults[level]:
        tree.cache.pop(node, None)
    else:
        tree.cache[node] = digest
    counters.hash_invocations += 1
    return digest
