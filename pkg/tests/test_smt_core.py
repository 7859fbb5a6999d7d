import random

import pytest
from hypothesis import given, settings, strategies as st

from smtbench.hasher import DEFAULT_SCHEME, hash_leaf, hash_node
from smtbench.smt_core import (
    ConfigError,
    DuplicateLeafError,
    LeafOperation,
    LeafRangeError,
    MissingLeafError,
    SnapshotFormatError,
    SparseMerkleTree,
    Witness,
    check_consistency,
    gen,
    load_snapshot,
    member_verify,
    non_member_verify,
)

from oracles import naive_root

EMPTY_ROOT_24 = bytes.fromhex("8d6446d4c64ee7ebb1221fed67e95b054036fa2076e31142638b7348e875adc7")
THREE_LEAF_ROOT = bytes.fromhex("f8191d65220004613d2c54587d53209cc93885700054343ace74abaaae72c0c1")


def build(depth: int, leaves: dict[int, bytes]) -> SparseMerkleTree:
    tree = gen(depth)
    tree.commit(leaves)
    return tree


# -- gen -------------------------------------------------------------------


def test_gen_empty_roots():
    assert gen(24).root() == EMPTY_ROOT_24
    leaf = hash_leaf(DEFAULT_SCHEME, b"")
    half = hash_node(DEFAULT_SCHEME, leaf, leaf)
    assert gen(2).root() == hash_node(DEFAULT_SCHEME, half, half)


def test_gen_capacity():
    assert gen(24).capacity == 2**24


@pytest.mark.parametrize("depth", [0, -1, 64])
def test_gen_rejects_bad_depth(depth):
    with pytest.raises(ConfigError):
        gen(depth)


# -- leaf primitives ----------------------------------------------------------


def test_insert_visits_equal_depth():
    tree = gen(4)
    tree.insert_leaf(0, b"a")
    assert tree.counters.node_visits == 4


def test_insert_duplicate_rejected():
    tree = gen(4)
    tree.insert_leaf(3, b"a")
    with pytest.raises(DuplicateLeafError):
        tree.insert_leaf(3, b"b")


def test_insert_out_of_range():
    tree = gen(4)
    with pytest.raises(LeafRangeError):
        tree.insert_leaf(16, b"a")


def test_update_is_one_visit():
    tree = build(4, {5: b"x"})
    before = tree.counters.node_visits
    tree.update_leaf(5, b"y")
    assert tree.counters.node_visits == before + 1


def test_update_missing_rejected():
    with pytest.raises(MissingLeafError):
        gen(4).update_leaf(0, b"x")


def test_remove_is_one_visit():
    tree = build(4, {5: b"x"})
    before = tree.counters.node_visits
    tree.remove_leaf(5)
    assert tree.counters.node_visits == before + 1


def test_remove_missing_rejected():
    with pytest.raises(MissingLeafError):
        gen(4).remove_leaf(0)


def test_update_identical_value_keeps_root():
    tree = build(4, {5: b"x"})
    root = tree.root()
    digest = tree.cache[tree.leaf_heap_index(5)]
    tree.apply_op(LeafOperation.update(5, b"x"))
    assert tree.cache[tree.leaf_heap_index(5)] == digest
    assert tree.root() == root


def test_insert_then_remove_restores_empty_root():
    tree = gen(5)
    empty = tree.root()
    tree.apply_op(LeafOperation.insert(7, b"v"))
    assert tree.root() != empty
    tree.apply_op(LeafOperation.remove(7))
    assert tree.root() == empty
    assert tree.cache == {}


# -- commit / apply_op ---------------------------------------------------------


def test_commit_empty_is_noop():
    tree = gen(3)
    assert tree.commit({}) == tree.defaults[0]


def test_commit_three_leaf_structure_golden():
    tree = gen(2)
    root = tree.commit({0: b"a", 1: b"b", 3: b"c"})
    assert root == THREE_LEAF_ROOT
    # structural expansion: node(node(h(a), h(b)), node(default_leaf, h(c)))
    expect = hash_node(
        DEFAULT_SCHEME,
        hash_node(DEFAULT_SCHEME, hash_leaf(DEFAULT_SCHEME, b"a"), hash_leaf(DEFAULT_SCHEME, b"b")),
        hash_node(DEFAULT_SCHEME, hash_leaf(DEFAULT_SCHEME, b""), hash_leaf(DEFAULT_SCHEME, b"c")),
    )
    assert root == expect
    assert root == naive_root(2, {0: b"a", 1: b"b", 3: b"c"})


def test_commit_deterministic():
    entries = {i: bytes([i]) for i in range(10)}
    assert build(5, entries).root() == build(5, entries).root()


def test_commit_overwrites_existing():
    tree = build(3, {1: b"old"})
    tree.commit({1: b"new", 2: b"fresh"})
    assert tree.leaf_values == {1: b"new", 2: b"fresh"}
    assert tree.root() == naive_root(3, {1: b"new", 2: b"fresh"})


def test_commit_out_of_range_key():
    with pytest.raises(LeafRangeError):
        gen(3).commit({8: b"x"})


def test_apply_op_matches_singleton_batch():
    from smtbench.batch import batch_update

    t1 = build(4, {2: b"v"})
    t2 = t1.clone()
    root1 = t1.apply_op(LeafOperation.update(2, b"w"))
    root2 = batch_update(t2, [LeafOperation.update(2, b"w")]).new_root
    assert root1 == root2


# -- witnesses -------------------------------------------------------------------


def test_witness_length_is_depth():
    tree = build(6, {9: b"x"})
    assert len(tree.member_witness_create(9).siblings) == 6
    assert len(tree.member_witness_create(0).siblings) == 6


def test_empty_tree_witness_is_default_chain():
    tree = gen(5)
    witness = tree.member_witness_create(11)
    assert list(witness.siblings) == [tree.defaults[level] for level in range(5, 0, -1)]
    assert non_member_verify(tree.root(), witness, 5)


def test_witness_out_of_range():
    with pytest.raises(LeafRangeError):
        gen(3).member_witness_create(8)


def test_pruned_tree_membership_structure():
    # Depth-3 tree with leaves 0,1,4,6,7 set and 2,3,5 empty: leaf 4's proof
    # is its empty sibling slot, the node covering {6,7}, and the node
    # covering {0..3}; the subtree under leaves {2,3} stays pruned.
    leaves = {0: b"v0", 1: b"v1", 4: b"v4", 6: b"v6", 7: b"v7"}
    tree = build(3, leaves)
    assert 5 not in tree.cache  # node over {2,3} pruned away
    witness = tree.member_witness_create(4)
    assert witness.siblings[0] == tree.defaults[3]  # leaf 5 is empty
    assert witness.siblings[1] == tree.resolve(7)  # covers leaves {6,7}
    assert witness.siblings[2] == tree.resolve(2)  # covers leaves {0..3}
    assert member_verify(tree.root(), witness, b"v4", 3)
    # non-membership of the empty leaf 2
    assert non_member_verify(tree.root(), tree.member_witness_create(2), 3)
    # a present leaf is not "absent"
    assert not non_member_verify(tree.root(), tree.member_witness_create(4), 3)


def test_member_verify_rejects_corruption():
    tree = build(4, {3: b"x", 9: b"y"})
    witness = tree.member_witness_create(3)
    assert member_verify(tree.root(), witness, b"x", 4)
    corrupt = list(witness.siblings)
    corrupt[2] = bytes([corrupt[2][0] ^ 1]) + corrupt[2][1:]
    assert not member_verify(tree.root(), Witness(3, tuple(corrupt)), b"x", 4)


def test_member_verify_rejects_wrong_value():
    tree = build(4, {3: b"x"})
    witness = tree.member_witness_create(3)
    assert not member_verify(tree.root(), witness, b"z", 4)


def test_member_verify_rejects_malformed_witness():
    tree = build(4, {3: b"x"})
    witness = tree.member_witness_create(3)
    short = Witness(3, witness.siblings[:-1])
    assert not member_verify(tree.root(), short, b"x", 4)
    bad_digest = Witness(3, (b"tiny",) + witness.siblings[1:])
    assert not member_verify(tree.root(), bad_digest, b"x", 4)


# -- snapshots ---------------------------------------------------------------------


def test_snapshot_round_trip():
    tree = build(4, {0: b"", 3: b"abc", 15: b"\xff\x00"})
    text = tree.export_snapshot()
    loaded = load_snapshot(text, 4)
    assert loaded.cache == tree.cache
    assert loaded.leaf_values == tree.leaf_values
    assert loaded.root() == tree.root()
    check_consistency(loaded)


def test_snapshot_format_shape():
    tree = build(2, {0: b"a", 1: b"b", 3: b"c"})
    lines = tree.export_snapshot().splitlines()
    node_lines = [line for line in lines if not line.startswith("L ")]
    leaf_lines = [line for line in lines if line.startswith("L ")]
    assert [int(line.split()[0]) for line in node_lines] == [1, 2, 3, 4, 5, 7]
    assert leaf_lines == ["L 0 61", "L 1 62", "L 3 63"]
    assert node_lines[0].split()[1] == THREE_LEAF_ROOT.hex()


def test_snapshot_rejects_garbage():
    with pytest.raises(SnapshotFormatError):
        load_snapshot("1 nothex\n", 4)
    with pytest.raises(SnapshotFormatError):
        load_snapshot("L x 61\n", 4)


def test_clone_is_independent():
    tree = build(4, {1: b"a"})
    copy = tree.clone()
    copy.apply_op(LeafOperation.insert(2, b"b"))
    assert 2 not in tree.leaf_values
    assert tree.root() != copy.root()


def test_consistency_walker_detects_corruption():
    tree = build(4, {1: b"a", 9: b"b"})
    check_consistency(tree)
    node = next(i for i in tree.cache if 1 < i < 16)
    tree.cache[node] = b"\x00" * 32
    with pytest.raises(AssertionError):
        check_consistency(tree)


# -- randomized properties -----------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(
    depth=st.integers(2, 6),
    data=st.data(),
)
def test_commit_matches_naive_oracle(depth, data):
    capacity = 1 << depth
    leaves = data.draw(
        st.dictionaries(st.integers(0, capacity - 1), st.binary(max_size=12), max_size=16)
    )
    tree = build(depth, leaves)
    assert tree.root() == naive_root(depth, leaves)
    check_consistency(tree)


@settings(max_examples=40, deadline=None)
@given(data=st.data())
def test_witness_round_trip_random_trees(data):
    depth = 8
    capacity = 1 << depth
    leaves = data.draw(
        st.dictionaries(st.integers(0, capacity - 1), st.binary(min_size=1, max_size=8), max_size=64)
    )
    tree = build(depth, leaves)
    root = tree.root()
    rng = random.Random(data.draw(st.integers(0, 2**16)))
    probe = set(leaves) | {rng.randrange(capacity) for _ in range(16)}
    for index in probe:
        witness = tree.member_witness_create(index)
        if index in leaves:
            assert member_verify(root, witness, leaves[index], depth)
        else:
            assert non_member_verify(root, witness, depth)
