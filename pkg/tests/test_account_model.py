import random

import pytest
from hypothesis import given, strategies as st

from smtbench.account_model import (
    Account,
    AccountCodecError,
    InsufficientBalanceError,
    TxEffect,
    apply_tx_effect,
    decode_account,
    encode_account,
)
from smtbench.hasher import DEFAULT_SCHEME, hash_leaf


def test_fresh_account_is_30_bytes():
    pubkey = bytes(range(20))
    data = encode_account(Account(4, pubkey_hash=pubkey))
    assert len(data) == 30
    assert data[:8] == b"\x00" * 8
    assert data[8:28] == pubkey
    assert data[28:] == b"\x00\x00"


def test_encoding_is_order_independent():
    a = Account(1, 2, b"\x07" * 20, {})
    a.balances[5] = 50
    a.balances[1] = 10
    b = Account(1, 2, b"\x07" * 20, {1: 10, 5: 50})
    assert encode_account(a) == encode_account(b)


def test_balances_encoded_ascending():
    data = encode_account(Account(0, 0, b"\x00" * 20, {9: 1, 2: 1}))
    assert int.from_bytes(data[30:32], "little") == 2
    assert int.from_bytes(data[48:50], "little") == 9


accounts_strategy = st.builds(
    Account,
    account_id=st.integers(0, 2**24 - 1),
    nonce=st.integers(0, 2**64 - 1),
    pubkey_hash=st.binary(min_size=20, max_size=20),
    balances=st.dictionaries(
        st.integers(0, 2**16 - 1), st.integers(1, 2**128 - 1), max_size=8
    ),
)


@given(accounts_strategy)
def test_codec_round_trip(account):
    assert decode_account(encode_account(account), account.account_id) == account


@pytest.mark.parametrize(
    "data",
    [
        b"",
        b"\x00" * 29,  # one short of the fixed header
        encode_account(Account(0)) + b"\x00",  # trailing junk
        b"\x00" * 28 + (2).to_bytes(2, "little") + b"\x00" * 18,  # count too large
    ],
)
def test_decode_rejects_bad_lengths(data):
    with pytest.raises(AccountCodecError):
        decode_account(data, 0)


def test_decode_rejects_non_canonical_token_order():
    good = encode_account(Account(0, 0, b"\x00" * 20, {1: 5, 2: 6}))
    swapped = good[:30] + good[48:66] + good[30:48]
    with pytest.raises(AccountCodecError):
        decode_account(swapped, 0)


def test_decode_rejects_zero_balance():
    data = b"\x00" * 28 + (1).to_bytes(2, "little") + (3).to_bytes(2, "little") + b"\x00" * 16
    with pytest.raises(AccountCodecError):
        decode_account(data, 0)


def test_encode_rejects_bad_pubkey_and_ranges():
    with pytest.raises(AccountCodecError):
        encode_account(Account(0, 0, b"\x00" * 19))
    with pytest.raises(AccountCodecError):
        encode_account(Account(0, 0, b"\x00" * 20, {2**16: 1}))
    with pytest.raises(AccountCodecError):
        encode_account(Account(0, 0, b"\x00" * 20, {0: 0}))
    with pytest.raises(AccountCodecError):
        encode_account(Account(0, 0, b"\x00" * 20, {0: 2**128}))


def test_apply_effect_credit():
    account = Account(1)
    credited = apply_tx_effect(account, TxEffect(0, +100))
    assert credited.balances == {0: 100}
    assert credited.nonce == 0
    assert account.balances == {}  # original untouched


def test_apply_effect_debit_then_credit_restores_balance():
    account = Account(1, 0, b"\x00" * 20, {0: 500})
    mid = apply_tx_effect(account, TxEffect(0, -100, bump_nonce=True))
    back = apply_tx_effect(mid, TxEffect(0, +100))
    assert back.balances == account.balances
    assert back.nonce == 1


def test_apply_effect_insufficient_balance():
    with pytest.raises(InsufficientBalanceError):
        apply_tx_effect(Account(1), TxEffect(0, -1))


def test_apply_effect_drops_zeroed_balance():
    account = Account(1, 0, b"\x00" * 20, {0: 5})
    drained = apply_tx_effect(account, TxEffect(0, -5))
    assert drained.balances == {}


def test_apply_effect_rotates_pubkey():
    rotated = apply_tx_effect(Account(1), TxEffect(0, 0, new_pubkey_hash=b"\x09" * 20))
    assert rotated.pubkey_hash == b"\x09" * 20


def test_encoding_collision_free_at_desk_scale():
    rng = random.Random(99)
    seen = {}
    for _ in range(500):
        account = Account(
            rng.randrange(2**24),
            rng.randrange(2**32),
            rng.randbytes(20),
            {rng.randrange(2**16): rng.randrange(1, 2**64) for _ in range(rng.randrange(4))},
        )
        encoded = encode_account(account)
        if encoded in seen:
            assert seen[encoded] == (account.nonce, account.pubkey_hash, account.balances)
        seen[encoded] = (account.nonce, account.pubkey_hash, account.balances)
    assert len(seen) > 490  # collisions only via identical field draws


def test_leaf_digest_tracks_every_field():
    base = Account(3, 1, b"\x01" * 20, {0: 10})
    digest = hash_leaf(DEFAULT_SCHEME, encode_account(base))
    variants = [
        Account(3, 2, b"\x01" * 20, {0: 10}),
        Account(3, 1, b"\x02" * 20, {0: 10}),
        Account(3, 1, b"\x01" * 20, {0: 11}),
        Account(3, 1, b"\x01" * 20, {1: 10}),
        Account(3, 1, b"\x01" * 20, {0: 10, 1: 1}),
    ]
    for variant in variants:
        assert hash_leaf(DEFAULT_SCHEME, encode_account(variant)) != digest
