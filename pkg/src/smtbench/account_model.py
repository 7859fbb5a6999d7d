"""Account payloads stored in tree leaves.

The encoding is byte-level little-endian and canonical: balances are sorted
by token id and zero balances are never written, so structurally equal
accounts encode to identical bytes. The account id itself is positional (it
is the leaf index) and deliberately not part of the payload.
"""

from __future__ import annotations

from dataclasses import dataclass, field

PUBKEY_HASH_LEN = 20
MAX_TOKEN_ID = (1 << 16) - 1
MAX_AMOUNT = (1 << 128) - 1

_FIXED_LEN = 8 + PUBKEY_HASH_LEN + 2  # nonce + pubkey + balance count
_ENTRY_LEN = 2 + 16  # token id + amount


class AccountCodecError(ValueError):
    """Bytes do not form a canonical account encoding."""


class InsufficientBalanceError(ValueError):
    """A balance delta would drive an account balance negative."""


@dataclass
class Account:
    account_id: int
    nonce: int = 0
    pubkey_hash: bytes = b"\x00" * PUBKEY_HASH_LEN
    balances: dict[int, int] = field(default_factory=dict)


@dataclass(frozen=True)
class TxEffect:
    """One account's share of a transaction: a balance delta, an optional
    nonce bump (sender side), and an optional key rotation."""

    token_id: int
    delta: int = 0
    bump_nonce: bool = False
    new_pubkey_hash: bytes | None = None


def encode_account(account: Account) -> bytes:
    """Canonical payload bytes: nonce, pubkey hash, then sorted balances."""
    if len(account.pubkey_hash) != PUBKEY_HASH_LEN:
        raise AccountCodecError(
            f"pubkey hash must be {PUBKEY_HASH_LEN} bytes, got {len(account.pubkey_hash)}"
        )
    out = bytearray()
    out += account.nonce.to_bytes(8, "little")
    out += account.pubkey_hash
    items = sorted(account.balances.items())
    out += len(items).to_bytes(2, "little")
    for token_id, amount in items:
        if not 0 <= token_id <= MAX_TOKEN_ID:
            raise AccountCodecError(f"token id {token_id} out of range")
        if not 0 < amount <= MAX_AMOUNT:
            raise AccountCodecError(f"amount {amount} for token {token_id} out of range")
        out += token_id.to_bytes(2, "little")
        out += amount.to_bytes(16, "little")
    return bytes(out)


def decode_account(data: bytes, account_id: int) -> Account:
    """Inverse of encode_account; the id comes from the leaf position."""
    if len(data) < _FIXED_LEN:
        raise AccountCodecError(f"payload too short: {len(data)} bytes")
    nonce = int.from_bytes(data[:8], "little")
    pubkey_hash = data[8 : 8 + PUBKEY_HASH_LEN]
    count = int.from_bytes(data[_FIXED_LEN - 2 : _FIXED_LEN], "little")
    if len(data) != _FIXED_LEN + count * _ENTRY_LEN:
        raise AccountCodecError(
            f"payload length {len(data)} does not match balance count {count}"
        )
    balances: dict[int, int] = {}
    previous = -1
    offset = _FIXED_LEN
    for _ in range(count):
        token_id = int.from_bytes(data[offset : offset + 2], "little")
        amount = int.from_bytes(data[offset + 2 : offset + _ENTRY_LEN], "little")
        if token_id <= previous:
            raise AccountCodecError("token ids not strictly ascending")
        if amount == 0:
            raise AccountCodecError(f"zero balance encoded for token {token_id}")
        balances[token_id] = amount
        previous = token_id
        offset += _ENTRY_LEN
    return Account(account_id, nonce, pubkey_hash, balances)


def apply_tx_effect(account: Account, effect: TxEffect) -> Account:
    """New account with the effect applied; zeroed balances drop their key."""
    balances = dict(account.balances)
    if effect.delta:
        amount = balances.get(effect.token_id, 0) + effect.delta
        if amount < 0:
            raise InsufficientBalanceError(
                f"account {account.account_id} token {effect.token_id}: "
                f"{balances.get(effect.token_id, 0)} + {effect.delta} < 0"
            )
        if amount == 0:
            del balances[effect.token_id]
        else:
            balances[effect.token_id] = amount
    return Account(
        account_id=account.account_id,
        nonce=account.nonce + (1 if effect.bump_nonce else 0),
        pubkey_hash=effect.new_pubkey_hash or account.pubkey_hash,
        balances=balances,
    )
