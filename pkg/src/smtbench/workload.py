"""Benchmark workloads: synthetic operation generators and block-trace replay.

Micro workloads are plain leaf-operation lists. Macro workloads are block
traces: ordered transactions that decompose into one or two leaf operations
each, replayed against an account book so successive transactions see each
other's effects.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable

from .account_model import Account, TxEffect, apply_tx_effect, decode_account, encode_account
from .smt_core import LeafOperation, LeafRangeError, OpKind

SEED_BALANCE = 10**30  # pre-seeded accounts can fund any synthetic flow
_PAYLOAD_BYTES = 32


class TraceParseError(ValueError):
    """A trace file is syntactically or structurally malformed."""


class TraceValidationError(ValueError):
    """A transaction references accounts inconsistently with the trace so far."""


class TxType(str, Enum):
    TRANSFER = "Transfer"
    TRANSFER_TO_NEW = "TransferToNew"
    WITHDRAW = "Withdraw"
    WITHDRAW_NFT = "WithdrawNFT"
    MINT_NFT = "MintNFT"
    CHANGE_PUBKEY = "ChangePubKey"
    FORCED_EXIT = "ForcedExit"
    SWAP = "Swap"
    DEPOSIT = "Deposit"
    FULL_EXIT = "FullExit"


PRIORITY_TYPES = frozenset({TxType.DEPOSIT, TxType.FULL_EXIT})

# Account fields each type must carry: (needs from, needs to)
_REQUIRED_REFS = {
    TxType.TRANSFER: (True, True),
    TxType.TRANSFER_TO_NEW: (True, True),
    TxType.WITHDRAW: (True, False),
    TxType.WITHDRAW_NFT: (True, True),
    TxType.MINT_NFT: (True, True),
    TxType.CHANGE_PUBKEY: (True, False),
    TxType.FORCED_EXIT: (True, True),
    TxType.SWAP: (True, True),
    TxType.DEPOSIT: (False, True),
    TxType.FULL_EXIT: (True, True),
}


@dataclass(frozen=True)
class TxRecord:
    tx_type: TxType
    from_account: int | None = None
    to_account: int | None = None
    token_id: int = 0
    amount: int = 0

    def __post_init__(self) -> None:
        needs_from, needs_to = _REQUIRED_REFS[self.tx_type]
        if needs_from and self.from_account is None:
            raise TraceValidationError(f"{self.tx_type.value} requires a from account")
        if needs_to and self.to_account is None:
            raise TraceValidationError(f"{self.tx_type.value} requires a to account")

    @property
    def is_priority(self) -> bool:
        return self.tx_type in PRIORITY_TYPES


@dataclass(frozen=True)
class BlockTrace:
    block_number: int
    txs: tuple[TxRecord, ...]

    def __post_init__(self) -> None:
        if not self.txs:
            raise TraceValidationError(f"block {self.block_number} has no transactions")


class AccountBook:
    """Mutable account registry advanced alongside trace replay."""

    def __init__(self, accounts: Iterable[Account] = ()) -> None:
        self.accounts: dict[int, Account] = {a.account_id: a for a in accounts}

    def __contains__(self, index: int) -> bool:
        return index in self.accounts

    def __len__(self) -> int:
        return len(self.accounts)

    def get(self, index: int) -> Account | None:
        return self.accounts.get(index)

    def put(self, account: Account) -> None:
        self.accounts[account.account_id] = account

    def remove(self, index: int) -> None:
        del self.accounts[index]

    def clone(self) -> "AccountBook":
        book = AccountBook()
        book.accounts = dict(self.accounts)
        return book


def default_pubkey(index: int) -> bytes:
    return index.to_bytes(20, "little")


def _rotated_pubkey(index: int, nonce: int) -> bytes:
    return index.to_bytes(8, "little") + nonce.to_bytes(8, "little") + b"\x01\x00\x00\x00"


# -- transaction decomposition -------------------------------------------------


def tx_to_leaf_ops(tx: TxRecord, book: AccountBook) -> list[LeafOperation]:
    """Decompose one transaction into its one or two leaf operations.

    Reads `book` but never writes it; op payloads are the encoded
    post-transaction account states. Apply the returned ops with
    `apply_leaf_ops` to advance the book before the next transaction.
    """
    overlay: dict[int, Account | None] = {}

    def existing(index: int) -> Account:
        if index in overlay:
            account = overlay[index]
        else:
            account = book.get(index)
        if account is None:
            raise TraceValidationError(
                f"{tx.tx_type.value} references absent account {index}"
            )
        return account

    def absent(index: int) -> None:
        present = overlay[index] is not None if index in overlay else index in book
        if present:
            raise TraceValidationError(
                f"{tx.tx_type.value} expects account {index} to be new"
            )

    def update(index: int, effect: TxEffect) -> LeafOperation:
        account = apply_tx_effect(existing(index), effect)
        overlay[index] = account
        return LeafOperation.update(index, encode_account(account))

    def insert(account: Account) -> LeafOperation:
        absent(account.account_id)
        overlay[account.account_id] = account
        return LeafOperation.insert(account.account_id, encode_account(account))

    def remove(index: int) -> LeafOperation:
        existing(index)
        overlay[index] = None
        return LeafOperation.remove(index)

    kind, sender, target = tx.tx_type, tx.from_account, tx.to_account
    token, amount = tx.token_id, tx.amount
    if kind is TxType.TRANSFER:
        return [
            update(sender, TxEffect(token, -amount, bump_nonce=True)),
            update(target, TxEffect(token, +amount)),
        ]
    if kind is TxType.TRANSFER_TO_NEW:
        debit = update(sender, TxEffect(token, -amount, bump_nonce=True))
        fresh = Account(target, 0, default_pubkey(target), {token: amount} if amount else {})
        return [debit, insert(fresh)]
    if kind is TxType.WITHDRAW:
        return [update(sender, TxEffect(token, -amount, bump_nonce=True))]
    if kind is TxType.WITHDRAW_NFT:
        return [
            update(sender, TxEffect(token, -amount, bump_nonce=True)),
            update(target, TxEffect(token, 0, bump_nonce=True)),
        ]
    if kind is TxType.MINT_NFT:
        return [
            update(target, TxEffect(token, +amount)),
            update(sender, TxEffect(token, 0, bump_nonce=True)),
        ]
    if kind is TxType.CHANGE_PUBKEY:
        account = existing(sender)
        effect = TxEffect(
            token, 0, bump_nonce=True,
            new_pubkey_hash=_rotated_pubkey(sender, account.nonce + 1),
        )
        return [update(sender, effect)]
    if kind in (TxType.FORCED_EXIT, TxType.FULL_EXIT):
        return [update(sender, TxEffect(token, 0, bump_nonce=True)), remove(target)]
    if kind is TxType.SWAP:
        return [
            update(sender, TxEffect(token, -amount, bump_nonce=True)),
            update(target, TxEffect(token, +amount, bump_nonce=True)),
        ]
    if kind is TxType.DEPOSIT:
        if target in book:
            return [update(target, TxEffect(token, +amount))]
        fresh = Account(target, 0, default_pubkey(target), {token: amount} if amount else {})
        return [insert(fresh)]
    raise TraceValidationError(f"unsupported transaction type {kind!r}")


def apply_leaf_ops(book: AccountBook, ops: Iterable[LeafOperation]) -> None:
    """Advance the account book past a batch of decomposed operations."""
    for op in ops:
        if op.kind is OpKind.REMOVE:
            book.remove(op.index)
        else:
            book.put(decode_account(op.value, op.index))


def replay_blocks(
    blocks: Iterable[BlockTrace], book: AccountBook
) -> list[tuple[BlockTrace, list[LeafOperation]]]:
    """Decompose every block in order, advancing the book as replay proceeds."""
    out = []
    for block in blocks:
        block_ops: list[LeafOperation] = []
        for tx in block.txs:
            ops = tx_to_leaf_ops(tx, book)
            apply_leaf_ops(book, ops)
            block_ops.extend(ops)
        out.append((block, block_ops))
    return out


# -- pre-seeding ----------------------------------------------------------------


def required_preseed(blocks: Iterable[BlockTrace]) -> tuple[set[int], set[int]]:
    """Scan a trace for (accounts that must exist before replay, token ids used).

    Walks transactions in order tracking in-trace creations and removals, so
    only genuinely pre-existing references end up in the pre-seed set.
    """
    preseed: set[int] = set()
    created: set[int] = set()
    removed: set[int] = set()
    tokens: set[int] = set()

    def need(index: int) -> None:
        if index in removed:
            raise TraceValidationError(f"account {index} referenced after removal")
        if index not in created and index not in preseed:
            preseed.add(index)

    for block in blocks:
        for tx in block.txs:
            tokens.add(tx.token_id)
            kind = tx.tx_type
            if kind in (TxType.TRANSFER, TxType.SWAP, TxType.WITHDRAW_NFT, TxType.MINT_NFT):
                need(tx.from_account)
                need(tx.to_account)
            elif kind is TxType.TRANSFER_TO_NEW:
                need(tx.from_account)
                if tx.to_account in created or tx.to_account in preseed:
                    raise TraceValidationError(
                        f"TransferToNew target {tx.to_account} already exists"
                    )
                created.add(tx.to_account)
                removed.discard(tx.to_account)
            elif kind in (TxType.WITHDRAW, TxType.CHANGE_PUBKEY):
                need(tx.from_account)
            elif kind in (TxType.FORCED_EXIT, TxType.FULL_EXIT):
                need(tx.from_account)
                need(tx.to_account)
                created.discard(tx.to_account)
                removed.add(tx.to_account)
            elif kind is TxType.DEPOSIT:
                if tx.to_account in removed or (
                    tx.to_account not in created and tx.to_account not in preseed
                ):
                    created.add(tx.to_account)
                    removed.discard(tx.to_account)
    return preseed, tokens


def build_preseed_book(blocks: Iterable[BlockTrace], seed_balance: int = SEED_BALANCE) -> AccountBook:
    """Account book holding every account a trace expects to pre-exist, funded
    far beyond anything the trace can spend."""
    preseed, tokens = required_preseed(blocks)
    balances = {token: seed_balance for token in sorted(tokens)}
    book = AccountBook()
    for index in sorted(preseed):
        book.put(Account(index, 0, default_pubkey(index), dict(balances)))
    return book


def filter_transfer_swap(blocks: Iterable[BlockTrace]) -> list[BlockTrace]:
    """Keep only Transfer and Swap transactions; blocks left empty are dropped."""
    out = []
    for block in blocks:
        kept = tuple(
            tx for tx in block.txs if tx.tx_type in (TxType.TRANSFER, TxType.SWAP)
        )
        if kept:
            out.append(BlockTrace(block.block_number, kept))
    return out


# -- micro-benchmark generators --------------------------------------------------


def gen_sequential_updates(
    k: int, start: int = 0, *, depth: int, seed: int = 0
) -> list[LeafOperation]:
    """k update ops on consecutive leaf indices with seeded random payloads."""
    if start < 0 or start + k > (1 << depth):
        raise LeafRangeError(
            f"updates [{start}, {start + k}) exceed capacity 2^{depth}"
        )
    rng = random.Random(seed)
    return [
        LeafOperation.update(start + i, rng.randbytes(_PAYLOAD_BYTES)) for i in range(k)
    ]


def gen_uniform_updates(k: int, seed: int, *, depth: int) -> list[LeafOperation]:
    """k update ops on uniformly random leaf indices; duplicates permitted."""
    rng = random.Random(seed)
    capacity = 1 << depth
    return [
        LeafOperation.update(rng.randrange(capacity), rng.randbytes(_PAYLOAD_BYTES))
        for _ in range(k)
    ]


def gen_sequential_inserts(
    k: int, start: int = 0, *, depth: int, seed: int = 0
) -> list[LeafOperation]:
    """k insert ops on consecutive fresh leaf indices."""
    if start < 0 or start + k > (1 << depth):
        raise LeafRangeError(
            f"inserts [{start}, {start + k}) exceed capacity 2^{depth}"
        )
    rng = random.Random(seed)
    return [
        LeafOperation.insert(start + i, rng.randbytes(_PAYLOAD_BYTES)) for i in range(k)
    ]


def setup_inserts(ops: Iterable[LeafOperation], seed: int = 1) -> list[LeafOperation]:
    """Insert ops covering the distinct leaves an update workload targets, so
    the updates' existence preconditions hold."""
    rng = random.Random(seed)
    indices = sorted({op.index for op in ops})
    return [LeafOperation.insert(i, rng.randbytes(_PAYLOAD_BYTES)) for i in indices]


# -- macro-benchmark trace generators ---------------------------------------------


def gen_hot_account_trace(
    k: int,
    hot_index: int,
    *,
    block_number: int = 1,
    counterparty_start: int | None = None,
    token_id: int = 0,
    amount: int = 1,
) -> BlockTrace:
    """One block of k transfers all sent from one hot account to k distinct
    counterparties."""
    start = hot_index + 1 if counterparty_start is None else counterparty_start
    txs = tuple(
        TxRecord(TxType.TRANSFER, hot_index, start + i, token_id, amount)
        for i in range(k)
    )
    return BlockTrace(block_number, txs)


def gen_hot_blocks(blocks: int = 10, k: int = 48, hot_index: int = 0) -> list[BlockTrace]:
    """Hot-account fixture: every block funnels k transfers through the same
    leaf, with counterparties never reused across blocks."""
    out = []
    cursor = hot_index + 1
    for b in range(blocks):
        out.append(
            gen_hot_account_trace(
                k, hot_index, block_number=b + 1, counterparty_start=cursor
            )
        )
        cursor += k
    return out


def gen_dispersed_blocks(
    blocks: int = 10, txs_per_block: int = 83, start: int = 0
) -> list[BlockTrace]:
    """Dispersed fixture: every transfer touches a brand-new pair of accounts,
    so batches share as few ancestors as possible."""
    out = []
    cursor = start
    for b in range(blocks):
        txs = []
        for _ in range(txs_per_block):
            txs.append(TxRecord(TxType.TRANSFER, cursor, cursor + 1, 0, 1))
            cursor += 2
        out.append(BlockTrace(b + 1, tuple(txs)))
    return out


# Weights follow the observed mix of an L2 block sample: swaps and transfers
# dominate, NFT withdrawals are vanishingly rare.
_NORMAL_TX_WEIGHTS = [
    (TxType.SWAP, 3971),
    (TxType.TRANSFER, 1897),
    (TxType.MINT_NFT, 1428),
    (TxType.CHANGE_PUBKEY, 766),
    (TxType.WITHDRAW, 47),
    (TxType.WITHDRAW_NFT, 1),
]


def _block_sizes(
    rng: random.Random, blocks: int, total: int, lo: int, hi: int
) -> list[int]:
    base = total // blocks
    sizes = [base + (1 if i < total - base * blocks else 0) for i in range(blocks)]
    for _ in range(blocks * 4):
        i, j = rng.randrange(blocks), rng.randrange(blocks)
        shift = rng.randint(1, 10)
        if sizes[i] - shift >= lo and sizes[j] + shift <= hi:
            sizes[i] -= shift
            sizes[j] += shift
    return sizes


def gen_synthetic_blocks(
    seed: int = 1318,
    blocks: int = 100,
    total_txs: int = 8376,
    avg_tx_per_account: float = 2.5,
    min_block: int = 74,
    max_block: int = 133,
    tokens: int = 4,
    deposit_rate: float = 0.8,
) -> list[BlockTrace]:
    """Shape-matched synthetic macro trace.

    Reproduces the dataset statistics the macro-benchmark cares about: block
    count, total transactions, block-size bounds, dominant swap/transfer mix,
    and account-reuse rate (the avg_tx_per_account knob sets the participant
    pool size). Priority transactions respect block sealing: at most one per
    block, always in the final slot.
    """
    rng = random.Random(seed)
    sizes = _block_sizes(rng, blocks, total_txs, min_block, max_block)
    pool_size = max(2, round(total_txs / avg_tx_per_account))
    fresh_cursor = pool_size  # deposit-created accounts sit above the pool
    kinds = [k for k, _ in _NORMAL_TX_WEIGHTS]
    weights = [w for _, w in _NORMAL_TX_WEIGHTS]

    def participant() -> int:
        return rng.randrange(pool_size)

    out = []
    for b, size in enumerate(sizes):
        txs: list[TxRecord] = []
        seal_with_deposit = rng.random() < deposit_rate
        normal_slots = size - 1 if seal_with_deposit else size
        for _ in range(normal_slots):
            kind = rng.choices(kinds, weights)[0]
            token = rng.randrange(tokens)
            if kind in (TxType.TRANSFER, TxType.SWAP):
                sender = participant()
                target = participant()
                while target == sender:
                    target = participant()
                txs.append(TxRecord(kind, sender, target, token, rng.randint(1, 999)))
            elif kind in (TxType.MINT_NFT, TxType.WITHDRAW_NFT):
                creator = participant()
                other = participant()
                while other == creator:
                    other = participant()
                if kind is TxType.MINT_NFT:
                    txs.append(TxRecord(kind, creator, other, token, 1))
                else:
                    txs.append(TxRecord(kind, other, creator, token, 1))
            elif kind is TxType.WITHDRAW:
                txs.append(TxRecord(kind, participant(), None, token, rng.randint(1, 999)))
            else:  # ChangePubKey
                txs.append(TxRecord(kind, participant(), None, token, 0))
        if seal_with_deposit:
            if rng.random() < 0.5:
                target = participant()
            else:
                target = fresh_cursor
                fresh_cursor += 1
            txs.append(
                TxRecord(TxType.DEPOSIT, None, target, rng.randrange(tokens),
                         rng.randint(1, 10**6))
            )
        out.append(BlockTrace(b + 1, tuple(txs)))
    return out


# -- trace file format -------------------------------------------------------------


def _tx_to_json_fields(tx: TxRecord) -> str:
    parts = [f'"type": "{tx.tx_type.value}"']
    if tx.from_account is not None:
        parts.append(f'"from": {tx.from_account}')
    if tx.to_account is not None:
        parts.append(f'"to": {tx.to_account}')
    parts.append(f'"token": {tx.token_id}')
    parts.append(f'"amount": "{tx.amount}"')
    return "{" + ", ".join(parts) + "}"


def serialize_block_traces(blocks: Iterable[BlockTrace]) -> str:
    """Deterministic JSON: fixed key order, one transaction per line."""
    blocks = list(blocks)
    out = ['{"blocks": [\n']
    for bi, block in enumerate(blocks):
        out.append(f' {{"block_number": {block.block_number}, "txs": [\n')
        for ti, tx in enumerate(block.txs):
            comma = "," if ti < len(block.txs) - 1 else ""
            out.append(f"  {_tx_to_json_fields(tx)}{comma}\n")
        comma = "," if bi < len(blocks) - 1 else ""
        out.append(f" ]}}{comma}\n")
    out.append("]}\n")
    return "".join(out)


def write_block_traces(blocks: Iterable[BlockTrace], path: str | Path) -> None:
    Path(path).write_text(serialize_block_traces(blocks))


def _parse_account_field(raw: object, where: str, field: str) -> int | None:
    if raw is None:
        return None
    if not isinstance(raw, int) or isinstance(raw, bool) or raw < 0:
        raise TraceParseError(f"{where}: {field!r} must be a non-negative integer")
    return raw


def _parse_tx(raw: object, where: str) -> TxRecord:
    if not isinstance(raw, dict):
        raise TraceParseError(f"{where}: transaction must be an object")
    try:
        tx_type = TxType(raw["type"])
    except KeyError:
        raise TraceParseError(f"{where}: missing 'type'") from None
    except ValueError:
        raise TraceParseError(f"{where}: unknown tx_type {raw['type']!r}") from None
    amount_raw = raw.get("amount", "0")
    if isinstance(amount_raw, str):
        try:
            amount = int(amount_raw, 10)
        except ValueError:
            raise TraceParseError(f"{where}: 'amount' is not a decimal string") from None
    elif isinstance(amount_raw, int) and not isinstance(amount_raw, bool):
        amount = amount_raw
    else:
        raise TraceParseError(f"{where}: 'amount' must be a decimal string")
    token = raw.get("token", 0)
    if not isinstance(token, int) or isinstance(token, bool) or token < 0:
        raise TraceParseError(f"{where}: 'token' must be a non-negative integer")
    try:
        return TxRecord(
            tx_type,
            _parse_account_field(raw.get("from"), where, "from"),
            _parse_account_field(raw.get("to"), where, "to"),
            token,
            amount,
        )
    except TraceValidationError as exc:
        raise TraceParseError(f"{where}: {exc}") from exc


def parse_block_trace_text(text: str) -> list[BlockTrace]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TraceParseError(f"line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("blocks"), list):
        raise TraceParseError("top level must be an object with a 'blocks' list")
    blocks = []
    for bi, raw_block in enumerate(doc["blocks"]):
        where = f"blocks[{bi}]"
        if not isinstance(raw_block, dict):
            raise TraceParseError(f"{where}: block must be an object")
        number = raw_block.get("block_number")
        if not isinstance(number, int) or isinstance(number, bool):
            raise TraceParseError(f"{where}: 'block_number' must be an integer")
        raw_txs = raw_block.get("txs")
        if not isinstance(raw_txs, list) or not raw_txs:
            raise TraceParseError(f"{where}: 'txs' must be a non-empty list")
        txs = tuple(
            _parse_tx(raw_tx, f"{where}.txs[{ti}]") for ti, raw_tx in enumerate(raw_txs)
        )
        blocks.append(BlockTrace(number, txs))
    return blocks


def parse_block_trace(path: str | Path) -> list[BlockTrace]:
    """Load and validate a trace file; raises TraceParseError with the
    offending location."""
    text = Path(path).read_text()
    if not text.strip():
        raise TraceParseError(f"{path}: empty trace file")
    return parse_block_trace_text(text)
