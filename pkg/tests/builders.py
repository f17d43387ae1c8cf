"""Hand-built blocks for unit tests."""

from xbeth.core import (
    Address, Amount256, BlockBundle, CallAction, CreateAction, Hash32, LogEntry,
    RawBlock, RawTransaction, ReceiptRecord, RewardAction, SuicideAction, TraceRecord,
)

ETHER = 10**18
MINER = Address(bytes(19) + b"\xaa")


def addr(n: int) -> Address:
    return Address(n.to_bytes(20, "big"))


def h(n: int) -> Hash32:
    return Hash32(n.to_bytes(32, "big"))


def tx(i, sender, to, value=0, gas_price=20 * 10**9, data=b"", block=1):
    return RawTransaction(h(block * 1000 + i), i, sender, to, Amount256(value), 100_000,
                          Amount256(gas_price), data, i)


def block(number=1, txs=(), miner=MINER, timestamp=1_500_000_000, extra=b""):
    return RawBlock(number, h(10**6 + number), h(10**6 + number - 1), miner, timestamp,
                    10_000_000, 21_000 * len(txs), 500 + 100 * len(txs), extra, tuple(txs))


def call(t, path=(), *, to=None, value=0, data=b"", error=None, call_type="call", sender=None, block_number=1):
    return TraceRecord(block_number, t.hash, t.index, tuple(path),
                       CallAction(call_type, sender or t.from_, to or t.to, Amount256(value), data, 21_000),
                       error=error)


def create(t, path=(), *, address, code=b"\x60\x00", value=0, error=None, sender=None, block_number=1):
    return TraceRecord(block_number, t.hash, t.index, tuple(path),
                       CreateAction(sender or t.from_, Amount256(value), b"\x60\x80",
                                    None if error else address, None if error else code, 50_000),
                       error=error)


def suicide(t, path, *, address, refund, balance=0, block_number=1):
    return TraceRecord(block_number, t.hash, t.index, tuple(path),
                       SuicideAction(address, refund, Amount256(balance)))


def reward(author=MINER, value=3 * ETHER, block_number=1, kind="block"):
    return TraceRecord(block_number, None, None, (), RewardAction(author, Amount256(value), kind))


def bundle(b, traces=(), logs=None, gas_used=21_000):
    logs = logs or {}
    receipts, total = [], 0
    for t in b.transactions:
        total += gas_used
        receipts.append(ReceiptRecord(t.hash, b.number, gas_used, total, None, tuple(logs.get(t.index, ()))))
    return BlockBundle(b, tuple(receipts), tuple(traces))


def log(token, topics, data=b"", index=0):
    return LogEntry(token, tuple(topics), data, index)
