"""How a reverted frame hides the Ether moved beneath it.

A transaction calls C with 1 Ether; C forwards 1 Ether to B, which runs
out of gas after paying A.  Only the top-level transfer survives.
"""

from xbeth.core import (
    Address, Amount256, BlockBundle, CallAction, Hash32, RawBlock, RawTransaction,
    ReceiptRecord, RewardAction, TraceRecord,
)
from xbeth.datasets import build_dataset2, build_dataset4

ETHER = 10**18
A, B, C, MINER = (Address(bytes(19) + bytes([i])) for i in (1, 2, 3, 9))
TX = Hash32(bytes(31) + b"\x01")


def frame(path, src, dst, value, error=None):
    return TraceRecord(1, TX, 0, path, CallAction("call", src, dst, Amount256(value)), error=error)


tx = RawTransaction(TX, 0, A, C, Amount256(ETHER), 90_000, Amount256(10**9), b"", 0)
block = RawBlock(1, Hash32(bytes(32)), Hash32(bytes(32)), MINER, 0, 10**7, 60_000, 700, b"demo", (tx,))
traces = (
    frame((), A, C, ETHER),
    frame((0,), C, B, ETHER, error="Out of gas"),
    frame((0, 0), B, A, ETHER // 2),
    TraceRecord(1, None, None, (), RewardAction(MINER, Amount256(3 * ETHER))),
)
bundle = BlockBundle(block, (ReceiptRecord(TX, 1, 60_000, 60_000),), traces)

for row in build_dataset2([bundle]):
    print("moved:", row.trace_address, row.from_, "->", row.to, row.value_wei)
for row in build_dataset4([bundle]):
    print("call:", row.trace_address, row.error or "ok")
