"""Brute-force expected statistics for a generated chain.

Computed straight from the generator's truth records with plain loops.  Word
lists and error classes come from what the generator knows it wrote, not
from the tokenizer or normalization table the statistics module uses.
"""

from __future__ import annotations

from fractions import Fraction

from ..core import ZERO_ADDRESS
from ..datasets import fmt_decimal

INTERVAL = 10_000

# how each label the generator emits must be reported
ERROR_CLASS = {
    "Out of gas": "out_of_gas",
    "out of gas": "out_of_gas",
    "Reverted": "reverted",
    "Bad instruction": "bad_instruction",
    "Bad jump destination": "bad_jump_destination",
    "Stack underflow": "other:stack underflow",
    "Mutable Call In Static Context": "other:mutable call in static context",
}


def _bump(d, key, n=1):
    d[key] = d.get(key, 0) + n


def _ranked(counts: dict) -> list:
    items = list(counts.items())
    items.sort(key=lambda kv: kv[0])
    items.sort(key=lambda kv: kv[1], reverse=True)
    return [[k, v] for k, v in items]


def _by_interval(pairs) -> list:
    acc: dict[int, int] = {}
    for block, n in pairs:
        _bump(acc, block // INTERVAL * INTERVAL, n)
    return [[k, acc[k]] for k in sorted(acc)]


def _ether(wei_total, count=1) -> str:
    return fmt_decimal(Fraction(wei_total, count * 10**18))


def expected_stats(truth, tables: dict, token_words: dict[str, list[str]]) -> dict:
    blocks = tables["dataset1_blocks"]
    txs = tables["dataset1_txs"]
    ether = tables["dataset2_internal_eth"]
    contracts = tables["dataset3_contracts"]
    calls = tables["dataset4_calls"]
    erc20 = tables["dataset5_erc20"]
    tokens = tables["dataset5_tokens"]
    erc721 = tables["dataset6_erc721"]

    # table 1
    n_blocks = len(blocks)
    total_size = 0
    miners = set()
    for b in blocks:
        total_size += b.size
        miners.add(b.miner)
    deltas = [blocks[i].timestamp - blocks[i - 1].timestamp for i in range(1, n_blocks)]
    mean_time = Fraction(sum(deltas), len(deltas)) if deltas else None
    mean_txs = Fraction(len(txs), n_blocks)
    table1 = {
        "blocks": n_blocks,
        "transactions": len(txs),
        "miners": len(miners),
        "mean_tx_per_block": fmt_decimal(mean_txs),
        "mean_block_time": None if mean_time is None else fmt_decimal(mean_time),
        "mean_block_size": fmt_decimal(Fraction(total_size, n_blocks)),
    }
    throughput = None if not mean_time else fmt_decimal(mean_txs / mean_time)

    gas: dict[int, list[int]] = {}
    for t in txs:
        gas.setdefault(t.block_number // INTERVAL * INTERVAL, []).append(int(t.gas_price))
    gas_series = [
        [k, min(v), fmt_decimal(Fraction(sum(v), len(v))), max(v)] for k, v in sorted(gas.items())
    ]

    # table 2
    addrs = set()
    total = 0
    biggest = 0
    hist = {"<1e-6": 0}
    for k in range(-6, 8):
        hist[f"1e{k}"] = 0
    hist[">=1e8"] = 0
    volume: dict[int, int] = {}
    for r in ether:
        addrs.add(r.from_)
        addrs.add(r.to)
        v = int(r.value_wei)
        total += v
        biggest = max(biggest, v)
        _bump(volume, r.block_number // INTERVAL * INTERVAL, v)
        if v < 10**12:
            hist["<1e-6"] += 1
        elif v >= 10**26:
            hist[">=1e8"] += 1
        else:
            for k in range(-6, 8):
                if 10 ** (18 + k) <= v < 10 ** (19 + k):
                    hist[f"1e{k}"] += 1
    table2 = {
        "transactions": len(ether),
        "addresses": len(addrs),
        "mean_ether": _ether(total, len(ether)) if ether else None,
        "max_ether": _ether(biggest) if ether else None,
    }

    # table 3
    created = [c for c in contracts if c.creation_block is not None]
    code_total = sum(c.deployed_code_size_bytes for c in created)
    sizes: dict[int, int] = {}
    for c in created:
        _bump(sizes, c.deployed_code_size_bytes // 256 * 256)
    table3 = {
        "created": len(created),
        "creators": len({c.creator for c in created}),
        "deleted": sum(1 for c in contracts if c.deleted),
        "refund_addresses": len({c.refund_address for c in contracts if c.deleted}),
        "mean_code_size": fmt_decimal(Fraction(code_total, len(created))) if created else None,
    }

    # table 4
    call_types = {"call": 0, "delegatecall": 0, "staticcall": 0, "callcode": 0}
    errors: dict[str, int] = {}
    selectors: dict[str, int] = {}
    with_input = with_error = 0
    for c in calls:
        call_types[c.call_type] += 1
        if c.input_size >= 4:
            with_input += 1
            _bump(selectors, "0x" + c.selector.hex())
        if c.error is not None:
            with_error += 1
            _bump(errors, ERROR_CLASS[c.error])
    top = []
    running = 0
    for sel, n in _ranked(selectors)[:10]:
        running += n
        top.append({
            "selector": sel,
            "count": n,
            "share": fmt_decimal(Fraction(n, len(calls)), 4),
            "cumulative_share": fmt_decimal(Fraction(running, len(calls)), 4),
        })

    # tables 5 and 6
    def token_table(rows):
        holders = set()
        per_token: dict[str, int] = {}
        for r in rows:
            _bump(per_token, str(r.token))
            for a in (r.from_, r.to):
                if a != ZERO_ADDRESS:
                    holders.add(a)
        return {"contracts": len(per_token), "transfers": len(rows), "holders": len(holders)}, _ranked(per_token)

    t5, pop5 = token_table(erc20)
    t6, pop6 = token_table(erc721)

    miner_words: dict[str, int] = {}
    for words in truth.miner_words:
        for w in words:
            _bump(miner_words, w)
    name_words: dict[str, int] = {}
    for t in tokens:
        for w in token_words.get(str(t.token), ()):
            _bump(name_words, w)

    # turnover of the busiest ERC721 token, by birth block of each token id
    turnover = {"token": None, "bucket": INTERVAL, "series": []}
    if pop6:
        token = pop6[0][0]
        born: dict[int, int] = {}
        moves: dict[int, int] = {}
        for r in erc721:
            if str(r.token) != token:
                continue
            tid = int(r.token_id)
            if r.from_ == ZERO_ADDRESS and tid not in born:
                born[tid] = r.block_number
            else:
                _bump(moves, tid)
        buckets: dict[int, int] = {}
        for tid, block in born.items():
            _bump(buckets, block // INTERVAL * INTERVAL, moves.get(tid, 0))
        turnover = {"token": token, "bucket": INTERVAL, "series": [[k, buckets[k]] for k in sorted(buckets)]}

    return {
        "table1": table1,
        "throughput": throughput,
        "table2": table2,
        "table3": table3,
        "table4": {"calls": len(calls), "calls_with_input": with_input, "calls_with_error": with_error},
        "call_types": call_types,
        "error_types": _ranked(errors),
        "top_selectors": top,
        "tables5_6": {"erc20": t5, "erc721": t6},
        "popularity": {"erc20": pop5, "erc721": pop6},
        "word_frequencies": {"miners": _ranked(miner_words), "token_names": _ranked(name_words)},
        "series": {
            "tx_count": _by_interval((b.number, b.tx_count) for b in blocks),
            "gas_price": gas_series,
            "ether_volume": [[k, _ether(volume[k])] for k in sorted(volume)],
            "contracts_created": _by_interval((c.creation_block, 1) for c in created),
            "calls": _by_interval((c.block_number, 1) for c in calls),
            "call_errors": _by_interval((c.block_number, 1) for c in calls if c.error is not None),
        },
        "histograms": {
            "ether_value": [[k, v] for k, v in hist.items()],
            "code_size": [[k, sizes[k]] for k in sorted(sizes)],
        },
        "turnover": turnover,
    }
