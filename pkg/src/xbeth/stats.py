"""Statistics, distributions, time series and word frequencies over the datasets.

Means are kept as exact :class:`~fractions.Fraction` values and only rounded
(half-even, two decimals) when a report is emitted.  Interval series use
fixed 10,000-block buckets aligned to multiples of 10,000.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from collections import Counter, defaultdict
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .core import ZERO_ADDRESS, Address
from .datasets import (
    BlockRow,
    ContractCallRow,
    ContractInfoRow,
    Erc20TransferRow,
    Erc721TransferRow,
    InternalEtherTxRow,
    TokenMetadataRow,
    TxRow,
    dataset_path,
    fmt_decimal,
    read_rows,
)
from .decode import decode_extra_text
from .errors import EmptyReportError

log = logging.getLogger(__name__)

INTERVAL = 10_000
WEI = 10**18
ETHER_DECADES = range(-6, 8)

ERROR_CLASSES = {
    "out of gas": "out_of_gas",
    "reverted": "reverted",
    "bad instruction": "bad_instruction",
    "bad jump destination": "bad_jump_destination",
}


def interval_of(block_number: int, width: int = INTERVAL) -> int:
    return block_number - block_number % width


def normalize_error(label: str) -> str:
    """Map a client error label onto a stable report key (case-insensitive)."""
    key = " ".join(label.split()).lower()
    return ERROR_CLASSES.get(key, "other:" + key)


def mean(total: int, count: int) -> Fraction | None:
    return Fraction(total, count) if count else None


def _ranked(counter: Counter) -> list[list]:
    return [[k, n] for k, n in sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))]


def _series(counter: dict[int, object]) -> list[list]:
    return [[k, counter[k]] for k in sorted(counter)]


# --- dataset 1 ----------------------------------------------------------------


def stats_blocks(blocks: Sequence[BlockRow], txs: Sequence[TxRow] = ()) -> dict:
    """Block-level scalars plus transaction-count and gas-price series.

    Returns ``{"table1": ..., "series": ...}`` with exact means.  The mean
    block time is ``None`` for a single block.
    """
    if not blocks:
        raise EmptyReportError("no blocks in dataset 1")
    blocks = sorted(blocks, key=lambda b: b.number)
    n = len(blocks)
    tx_total = sum(b.tx_count for b in blocks)
    table = {
        "blocks": n,
        "transactions": tx_total,
        "miners": len({b.miner for b in blocks}),
        "mean_tx_per_block": Fraction(tx_total, n),
        "mean_block_time": Fraction(blocks[-1].timestamp - blocks[0].timestamp, n - 1) if n > 1 else None,
        "mean_block_size": Fraction(sum(b.size for b in blocks), n),
    }
    tx_count: dict[int, int] = defaultdict(int)
    for b in blocks:
        tx_count[interval_of(b.number)] += b.tx_count
    prices: dict[int, list[int]] = defaultdict(list)
    for t in txs:
        prices[interval_of(t.block_number)].append(int(t.gas_price))
    gas = [[k, min(v), Fraction(sum(v), len(v)), max(v)] for k, v in sorted(prices.items())]
    per_block = [
        [b.number, b.gas_price_min, b.gas_price_avg, b.gas_price_max] for b in blocks if b.tx_count
    ]
    return {"table1": table, "series": {"tx_count": _series(tx_count), "gas_price": gas},
            "per_block_gas_price": per_block}


def stats_throughput(table1: dict) -> Fraction | None:
    """Transactions per second: mean transactions per block over mean block time."""
    per_block, block_time = table1.get("mean_tx_per_block"), table1.get("mean_block_time")
    if per_block is None or block_time is None:
        return None
    block_time = Fraction(block_time)
    if block_time == 0:
        raise ZeroDivisionError("mean block time is zero")
    return Fraction(per_block) / block_time


def stats_miner_text(blocks: Iterable[BlockRow]) -> list[list]:
    words = Counter()
    for b in blocks:
        words.update(decode_extra_text(b.extra_data))
    return _ranked(words)


# --- dataset 2 ----------------------------------------------------------------


def ether_bucket(wei: int) -> str:
    """Decade bucket ``1e<k>`` holding ``[10**k, 10**(k+1))`` Ether, with under/overflow."""
    k = len(str(int(wei))) - 19 if wei > 0 else None
    if k is None or k < ETHER_DECADES.start:
        return "<1e-6"
    if k >= ETHER_DECADES.stop:
        return ">=1e8"
    return f"1e{k}"


def stats_ether(rows: Sequence[InternalEtherTxRow]) -> dict:
    addresses: set[Address] = set()
    volume: dict[int, int] = defaultdict(int)
    hist = Counter({"<1e-6": 0, **{f"1e{k}": 0 for k in ETHER_DECADES}, ">=1e8": 0})
    for r in rows:
        addresses.update((r.from_, r.to))
        volume[interval_of(r.block_number)] += int(r.value_wei)
        hist[ether_bucket(r.value_wei)] += 1
    values = [int(r.value_wei) for r in rows]
    return {
        "table2": {
            "transactions": len(rows),
            "addresses": len(addresses),
            "mean_ether": mean(sum(values), len(values) * WEI) if values else None,
            "max_ether": Fraction(max(values), WEI) if values else None,
        },
        "series": {"ether_volume": [[k, Fraction(volume[k], WEI)] for k in sorted(volume)]},
        "histograms": {"ether_value": [[k, n] for k, n in hist.items()]},
    }


# --- dataset 3 ----------------------------------------------------------------


def stats_contracts(rows: Sequence[ContractInfoRow], bucket_width: int = 256) -> dict:
    """Creation and deletion counts and code sizes.

    Rows flagged ``unseen_creation`` count as deletions only.
    """
    created = [r for r in rows if r.creation_block is not None]
    deleted = [r for r in rows if r.deleted]
    sizes = Counter(r.deployed_code_size_bytes // bucket_width * bucket_width for r in created)
    per_interval = Counter(interval_of(r.creation_block) for r in created)
    return {
        "table3": {
            "created": len(created),
            "creators": len({r.creator for r in created}),
            "deleted": len(deleted),
            "refund_addresses": len({r.refund_address for r in deleted}),
            "mean_code_size": mean(sum(r.deployed_code_size_bytes for r in created), len(created)),
        },
        "series": {"contracts_created": _series(per_interval)},
        "histograms": {"code_size": _series(sizes)},
    }


# --- dataset 4 ----------------------------------------------------------------


def stats_calls(rows: Sequence[ContractCallRow], top_n: int = 10) -> dict:
    """Call counts, call-type and error distributions, and the top-N selectors.

    Shares are taken over all calls and rendered with four decimals.
    """
    types = Counter({"call": 0, "delegatecall": 0, "staticcall": 0, "callcode": 0})
    types.update(r.call_type for r in rows)
    errors = Counter(normalize_error(r.error) for r in rows if r.error is not None)
    selectors = Counter("0x" + r.selector.hex() for r in rows if r.input_size >= 4)
    top, running = [], 0
    for sel, n in _ranked(selectors)[:top_n]:
        running += n
        top.append({
            "selector": sel,
            "count": n,
            "share": fmt_decimal(Fraction(n, len(rows)), 4),
            "cumulative_share": fmt_decimal(Fraction(running, len(rows)), 4),
        })
    return {
        "table4": {
            "calls": len(rows),
            "calls_with_input": sum(1 for r in rows if r.input_size >= 4),
            "calls_with_error": sum(errors.values()),
        },
        "call_types": dict(types),
        "error_types": _ranked(errors),
        "top_selectors": top,
        "series": {
            "calls": _series(Counter(interval_of(r.block_number) for r in rows)),
            "call_errors": _series(Counter(interval_of(r.block_number) for r in rows if r.error is not None)),
        },
    }


# --- datasets 5 and 6 -----------------------------------------------------------


def holder_count(rows: Iterable[Erc20TransferRow | Erc721TransferRow]) -> int:
    """Distinct senders and receivers, excluding the zero address."""
    holders = {a for r in rows for a in (r.from_, r.to)}
    holders.discard(ZERO_ADDRESS)
    return len(holders)


def token_table(rows: Sequence[Erc20TransferRow | Erc721TransferRow]) -> tuple[dict, list[list]]:
    per_token = Counter(str(r.token) for r in rows)
    table = {"contracts": len(per_token), "transfers": len(rows), "holders": holder_count(rows)}
    return table, _ranked(per_token)


def name_words(tokens: Iterable[TokenMetadataRow]) -> list[list]:
    words = Counter()
    for t in tokens:
        if t.name:
            words.update(decode_extra_text(t.name.encode("utf-8")))
    return _ranked(words)


def stats_tokens(
    erc20: Sequence[Erc20TransferRow] | None,
    erc721: Sequence[Erc721TransferRow] | None,
    tokens: Sequence[TokenMetadataRow] | None = None,
) -> dict:
    tables, popularity = {}, {}
    if erc20 is not None:
        tables["erc20"], popularity["erc20"] = token_table(erc20)
    if erc721 is not None:
        tables["erc721"], popularity["erc721"] = token_table(erc721)
    out = {"tables5_6": tables, "popularity": popularity}
    if tokens is not None:
        out["word_frequencies"] = {"token_names": name_words(tokens)}
    return out


def turnover_by_birth_block(rows: Iterable[Erc721TransferRow], token: Address, bucket: int = INTERVAL) -> list[list]:
    """Non-mint transfers per token id, summed by the bucket of the id's mint block.

    Ids whose mint is not in ``rows`` have no known birth block and are left out.
    """
    birth: dict[int, int] = {}
    moves: Counter = Counter()
    for r in rows:
        if r.token != token:
            continue
        tid = int(r.token_id)
        if r.from_ == ZERO_ADDRESS and tid not in birth:
            birth[tid] = r.block_number
        else:
            moves[tid] += 1
    series: dict[int, int] = defaultdict(int)
    for tid, block in birth.items():
        series[interval_of(block, bucket)] += moves[tid]
    return _series(series)


def busiest_token(rows: Iterable[Erc721TransferRow]) -> Address | None:
    counts = Counter(r.token for r in rows)
    if not counts:
        return None
    return min(counts, key=lambda t: (-counts[t], str(t)))


# --- report -----------------------------------------------------------------------


def emit(value):
    """Round every exact value in a report to two decimals, recursively."""
    if isinstance(value, Fraction):
        return fmt_decimal(value)
    if isinstance(value, dict):
        return {k: emit(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [emit(v) for v in value]
    return value


def _merge(report: dict, part: dict) -> None:
    for key, value in part.items():
        if isinstance(value, dict) and key in ("series", "histograms", "word_frequencies", "tables5_6", "popularity"):
            report.setdefault(key, {}).update(value)
        else:
            report[key] = value


def build_report(out_dir: Path, datasets: Iterable[int] = (1, 2, 3, 4, 5, 6)) -> tuple[dict, dict]:
    """Compute the report for the selected datasets from CSVs in ``out_dir``.

    Returns ``(report, extras)`` where ``extras`` holds plot series that are
    written as CSV only.  Missing files raise :class:`FileNotFoundError`.
    """
    selected = set(datasets)
    report: dict = {}
    extras: dict = {}
    if 1 in selected:
        blocks = read_rows(out_dir, "dataset1_blocks")
        part = stats_blocks(blocks, read_rows(out_dir, "dataset1_txs"))
        extras["gas_price_per_block"] = part.pop("per_block_gas_price")
        _merge(report, part)
        report["throughput"] = stats_throughput(report["table1"])
        _merge(report, {"word_frequencies": {"miners": stats_miner_text(blocks)}})
    if 2 in selected:
        _merge(report, stats_ether(read_rows(out_dir, "dataset2_internal_eth")))
    if 3 in selected:
        _merge(report, stats_contracts(read_rows(out_dir, "dataset3_contracts")))
    if 4 in selected:
        _merge(report, stats_calls(read_rows(out_dir, "dataset4_calls")))
    erc20 = read_rows(out_dir, "dataset5_erc20") if 5 in selected else None
    tokens = read_rows(out_dir, "dataset5_tokens") if 5 in selected else None
    erc721 = read_rows(out_dir, "dataset6_erc721") if 6 in selected else None
    if erc20 is not None or erc721 is not None:
        _merge(report, stats_tokens(erc20, erc721, tokens))
    if erc721 is not None:
        token = busiest_token(erc721)
        report["turnover"] = {
            "token": None if token is None else str(token),
            "bucket": INTERVAL,
            "series": [] if token is None else turnover_by_birth_block(erc721, token),
        }
    return emit(report), emit(extras)


def _csv(rows: list[list], header: list[str]) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    w.writerows(["" if v is None else v for v in row] for row in rows)
    return buf.getvalue().encode("utf-8")


SERIES_HEADERS = {
    "tx_count": ["interval_start", "tx_count"],
    "gas_price": ["interval_start", "gas_price_min", "gas_price_avg", "gas_price_max"],
    "gas_price_per_block": ["block_number", "gas_price_min", "gas_price_avg", "gas_price_max"],
    "ether_volume": ["interval_start", "ether"],
    "contracts_created": ["interval_start", "contracts"],
    "calls": ["interval_start", "calls"],
    "call_errors": ["interval_start", "errors"],
    "turnover": ["birth_interval_start", "turnover"],
}


def write_report(out_dir: Path, datasets: Iterable[int] = (1, 2, 3, 4, 5, 6)) -> dict:
    """Write ``stats.json`` plus ``series_<name>.csv`` and ``hist_<name>.csv`` into ``out_dir``."""
    out_dir = Path(out_dir)
    report, extras = build_report(out_dir, datasets)
    (out_dir / "stats.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    series = dict(report.get("series", {}))
    series.update(extras)
    if "turnover" in report:
        series["turnover"] = report["turnover"]["series"]
    for name, rows in series.items():
        (out_dir / f"series_{name}.csv").write_bytes(_csv(rows, SERIES_HEADERS[name]))
    for name, rows in report.get("histograms", {}).items():
        (out_dir / f"hist_{name}.csv").write_bytes(_csv(rows, ["bucket", "count"]))
    log.info("wrote stats.json with %d sections", len(report))
    return report


def available_datasets(out_dir: Path) -> set[int]:
    from .datasets import DATASET_FILES

    return {n for n, names in DATASET_FILES.items() if all(dataset_path(out_dir, f) for f in names)}
