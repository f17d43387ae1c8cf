"""Builders for the six analysis datasets and their CSV files.

Each builder consumes bundles in increasing height order and yields rows in
the global order (block, transaction position, trace address, log index).
:func:`transform` partitions a height range across worker threads and merges
the partition outputs by that key, so the files do not depend on the worker
count.
"""

from __future__ import annotations

import csv
import gzip
import hashlib
import heapq
import io
import json
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import astuple, dataclass, fields
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator

from .core import (
    Address,
    Amount256,
    BlockBundle,
    CallAction,
    CreateAction,
    Hash32,
    RewardAction,
    SuicideAction,
    TraceRecord,
    hex_bytes,
    parse_bytes,
)
from .decode import ERC20, ERC20_NONSTANDARD, ERC721, classify_transfer_log, extract_selector
from .errors import IntegrityError

# --- field formatting ---------------------------------------------------------


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (bytes, bytearray)) and not isinstance(value, (Address, Hash32)):
        return hex_bytes(value)
    if isinstance(value, tuple):
        return "[" + ",".join(str(i) for i in value) + "]"
    if isinstance(value, Fraction):
        return fmt_decimal(value)
    return str(value)


def fmt_decimal(value: Fraction, places: int = 2) -> str:
    """Render a rational rounded half-even to ``places`` decimals."""
    scaled = round(Fraction(value) * 10**places)
    sign = "-" if scaled < 0 else ""
    digits = str(abs(scaled)).rjust(places + 1, "0")
    return f"{sign}{digits[:-places]}.{digits[-places:]}" if places else f"{sign}{digits}"


def _opt(text: str, fn):
    return None if text == "" else fn(text)


def _trace_address(text: str) -> tuple[int, ...]:
    inner = text.strip("[]")
    return tuple(int(i) for i in inner.split(",")) if inner else ()


def _bool(text: str) -> bool:
    if text not in ("true", "false"):
        raise ValueError(f"not a boolean: {text!r}")
    return text == "true"


_PARSERS = {
    "address": Address.parse,
    "hash": Hash32.parse,
    "int": int,
    "amount": Amount256.parse,
    "bytes": parse_bytes,
    "text": str,
    "trace": _trace_address,
    "bool": _bool,
    "decimal": Fraction,
}


class Row:
    """Mixin giving row dataclasses a CSV encoding driven by ``_types``."""

    _types: tuple[str, ...] = ()
    _optional: frozenset[str] = frozenset()

    @classmethod
    def header(cls) -> list[str]:
        return [f.name.rstrip("_") for f in fields(cls)]

    def to_csv(self) -> list[str]:
        return [fmt(v) for v in astuple(self)]

    @classmethod
    def from_csv(cls, values: list[str]) -> "Row":
        names = [f.name for f in fields(cls)]
        if len(values) != len(names):
            raise ValueError(f"{cls.__name__}: expected {len(names)} fields, got {len(values)}")
        out = []
        for name, kind, text in zip(names, cls._types, values):
            if text == "" and name in cls._optional:
                out.append(None)
            else:
                out.append(_PARSERS[kind](text))
        return cls(*out)


@dataclass(frozen=True, slots=True)
class BlockRow(Row):
    number: int
    hash: Hash32
    miner: Address
    timestamp: int
    gas_limit: int
    gas_used: int
    size: int
    extra_data: bytes
    tx_count: int
    gas_price_min: int | None
    gas_price_avg: Fraction | None
    gas_price_max: int | None

    _types = ("int", "hash", "address", "int", "int", "int", "int", "bytes", "int", "int", "decimal", "int")
    _optional = frozenset({"gas_price_min", "gas_price_avg", "gas_price_max"})


@dataclass(frozen=True, slots=True)
class TxRow(Row):
    tx_hash: Hash32
    block_number: int
    tx_index: int
    from_: Address
    to: Address | None
    value: Amount256
    gas_price: Amount256
    gas_used: int
    miner_reward: Amount256
    input_size: int
    error: str | None

    _types = ("hash", "int", "int", "address", "address", "amount", "amount", "int", "amount", "int", "text")
    _optional = frozenset({"to", "error"})


@dataclass(frozen=True, slots=True)
class InternalEtherTxRow(Row):
    block_number: int
    tx_hash: Hash32
    trace_address: tuple[int, ...]
    kind: str
    from_: Address
    to: Address
    value_wei: Amount256

    _types = ("int", "hash", "trace", "text", "address", "address", "amount")


@dataclass(frozen=True, slots=True)
class ContractInfoRow(Row):
    contract_address: Address
    creator: Address | None
    creation_block: int | None
    creation_tx_hash: Hash32 | None
    initial_value: Amount256 | None
    creation_code: bytes | None
    deployed_code: bytes | None
    deployed_code_size_bytes: int | None
    deleted: bool
    deletion_block: int | None
    refund_address: Address | None
    refund_value: Amount256 | None
    provenance: str | None

    _types = ("address", "address", "int", "hash", "amount", "bytes", "bytes", "int", "bool",
              "int", "address", "amount", "text")
    _optional = frozenset({
        "creator", "creation_block", "creation_tx_hash", "initial_value", "creation_code",
        "deployed_code", "deployed_code_size_bytes", "deletion_block", "refund_address",
        "refund_value", "provenance",
    })


@dataclass(frozen=True, slots=True)
class ContractCallRow(Row):
    block_number: int
    tx_hash: Hash32
    trace_address: tuple[int, ...]
    call_type: str
    from_: Address
    to: Address
    selector: bytes | None
    input_size: int
    value_wei: Amount256
    gas_used: int
    error: str | None

    _types = ("int", "hash", "trace", "text", "address", "address", "bytes", "int", "amount", "int", "text")
    _optional = frozenset({"selector", "error"})


@dataclass(frozen=True, slots=True)
class Erc20TransferRow(Row):
    token: Address
    from_: Address
    to: Address
    value: Amount256
    block_number: int
    tx_hash: Hash32
    log_index: int

    _types = ("address", "address", "address", "amount", "int", "hash", "int")


@dataclass(frozen=True, slots=True)
class TokenMetadataRow(Row):
    token: Address
    name: str | None = None
    symbol: str | None = None
    decimals: int | None = None
    total_supply: Amount256 | None = None

    _types = ("address", "text", "text", "int", "amount")
    _optional = frozenset({"name", "symbol", "decimals", "total_supply"})


@dataclass(frozen=True, slots=True)
class Erc721TransferRow(Row):
    token: Address
    from_: Address
    to: Address
    token_id: Amount256
    block_number: int
    tx_hash: Hash32
    log_index: int

    _types = ("address", "address", "address", "amount", "int", "hash", "int")


FILES = {
    "dataset1_blocks": BlockRow,
    "dataset1_txs": TxRow,
    "dataset2_internal_eth": InternalEtherTxRow,
    "dataset3_contracts": ContractInfoRow,
    "dataset4_calls": ContractCallRow,
    "dataset5_erc20": Erc20TransferRow,
    "dataset5_tokens": TokenMetadataRow,
    "dataset6_erc721": Erc721TransferRow,
}

DATASET_FILES = {
    1: ("dataset1_blocks", "dataset1_txs"),
    2: ("dataset2_internal_eth",),
    3: ("dataset3_contracts",),
    4: ("dataset4_calls",),
    5: ("dataset5_erc20", "dataset5_tokens"),
    6: ("dataset6_erc721",),
}


# --- trace helpers ------------------------------------------------------------


def ordered_traces(bundle: BlockBundle) -> list[TraceRecord]:
    """Transaction traces in (position, depth-first) order, then reward traces."""
    positions = {tx.hash: tx.index for tx in bundle.block.transactions}
    tx_traces, rewards = [], []
    for t in bundle.traces:
        if t.tx_hash is None:
            rewards.append(t)
        elif t.tx_hash not in positions:
            raise IntegrityError(f"block {bundle.number}: orphan trace for tx {t.tx_hash}")
        else:
            tx_traces.append(t)
    tx_traces.sort(key=lambda t: (positions[t.tx_hash], t.trace_address))
    return tx_traces + rewards


def effective_flags(traces: list[TraceRecord]) -> list[bool]:
    """For ordered traces, whether each one and all of its ancestors are error-free."""
    ok: dict[tuple, bool] = {}
    out = []
    for t in traces:
        if t.tx_hash is None:
            out.append(t.error is None)
            continue
        parent = ok.get((t.tx_hash, t.trace_address[:-1]), True) if t.trace_address else True
        flag = parent and t.error is None
        ok[(t.tx_hash, t.trace_address)] = flag
        out.append(flag)
    return out


# --- builders -----------------------------------------------------------------


def build_dataset1(bundles: Iterable[BlockBundle]) -> tuple[list[BlockRow], list[TxRow]]:
    blocks: list[BlockRow] = []
    txs: list[TxRow] = []
    for bundle in bundles:
        b = bundle.block
        if len(bundle.receipts) != len(b.transactions):
            raise IntegrityError(f"block {b.number}: receipt count does not match transactions")
        roots = {t.tx_hash: t for t in bundle.traces if t.tx_hash is not None and not t.trace_address}
        prices = [tx.gas_price for tx in b.transactions]
        blocks.append(
            BlockRow(
                number=b.number,
                hash=b.hash,
                miner=b.miner,
                timestamp=b.timestamp,
                gas_limit=b.gas_limit,
                gas_used=b.gas_used,
                size=b.size,
                extra_data=b.extra_data,
                tx_count=len(prices),
                gas_price_min=min(prices) if prices else None,
                gas_price_avg=Fraction(sum(prices), len(prices)) if prices else None,
                gas_price_max=max(prices) if prices else None,
            )
        )
        for tx, receipt in zip(b.transactions, bundle.receipts):
            if receipt.tx_hash != tx.hash:
                raise IntegrityError(f"block {b.number}: no receipt for tx {tx.hash}")
            root = roots.get(tx.hash)
            if root is None:
                raise IntegrityError(f"block {b.number}: no root trace for tx {tx.hash}")
            txs.append(
                TxRow(
                    tx_hash=tx.hash,
                    block_number=b.number,
                    tx_index=tx.index,
                    from_=tx.from_,
                    to=tx.to,
                    value=tx.value,
                    gas_price=tx.gas_price,
                    gas_used=receipt.gas_used,
                    miner_reward=Amount256(receipt.gas_used) * tx.gas_price,
                    input_size=len(tx.input),
                    error=root.error,
                )
            )
    return blocks, txs


def build_dataset2(bundles: Iterable[BlockBundle]) -> list[InternalEtherTxRow]:
    """Ether moved by calls and self-destructs that were not rolled back.

    Reward traces mint rather than transfer and produce no rows.
    """
    rows = []
    for bundle in bundles:
        traces = ordered_traces(bundle)
        for t, ok in zip(traces, effective_flags(traces)):
            if not ok:
                continue
            a = t.action
            if isinstance(a, CallAction) and a.value > 0:
                rows.append(InternalEtherTxRow(t.block_number, t.tx_hash, t.trace_address,
                                               "call_value", a.from_, a.to, a.value))
            elif isinstance(a, SuicideAction) and a.balance > 0:
                rows.append(InternalEtherTxRow(t.block_number, t.tx_hash, t.trace_address,
                                               "suicide_refund", a.address, a.refund_address, a.balance))
    return rows


@dataclass(frozen=True, slots=True)
class ContractEvent:
    """A creation or self-destruct, in global trace order, for the deletion join."""

    block_number: int
    tx_hash: Hash32
    trace_address: tuple[int, ...]
    action: CreateAction | SuicideAction


def contract_events(bundles: Iterable[BlockBundle], skips: Counter | None = None) -> list[ContractEvent]:
    events = []
    for bundle in bundles:
        traces = ordered_traces(bundle)
        for t, ok in zip(traces, effective_flags(traces)):
            a = t.action
            if isinstance(a, CreateAction):
                if t.error is None and a.result_address is not None:
                    events.append(ContractEvent(t.block_number, t.tx_hash, t.trace_address, a))
                elif skips is not None:
                    skips["failed_create"] += 1
            elif isinstance(a, SuicideAction) and ok:
                events.append(ContractEvent(t.block_number, t.tx_hash, t.trace_address, a))
    return events


def join_contracts(events: Iterable[ContractEvent]) -> list[ContractInfoRow]:
    """Turn ordered creation/suicide events into one row per contract lifecycle.

    A self-destruct closes the most recent open lifecycle of its address; one
    with no open lifecycle yields a row flagged ``unseen_creation``.
    """
    rows: list[ContractInfoRow] = []
    open_rows: dict[Address, int] = {}
    for ev in events:
        a = ev.action
        if isinstance(a, CreateAction):
            code = a.deployed_code or b""
            open_rows[a.result_address] = len(rows)
            rows.append(
                ContractInfoRow(
                    contract_address=a.result_address,
                    creator=a.from_,
                    creation_block=ev.block_number,
                    creation_tx_hash=ev.tx_hash,
                    initial_value=a.value,
                    creation_code=a.init_code,
                    deployed_code=code,
                    deployed_code_size_bytes=len(code),
                    deleted=False,
                    deletion_block=None,
                    refund_address=None,
                    refund_value=None,
                    provenance=None,
                )
            )
            continue
        idx = open_rows.pop(a.address, None)
        if idx is None:
            rows.append(
                ContractInfoRow(a.address, None, None, None, None, None, None, None, True,
                                ev.block_number, a.refund_address, a.balance, "unseen_creation")
            )
        else:
            r = rows[idx]
            rows[idx] = ContractInfoRow(
                r.contract_address, r.creator, r.creation_block, r.creation_tx_hash, r.initial_value,
                r.creation_code, r.deployed_code, r.deployed_code_size_bytes, True,
                ev.block_number, a.refund_address, a.balance, None,
            )
    return rows


def build_dataset3(bundles: Iterable[BlockBundle], skips: Counter | None = None) -> list[ContractInfoRow]:
    return join_contracts(contract_events(bundles, skips))


def build_dataset4(bundles: Iterable[BlockBundle]) -> list[ContractCallRow]:
    rows = []
    for bundle in bundles:
        for t in ordered_traces(bundle):
            a = t.action
            if isinstance(a, CallAction):
                rows.append(
                    ContractCallRow(
                        block_number=t.block_number,
                        tx_hash=t.tx_hash,
                        trace_address=t.trace_address,
                        call_type=a.call_type,
                        from_=a.from_,
                        to=a.to,
                        selector=extract_selector(a.input),
                        input_size=len(a.input),
                        value_wei=a.value,
                        gas_used=a.gas_used,
                        error=t.error,
                    )
                )
    return rows


def _transfers(bundles: Iterable[BlockBundle], wanted: tuple[str, ...], skips: Counter | None):
    for bundle in bundles:
        for receipt in bundle.receipts:
            for log in receipt.logs:
                d = classify_transfer_log(log, skips)
                if d is not None and d.standard in wanted:
                    yield d, bundle.number, receipt.tx_hash


def build_dataset5(
    bundles: Iterable[BlockBundle],
    metadata=None,
    at_block: int | None = None,
    skips: Counter | None = None,
) -> tuple[list[Erc20TransferRow], list[TokenMetadataRow]]:
    """ERC20 transfer rows plus one metadata row per emitting token.

    ``metadata`` is an optional callable ``(token, at_block) -> dict`` (see
    :func:`xbeth.ingest.fetch_token_metadata`); without it, metadata rows
    carry token addresses only.
    """
    rows = [
        Erc20TransferRow(d.token, d.from_, d.to, d.amount_or_token_id, n, tx_hash, d.log_index)
        for d, n, tx_hash in _transfers(bundles, (ERC20, ERC20_NONSTANDARD), skips)
    ]
    tokens = sorted({r.token for r in rows})
    if at_block is None:
        at_block = max((r.block_number for r in rows), default=0)
    meta_rows = []
    for token in tokens:
        info = metadata(token, at_block) if metadata is not None else {}
        supply = info.get("total_supply")
        meta_rows.append(
            TokenMetadataRow(
                token=token,
                name=info.get("name"),
                symbol=info.get("symbol"),
                decimals=info.get("decimals"),
                total_supply=None if supply is None else Amount256(supply),
            )
        )
    return rows, meta_rows


def build_dataset6(bundles: Iterable[BlockBundle], skips: Counter | None = None) -> list[Erc721TransferRow]:
    return [
        Erc721TransferRow(d.token, d.from_, d.to, d.amount_or_token_id, n, tx_hash, d.log_index)
        for d, n, tx_hash in _transfers(bundles, (ERC721,), skips)
    ]


# --- CSV io -------------------------------------------------------------------


def csv_bytes(row_type: type[Row], rows: Iterable[Row]) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(row_type.header())
    for r in rows:
        w.writerow(r.to_csv())
    return buf.getvalue().encode("utf-8")


def dataset_path(out_dir: Path, name: str) -> Path | None:
    """Existing CSV for dataset file ``name`` (plain or gzipped), or None."""
    for suffix in (".csv", ".csv.gz"):
        p = Path(out_dir) / (name + suffix)
        if p.exists():
            return p
    return None


def read_csv_table(path: Path) -> tuple[list[str], list[list[str]]]:
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rt", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise IntegrityError(f"{path.name}: empty file")
        return header, [row for row in reader]


def read_rows(out_dir: Path, name: str) -> list[Row]:
    path = dataset_path(out_dir, name)
    if path is None:
        raise FileNotFoundError(f"{name}.csv not found in {out_dir}")
    row_type = FILES[name]
    header, rows = read_csv_table(path)
    if header != row_type.header():
        raise IntegrityError(f"{path.name}: unexpected header {header}")
    try:
        return [row_type.from_csv(r) for r in rows]
    except ValueError as exc:
        raise IntegrityError(f"{path.name}: {exc}") from exc


def write_file(out_dir: Path, name: str, data: bytes, gz: bool = False) -> Path:
    path = Path(out_dir) / (name + (".csv.gz" if gz else ".csv"))
    stale = Path(out_dir) / (name + (".csv" if gz else ".csv.gz"))
    if stale.exists():
        stale.unlink()
    if gz:
        with open(path, "wb") as fh, gzip.GzipFile(fileobj=fh, mode="wb", mtime=0, filename="") as g:
            g.write(data)
    else:
        path.write_bytes(data)
    return path


# --- orchestration ------------------------------------------------------------


def _partitions(start: int, end: int, workers: int) -> list[tuple[int, int]]:
    n = end - start + 1
    k = max(1, min(workers, n))
    step, extra = divmod(n, k)
    out, lo = [], start
    for i in range(k):
        hi = lo + step + (1 if i < extra else 0) - 1
        out.append((lo, hi))
        lo = hi + 1
    return out


def _build_partition(archive: Path, lo: int, hi: int, selected: frozenset[int]) -> dict:
    from .ingest import read_raw

    bundles = list(read_raw(archive, lo, hi))
    skips: Counter = Counter()
    out: dict = {"skips": skips}
    if 1 in selected:
        out["dataset1_blocks"], out["dataset1_txs"] = build_dataset1(bundles)
    if 2 in selected:
        out["dataset2_internal_eth"] = build_dataset2(bundles)
    if 3 in selected:
        out["events3"] = contract_events(bundles, skips)
    if 4 in selected:
        out["dataset4_calls"] = build_dataset4(bundles)
    if 5 in selected:
        out["dataset5_erc20"], _ = build_dataset5(bundles, skips=skips)
    if 6 in selected:
        # dataset 5 already counted the shared Transfer-log skips
        out["dataset6_erc721"] = build_dataset6(bundles, None if 5 in selected else skips)
    return out


def _merge(parts: list[list], key) -> list:
    return list(heapq.merge(*parts, key=key))


def transform(
    archive: Path,
    out_dir: Path,
    start: int | None = None,
    end: int | None = None,
    datasets: Iterable[int] = (1, 2, 3, 4, 5, 6),
    workers: int = 1,
    gz: bool = False,
    metadata=None,
) -> dict:
    """Build the selected datasets for ``start..end`` and write CSVs plus ``manifest.json``.

    Returns the manifest: per-file row count and SHA-256 of the uncompressed
    CSV bytes, the processed range and skip counters.
    """
    from .ingest import archived_heights

    archive, out_dir = Path(archive), Path(out_dir)
    selected = frozenset(datasets)
    if start is None or end is None:
        heights = archived_heights(archive)
        if not heights:
            from .errors import MissingBlockError

            raise MissingBlockError(start or 0, "raw archive is empty")
        start = min(heights) if start is None else start
        end = max(heights) if end is None else end
    parts = _partitions(start, end, workers)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(lambda p: _build_partition(archive, p[0], p[1], selected), parts))

    by_block = lambda r: r.block_number  # noqa: E731
    tables: dict[str, list[Row]] = {}
    skips: Counter = Counter()
    for r in results:
        skips.update(r["skips"])
    if 1 in selected:
        tables["dataset1_blocks"] = _merge([r["dataset1_blocks"] for r in results], lambda r: r.number)
        tables["dataset1_txs"] = _merge([r["dataset1_txs"] for r in results], by_block)
    if 2 in selected:
        tables["dataset2_internal_eth"] = _merge([r["dataset2_internal_eth"] for r in results], by_block)
    if 3 in selected:
        events = _merge([r["events3"] for r in results], by_block)
        tables["dataset3_contracts"] = join_contracts(events)
    if 4 in selected:
        tables["dataset4_calls"] = _merge([r["dataset4_calls"] for r in results], by_block)
    if 5 in selected:
        transfers = _merge([r["dataset5_erc20"] for r in results], by_block)
        tables["dataset5_erc20"] = transfers
        tokens = sorted({r.token for r in transfers})
        meta = []
        for token in tokens:
            info = metadata(token, end) if metadata is not None else {}
            supply = info.get("total_supply")
            meta.append(TokenMetadataRow(token, info.get("name"), info.get("symbol"), info.get("decimals"),
                                         None if supply is None else Amount256(supply)))
        tables["dataset5_tokens"] = meta
    if 6 in selected:
        tables["dataset6_erc721"] = _merge([r["dataset6_erc721"] for r in results], by_block)

    out_dir.mkdir(parents=True, exist_ok=True)
    files = {}
    for name, rows in tables.items():
        data = csv_bytes(FILES[name], rows)
        path = write_file(out_dir, name, data, gz)
        files[path.name] = {"rows": len(rows), "sha256": hashlib.sha256(data).hexdigest()}
    manifest = {
        "range": [start, end],
        "datasets": sorted(selected),
        "files": dict(sorted(files.items())),
        "skipped": dict(sorted(skips.items())),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def iter_table(out_dir: Path, name: str) -> Iterator[Row]:
    yield from read_rows(out_dir, name)
