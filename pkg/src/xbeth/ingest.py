"""Raw data acquisition over JSON-RPC and the on-disk raw archive.

Acquisition is block-indexed only: one batch request per height carrying
``eth_getBlockByNumber``, ``parity_getBlockReceipts`` and ``trace_block``.

Archive layout: one file per aligned 10,000-block segment named
``raw-<from>-<to>.jsonl`` (or ``.jsonl.gz``), each line one bundle with keys
``block``, ``receipts``, ``traces``, lines sorted by height.  Segment files are
only ever replaced atomically, so an interrupted export leaves either the old
or the new file, never a truncated record.
"""

from __future__ import annotations

import gzip
import hashlib
import json
import logging
import os
import re
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterator

from .core import Address, BlockBundle, RawBlock, ReceiptRecord, TraceRecord
from .decode import METADATA_SELECTORS, decode_string, decode_uint
from .errors import IntegrityError, MetadataUnavailable, MissingBlockError, NotFoundError, RpcError
from .rpc import RpcClient

log = logging.getLogger(__name__)

SEGMENT_SIZE = 10_000
_SEGMENT_RE = re.compile(r"^raw-(\d+)-(\d+)\.jsonl(\.gz)?$")


# --- fetching ---------------------------------------------------------------


def fetch_block(endpoint: RpcClient, n: int) -> RawBlock:
    obj = endpoint.call("eth_getBlockByNumber", [hex(n), True])
    if obj is None:
        raise NotFoundError(f"block {n} is beyond the chain head")
    return RawBlock.from_json(obj)


def _check_receipts(n: int, block: RawBlock, receipts: list[ReceiptRecord]) -> None:
    if len(receipts) != len(block.transactions):
        raise IntegrityError(
            f"block {n}: {len(receipts)} receipts for {len(block.transactions)} transactions"
        )


def fetch_receipts(endpoint: RpcClient, n: int, block: RawBlock | None = None) -> list[ReceiptRecord]:
    if block is None:
        block = fetch_block(endpoint, n)
    objs = endpoint.call("parity_getBlockReceipts", [hex(n)])
    if objs is None:
        raise NotFoundError(f"no receipts for block {n}")
    receipts = [ReceiptRecord.from_json(o) for o in objs]
    _check_receipts(n, block, receipts)
    return receipts


def fetch_traces(endpoint: RpcClient, n: int) -> list[TraceRecord]:
    objs = endpoint.call("trace_block", [hex(n)])
    if objs is None:
        raise NotFoundError(f"no traces for block {n}")
    return [TraceRecord.from_json(o) for o in objs]


def fetch_bundle(endpoint: RpcClient, n: int) -> BlockBundle:
    """Fetch block, receipts and traces of height ``n`` in one batch request."""
    block_obj, receipt_objs, trace_objs = endpoint.batch(
        [
            ("eth_getBlockByNumber", [hex(n), True]),
            ("parity_getBlockReceipts", [hex(n)]),
            ("trace_block", [hex(n)]),
        ]
    )
    if block_obj is None:
        raise NotFoundError(f"block {n} is beyond the chain head")
    block = RawBlock.from_json(block_obj)
    receipts = [ReceiptRecord.from_json(o) for o in receipt_objs or ()]
    _check_receipts(n, block, receipts)
    bundle = BlockBundle(
        block=block,
        receipts=tuple(receipts),
        traces=tuple(TraceRecord.from_json(o) for o in trace_objs or ()),
    )
    bundle.validate()
    return bundle


def call_contract(endpoint: RpcClient, contract: Address, calldata: bytes, at_block: int) -> bytes:
    """Read-only ``eth_call``; reverts, missing code and empty answers raise MetadataUnavailable."""
    try:
        result = endpoint.call("eth_call", [{"to": str(contract), "data": "0x" + calldata.hex()}, hex(at_block)])
    except RpcError as exc:
        raise MetadataUnavailable(f"{contract}: {exc}") from exc
    if not result or result == "0x":
        raise MetadataUnavailable(f"{contract}: empty response")
    return bytes.fromhex(result[2:])


def fetch_token_metadata(endpoint: RpcClient, token: Address, at_block: int) -> dict[str, object]:
    """Name, symbol, decimals and total supply; unavailable fields are None."""
    out: dict[str, object] = {}
    for key, selector in METADATA_SELECTORS.items():
        try:
            raw = call_contract(endpoint, token, selector, at_block)
            out[key] = decode_string(raw) if key in ("name", "symbol") else decode_uint(raw)
        except (MetadataUnavailable, ValueError):
            out[key] = None
    return out


# --- archive ----------------------------------------------------------------


def segment_start(height: int) -> int:
    return height - height % SEGMENT_SIZE


def segment_name(start: int, gz: bool = False) -> str:
    return f"raw-{start}-{start + SEGMENT_SIZE - 1}.jsonl" + (".gz" if gz else "")


def encode_bundle(bundle: BlockBundle) -> str:
    return json.dumps(bundle.to_json(), separators=(",", ":"))


def list_segments(archive: Path) -> dict[int, Path]:
    """Segment start -> file path for every segment file in ``archive``."""
    out: dict[int, Path] = {}
    if not archive.is_dir():
        return out
    for p in archive.iterdir():
        m = _SEGMENT_RE.match(p.name)
        if m:
            start = int(m.group(1))
            if start in out:
                raise IntegrityError(f"segment {start} stored twice: {out[start].name}, {p.name}")
            out[start] = p
    return dict(sorted(out.items()))


def _read_lines(path: Path) -> list[str]:
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rt", encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh if line.strip()]


def _line_height(line: str, path: Path) -> int:
    try:
        number = json.loads(line)["block"]["number"]
        return int(number, 16) if isinstance(number, str) else int(number)
    except (ValueError, KeyError, TypeError) as exc:
        raise IntegrityError(f"{path.name}: unreadable record ({exc})") from exc


def _write_atomic(path: Path, lines: list[str]) -> None:
    data = "".join(line + "\n" for line in lines).encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".partial-", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            if path.suffix == ".gz":
                with gzip.GzipFile(fileobj=fh, mode="wb", mtime=0, filename="") as gz:
                    gz.write(data)
            else:
                fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_bundles(archive: Path, bundles, gz: bool = False) -> int:
    """Merge ``bundles`` into the archive, replacing segment files atomically.

    Heights already present are left untouched.  Returns the number of new
    bundles stored.
    """
    archive.mkdir(parents=True, exist_ok=True)
    by_segment: dict[int, dict[int, str]] = {}
    for b in bundles:
        by_segment.setdefault(segment_start(b.number), {})[b.number] = encode_bundle(b)
    existing = list_segments(archive)
    written = 0
    for start, new in sorted(by_segment.items()):
        path = existing.get(start, archive / segment_name(start, gz))
        lines = {}
        if path.exists():
            lines = {_line_height(line, path): line for line in _read_lines(path)}
        fresh = {h: line for h, line in new.items() if h not in lines}
        if not fresh:
            continue
        lines.update(fresh)
        _write_atomic(path, [lines[h] for h in sorted(lines)])
        written += len(fresh)
    return written


def archived_heights(archive: Path) -> set[int]:
    heights: set[int] = set()
    for path in list_segments(archive).values():
        heights.update(_line_height(line, path) for line in _read_lines(path))
    return heights


def export_raw(
    endpoint: RpcClient,
    start: int,
    end: int,
    archive: Path,
    workers: int = 8,
    gz: bool = False,
    checkpoint: int = 1000,
) -> int:
    """Fetch heights ``start..end`` (inclusive) into the archive; resumable.

    Heights already archived are skipped.  Fetching runs on a bounded thread
    pool; results are consumed in height order and flushed to disk every
    ``checkpoint`` bundles.  Returns the number of bundles written.
    """
    if start > end:
        raise ValueError(f"empty range [{start}, {end}]")
    archive = Path(archive)
    have = archived_heights(archive)
    todo = [h for h in range(start, end + 1) if h not in have]
    written = 0
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for i in range(0, len(todo), checkpoint):
            chunk = todo[i : i + checkpoint]
            bundles = list(pool.map(lambda h: fetch_bundle(endpoint, h), chunk))
            written += write_bundles(archive, bundles, gz=gz)
            log.info("archived heights %d..%d (%d new)", chunk[0], chunk[-1], len(bundles))
    return written


def read_raw(archive: Path, start: int | None = None, end: int | None = None) -> Iterator[BlockBundle]:
    """Yield archived bundles for ``start..end`` in increasing height order.

    Both bounds default to the archive's extent.  Every bundle is validated; a
    gap raises :class:`MissingBlockError` naming the first missing height and
    a broken parent-hash link raises :class:`IntegrityError`.
    """
    archive = Path(archive)
    if not archive.is_dir():
        raise FileNotFoundError(f"raw archive {archive} does not exist")
    segments = list_segments(archive)
    if start is None or end is None:
        heights = archived_heights(archive)
        if not heights:
            raise MissingBlockError(0 if start is None else start, "raw archive is empty")
        start = min(heights) if start is None else start
        end = max(heights) if end is None else end
    expected = start
    prev: BlockBundle | None = None
    for seg_start, path in segments.items():
        if seg_start + SEGMENT_SIZE <= start or seg_start > end:
            continue
        last = -1
        for line in _read_lines(path):
            h = _line_height(line, path)
            if h <= last:
                raise IntegrityError(f"{path.name}: heights out of order at {h}")
            last = h
            if h < start or h > end:
                continue
            if h != expected:
                raise MissingBlockError(expected)
            try:
                bundle = BlockBundle.from_json(json.loads(line))
            except (ValueError, KeyError, TypeError) as exc:
                raise IntegrityError(f"block {h}: {exc}") from exc
            bundle.validate()
            if prev is not None and bundle.block.parent_hash != prev.block.hash:
                raise IntegrityError(f"block {h}: parent hash does not match block {h - 1}")
            prev = bundle
            expected += 1
            yield bundle
    if expected <= end:
        raise MissingBlockError(expected)


def archive_digest(archive: Path) -> str:
    """SHA-256 over the uncompressed archive lines in height order."""
    h = hashlib.sha256()
    for path in list_segments(Path(archive)).values():
        for line in _read_lines(path):
            h.update(line.encode("utf-8"))
            h.update(b"\n")
    return h.hexdigest()
