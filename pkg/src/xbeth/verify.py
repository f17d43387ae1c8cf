"""Check pipeline outputs against a fixture ledger.

Every comparison stops at its first divergence and reports where it is:
the file, a key identifying the row, and the field.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

from .core import RewardAction
from .datasets import FILES, dataset_path, read_csv_table

# columns that identify a row in a divergence report
ROW_KEYS = {
    "dataset1_blocks": ("number",),
    "dataset1_txs": ("tx_hash",),
    "dataset2_internal_eth": ("tx_hash", "trace_address"),
    "dataset3_contracts": ("contract_address",),
    "dataset4_calls": ("tx_hash", "trace_address"),
    "dataset5_erc20": ("tx_hash", "log_index"),
    "dataset5_tokens": ("token",),
    "dataset6_erc721": ("tx_hash", "log_index"),
}


@dataclass(frozen=True)
class Divergence:
    dataset: str
    row: str
    field: str
    expected: object
    actual: object

    def __str__(self):
        return f"{self.dataset} [{self.row}] {self.field}: expected {self.expected!r}, got {self.actual!r}"


def _row_key(name: str, header: list[str], row: list[str], index: int) -> str:
    cols = ROW_KEYS.get(name, ())
    parts = [f"{c}={row[header.index(c)]}" for c in cols if c in header and header.index(c) < len(row)]
    return ", ".join(parts) or f"row {index}"


def compare_table(name: str, path: Path | None, expected: dict) -> Divergence | None:
    if path is None:
        return Divergence(name, "-", "<file>", "present", "missing")
    header, rows = read_csv_table(path)
    if header != expected["header"]:
        return Divergence(name, "header", "<columns>", expected["header"], header)
    want = expected["rows"]
    for i, (got, exp) in enumerate(zip(rows, want)):
        if got != exp:
            for col, a, b in zip(header, exp, got):
                if a != b:
                    return Divergence(name, _row_key(name, header, exp, i), col, a, b)
            return Divergence(name, _row_key(name, header, exp, i), "<row>", exp, got)
    if len(rows) != len(want):
        i = min(len(rows), len(want))
        extra = want[i] if len(want) > len(rows) else rows[i]
        return Divergence(name, _row_key(name, header, extra, i), "<row count>", len(want), len(rows))
    return None


def compare_tables(out_dir: Path, ledger: dict, names=None) -> list[Divergence]:
    out = []
    for name, expected in ledger["expected_rows"].items():
        if names is not None and name not in names:
            continue
        d = compare_table(name, dataset_path(Path(out_dir), name), expected)
        if d is not None:
            out.append(d)
    return out


def first_difference(expected, actual, path: str = "") -> tuple[str, object, object] | None:
    """Path of the first mismatch between two JSON values, depth first."""
    if isinstance(expected, dict) and isinstance(actual, dict):
        for key in expected:
            if key not in actual:
                return (f"{path}.{key}", expected[key], "<missing>")
            d = first_difference(expected[key], actual[key], f"{path}.{key}")
            if d:
                return d
        for key in actual:
            if key not in expected:
                return (f"{path}.{key}", "<absent>", actual[key])
        return None
    if isinstance(expected, list) and isinstance(actual, list):
        for i, (a, b) in enumerate(zip(expected, actual)):
            d = first_difference(a, b, f"{path}[{i}]")
            if d:
                return d
        if len(expected) != len(actual):
            return (f"{path}.length", len(expected), len(actual))
        return None
    if expected != actual or type(expected) is not type(actual):
        return (path or ".", expected, actual)
    return None


def compare_stats(stats_path: Path, ledger: dict) -> Divergence | None:
    if not Path(stats_path).exists():
        return Divergence("stats.json", "-", "<file>", "present", "missing")
    actual = json.loads(Path(stats_path).read_text(encoding="utf-8"))
    d = first_difference(ledger["expected_stats"], actual)
    if d is None:
        return None
    where, exp, got = d
    return Divergence("stats.json", where.lstrip("."), "<value>", exp, got)


def reconstruct_balances(out_dir: Path, genesis: dict[str, int], rewards: list[tuple[str, int]]) -> dict[str, int]:
    """Final balances from genesis, minted rewards, fees (dataset 1) and internal Ether (dataset 2)."""
    bal: dict[str, int] = defaultdict(int)
    for addr, v in genesis.items():
        bal[addr] += v
    for addr, v in rewards:
        bal[addr] += v
    header, rows = read_csv_table(dataset_path(out_dir, "dataset1_blocks"))
    col = {c: i for i, c in enumerate(header)}
    miner = {int(r[col["number"]]): r[col["miner"]] for r in rows}
    header, rows = read_csv_table(dataset_path(out_dir, "dataset1_txs"))
    col = {c: i for i, c in enumerate(header)}
    for r in rows:
        fee = int(r[col["miner_reward"]])
        bal[r[col["from"]]] -= fee
        bal[miner[int(r[col["block_number"]])]] += fee
    header, rows = read_csv_table(dataset_path(out_dir, "dataset2_internal_eth"))
    col = {c: i for i, c in enumerate(header)}
    for r in rows:
        v = int(r[col["value_wei"]])
        bal[r[col["from"]]] -= v
        bal[r[col["to"]]] += v
    return dict(bal)


def archive_rewards(archive: Path) -> list[tuple[str, int]]:
    from .ingest import read_raw

    return [
        (str(t.action.author), int(t.action.value))
        for b in read_raw(archive)
        for t in b.traces
        if isinstance(t.action, RewardAction)
    ]


def check_conservation(out_dir: Path, archive: Path, ledger: dict) -> Divergence | None:
    genesis = {a: int(v) for a, v in ledger["genesis_allocations"].items()}
    got = reconstruct_balances(Path(out_dir), genesis, archive_rewards(Path(archive)))
    want = {a: int(v) for a, v in ledger["final_balances"].items()}
    for addr in sorted(set(got) | set(want)):
        if got.get(addr, 0) != want.get(addr, 0):
            return Divergence("balances", addr, "balance_wei", want.get(addr, 0), got.get(addr, 0))
    return None


@dataclass
class VerifyResult:
    divergences: list[Divergence]
    checked: list[str]

    @property
    def ok(self) -> bool:
        return not self.divergences


def verify(out_dir: Path, ledger_path: Path, archive: Path | None = None) -> VerifyResult:
    """Compare dataset CSVs, ``stats.json`` (when present) and, given the archive, balances."""
    out_dir = Path(out_dir)
    ledger = json.loads(Path(ledger_path).read_text(encoding="utf-8"))
    checked = list(FILES)
    divergences = compare_tables(out_dir, ledger)
    stats_path = out_dir / "stats.json"
    if stats_path.exists():
        checked.append("stats.json")
        d = compare_stats(stats_path, ledger)
        if d:
            divergences.append(d)
    if archive is not None:
        from .ingest import archive_digest

        checked.append("archive")
        digest = archive_digest(Path(archive))
        if ledger.get("archive_digest") and digest != ledger["archive_digest"]:
            divergences.append(Divergence("archive", "-", "sha256", ledger["archive_digest"], digest))
        if not any(d.dataset.startswith("dataset1") or d.dataset.startswith("dataset2") for d in divergences):
            checked.append("balances")
            d = check_conservation(out_dir, Path(archive), ledger)
            if d:
                divergences.append(d)
    return VerifyResult(divergences, checked)
