"""Command line: export, transform, stats, fixture, verify.

Settings come from flags, then ``XBETH_*`` environment variables, then an
``xbeth.toml`` file (``--config`` or the working directory).  Logs go to
stderr; each command prints a one-line JSON summary on stdout.

Exit codes: 0 ok, 1 verification divergence, 2 configuration or
connectivity, 3 data integrity or missing data.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from urllib.parse import urlparse

import tomli

from .errors import (
    ConfigError,
    EmptyReportError,
    IntegrityError,
    MetadataUnavailable,
    NotFoundError,
    ParseError,
    RpcError,
    TransportError,
)

log = logging.getLogger("xbeth")

EXIT_OK, EXIT_DIVERGENCE, EXIT_CONFIG, EXIT_DATA = 0, 1, 2, 3
ALL_DATASETS = (1, 2, 3, 4, 5, 6)


@dataclass
class RunConfig:
    rpc_url: str | None = None
    raw_dir: Path = Path("raw")
    out_dir: Path = Path("out")
    from_block: int | None = None
    to_block: int | None = None
    datasets: tuple[int, ...] | None = None
    gzip: bool = False
    workers: int = 4
    seed: int | None = None
    blocks: int = 1000
    ledger: Path | None = None
    port: int = 8545
    extra: dict = field(default_factory=dict)


def parse_datasets(text) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        items = [int(x) for x in text]
    else:
        items = [int(x) for x in str(text).replace(" ", "").split(",") if x]
    if not items or any(x not in ALL_DATASETS for x in items):
        raise ConfigError(f"datasets must be a comma list drawn from 1..6, got {text!r}")
    return tuple(sorted(set(items)))


def _bool(value) -> bool:
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in ("1", "true", "yes", "on")


_COERCE = {
    "raw_dir": Path, "out_dir": Path, "ledger": Path,
    "from_block": int, "to_block": int, "workers": int, "seed": int, "blocks": int, "port": int,
    "gzip": _bool, "datasets": parse_datasets, "rpc_url": str,
}


def load_config(args: argparse.Namespace, environ=os.environ) -> RunConfig:
    """Merge config file, environment and flags (flags win)."""
    merged: dict = {}
    path = Path(args.config) if args.config else Path("xbeth.toml")
    if args.config or path.exists():
        try:
            with open(path, "rb") as fh:
                merged.update(tomli.load(fh))
        except (OSError, tomli.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for name in _COERCE:
        key = "XBETH_" + name.upper()
        if key in environ:
            merged[name] = environ[key]
    for name in _COERCE:
        value = getattr(args, name, None)
        if value is not None and value is not False:
            merged[name] = value
    cfg = RunConfig()
    known = {f.name for f in fields(RunConfig)}
    for name, value in merged.items():
        if name not in known or name == "extra":
            cfg.extra[name] = value
            continue
        try:
            setattr(cfg, name, _COERCE[name](value))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {name}: {value!r}") from exc
    if cfg.workers < 1:
        raise ConfigError("workers must be at least 1")
    return cfg


def _check_url(url: str | None) -> str:
    if not url:
        raise ConfigError("an RPC endpoint is required (--rpc-url)")
    parts = urlparse(url)
    if parts.scheme not in ("http", "https") or not parts.netloc:
        raise ConfigError(f"not an http(s) URL: {url!r}")
    return url


def _summary(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True) + "\n")
    sys.stdout.flush()


# --- commands -----------------------------------------------------------------


def cmd_export(cfg: RunConfig) -> int:
    from .ingest import export_raw
    from .rpc import RpcClient

    url = _check_url(cfg.rpc_url)
    with RpcClient(url) as client:
        start = cfg.from_block or 0
        end = cfg.to_block if cfg.to_block is not None else int(client.call("eth_blockNumber", []), 16)
        written = export_raw(client, start, end, cfg.raw_dir, workers=cfg.workers, gz=cfg.gzip)
    log.info("export done: %d new bundles in %s", written, cfg.raw_dir)
    _summary({"command": "export", "range": [start, end], "written": written})
    return EXIT_OK


def cmd_transform(cfg: RunConfig) -> int:
    from .datasets import transform

    if not Path(cfg.raw_dir).is_dir():
        raise FileNotFoundError(f"raw archive {cfg.raw_dir} does not exist")
    datasets = cfg.datasets or ALL_DATASETS
    metadata = None
    client = None
    if cfg.rpc_url and 5 in datasets:
        from .ingest import fetch_token_metadata
        from .rpc import RpcClient

        client = RpcClient(_check_url(cfg.rpc_url))
        metadata = lambda token, at: fetch_token_metadata(client, token, at)  # noqa: E731
    elif 5 in datasets:
        log.warning("no --rpc-url: token metadata columns will be empty")
    try:
        manifest = transform(cfg.raw_dir, cfg.out_dir, cfg.from_block, cfg.to_block, datasets,
                             workers=cfg.workers, gz=cfg.gzip, metadata=metadata)
    finally:
        if client is not None:
            client.close()
    log.info("transform done: %s", ", ".join(f"{k}={v['rows']}" for k, v in manifest["files"].items()))
    _summary({"command": "transform", "range": manifest["range"],
              "rows": {k: v["rows"] for k, v in manifest["files"].items()}})
    return EXIT_OK


def cmd_stats(cfg: RunConfig) -> int:
    from .stats import available_datasets, write_report

    out = Path(cfg.out_dir)
    if cfg.datasets:
        datasets = cfg.datasets
    else:
        datasets = tuple(sorted(available_datasets(out))) if out.is_dir() else ()
    if not datasets:
        raise EmptyReportError(f"no dataset files in {out}")
    report = write_report(out, datasets)
    _summary({"command": "stats", "datasets": list(datasets), "sections": list(report)})
    return EXIT_OK


def cmd_fixture(cfg: RunConfig, serve: bool = False) -> int:
    from .fixture.generator import FixtureSpec, generate

    if serve:
        from .fixture.server import serve as run_server

        ledger = cfg.ledger or _find_ledger(cfg)
        log.info("serving %s on port %d", cfg.raw_dir, cfg.port)
        run_server(cfg.raw_dir, ledger, cfg.port)
        return EXIT_OK
    if cfg.seed is None:
        raise ConfigError("fixture needs --seed")
    try:
        spec = FixtureSpec(seed=cfg.seed, n_blocks=cfg.blocks)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    summary = generate(spec, cfg.raw_dir, gz=cfg.gzip)
    log.info("fixture seed %d: %d blocks, ledger %s", cfg.seed, summary["blocks"], summary["ledger"])
    _summary({"command": "fixture", **summary})
    return EXIT_OK


def _find_ledger(cfg: RunConfig) -> Path:
    raw = Path(cfg.raw_dir)
    if cfg.seed is not None:
        p = raw / f"ledger-{cfg.seed}.json"
        if p.exists():
            return p
        raise ConfigError(f"no ledger for seed {cfg.seed} in {raw}")
    found = sorted(raw.glob("ledger-*.json")) if raw.is_dir() else []
    if len(found) != 1:
        raise ConfigError(f"expected exactly one ledger in {raw}, found {len(found)}; pass --ledger")
    return found[0]


def cmd_verify(cfg: RunConfig) -> int:
    from .verify import verify

    ledger = cfg.ledger or _find_ledger(cfg)
    if not Path(ledger).is_file():
        raise ConfigError(f"ledger {ledger} not found")
    archive = Path(cfg.raw_dir) if Path(cfg.raw_dir).is_dir() else None
    result = verify(cfg.out_dir, ledger, archive)
    for d in result.divergences:
        log.error("divergence: %s", d)
    _summary({
        "command": "verify",
        "ok": result.ok,
        "checked": result.checked,
        "divergences": [
            {"dataset": d.dataset, "row": d.row, "field": d.field,
             "expected": str(d.expected), "actual": str(d.actual)}
            for d in result.divergences
        ],
    })
    return EXIT_OK if result.ok else EXIT_DIVERGENCE


# --- entry point ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file (default ./xbeth.toml if present)")
    common.add_argument("--rpc-url", dest="rpc_url")
    common.add_argument("--raw-dir", dest="raw_dir")
    common.add_argument("--out-dir", dest="out_dir")
    common.add_argument("--from-block", dest="from_block", type=int)
    common.add_argument("--to-block", dest="to_block", type=int)
    common.add_argument("--datasets", help="comma list, e.g. 1,2,5")
    common.add_argument("--gzip", action="store_true", default=None)
    common.add_argument("--workers", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--blocks", type=int, help="fixture size in blocks")
    common.add_argument("--ledger", help="fixture ledger (default ledger-<seed>.json in the raw dir)")
    common.add_argument("--log-level", default="INFO")

    p = argparse.ArgumentParser(prog="xbeth", description="Blockchain ETL: raw archive, datasets, statistics.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("export", parents=[common], help="fetch blocks, receipts and traces into the raw archive")
    sub.add_parser("transform", parents=[common], help="build dataset CSVs and a manifest from the archive")
    sub.add_parser("stats", parents=[common], help="compute stats.json and series/histogram CSVs")
    fx = sub.add_parser("fixture", parents=[common], help="generate a synthetic chain and ledger, or serve one")
    fx.add_argument("--serve", action="store_true", help="serve the archive over JSON-RPC on loopback")
    fx.add_argument("--port", type=int)
    sub.add_parser("verify", parents=[common], help="compare outputs against a fixture ledger")
    return p


def _setup_logging(level: str) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s %(message)s"))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(getattr(logging, level.upper(), logging.INFO))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.log_level)
    try:
        cfg = load_config(args)
        if args.command == "export":
            return cmd_export(cfg)
        if args.command == "transform":
            return cmd_transform(cfg)
        if args.command == "stats":
            return cmd_stats(cfg)
        if args.command == "fixture":
            return cmd_fixture(cfg, serve=args.serve)
        return cmd_verify(cfg)
    except (ConfigError, TransportError, RpcError, MetadataUnavailable) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except (IntegrityError, NotFoundError, EmptyReportError, FileNotFoundError, ParseError) as exc:
        log.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
