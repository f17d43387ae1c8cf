import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from xbeth.datasets import transform  # noqa: E402
from xbeth.fixture import FixtureSpec, generate  # noqa: E402
from xbeth.fixture.server import start_background  # noqa: E402
from xbeth.ingest import fetch_token_metadata  # noqa: E402
from xbeth.rpc import RpcClient  # noqa: E402
from xbeth.stats import write_report  # noqa: E402


def pytest_sessionstart(session):
    """Refuse to run anything if the hash disagrees with an independent Keccak."""
    from Crypto.Hash import keccak

    from xbeth.keccak import keccak256

    for probe in (b"", b"Transfer(address,address,uint256)", bytes(range(256)) * 3):
        if keccak256(probe) != keccak.new(digest_bits=256, data=probe).digest():
            pytest.exit(f"keccak256 disagrees with the reference for {probe[:40]!r}", returncode=3)


@dataclass
class Run:
    raw: Path
    out: Path
    ledger_path: Path
    ledger: dict
    url: str
    summary: dict


@pytest.fixture(scope="session")
def seed42(tmp_path_factory):
    """Seed-42 fixture, served on loopback, transformed and summarized once per session."""
    base = tmp_path_factory.mktemp("seed42")
    raw, out = base / "raw", base / "out"
    summary = generate(FixtureSpec(seed=42, n_blocks=1000), raw)
    ledger_path = Path(summary["ledger"])
    server, url = start_background(raw, ledger_path)
    with RpcClient(url) as client:
        transform(raw, out, workers=4, metadata=lambda t, at: fetch_token_metadata(client, t, at))
    write_report(out)
    yield Run(raw, out, ledger_path, json.loads(ledger_path.read_text()), url, summary)
    server.shutdown()
    server.server_close()
