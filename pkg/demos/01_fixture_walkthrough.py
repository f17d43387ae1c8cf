"""Generate a small synthetic chain, build the datasets, and read the report.

    python demos/01_fixture_walkthrough.py [workdir]
"""

import json
import sys
import tempfile
from pathlib import Path

from xbeth.datasets import transform
from xbeth.fixture import FixtureSpec, generate
from xbeth.fixture.server import start_background
from xbeth.ingest import fetch_token_metadata
from xbeth.rpc import RpcClient
from xbeth.stats import write_report
from xbeth.verify import verify

work = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="xbeth-"))
raw, out = work / "raw", work / "out"

# 1. a 300-block chain with a ground-truth ledger next to the raw archive
summary = generate(FixtureSpec(seed=7, n_blocks=300), raw)
print("archive digest", summary["archive_digest"][:16], "rows", summary["row_counts"])

# 2. token metadata comes from eth_call, so serve the chain on loopback first
server, url = start_background(raw, Path(summary["ledger"]))
with RpcClient(url) as client:
    manifest = transform(raw, out, workers=2, metadata=lambda t, at: fetch_token_metadata(client, t, at))
server.shutdown()
print("skipped logs and creates:", manifest["skipped"])

# 3. statistics
report = write_report(out)
t1 = report["table1"]
print(f"{t1['blocks']} blocks, {t1['transactions']} txs, {t1['mean_block_time']} s/block, "
      f"{report['throughput']} tx/s")
print("top selectors:", [(s["selector"], s["share"]) for s in report["top_selectors"][:3]])
print("miner words:", report["word_frequencies"]["miners"][:5])

# 4. everything should equal the ledger
result = verify(out, Path(summary["ledger"]), raw)
print("verify:", "ok" if result.ok else [str(d) for d in result.divergences])
print(json.dumps(report["tables5_6"], indent=1))
