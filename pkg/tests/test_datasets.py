from collections import Counter
from fractions import Fraction

import pytest

from builders import ETHER, MINER, addr, block, bundle, call, create, h, log, reward, suicide, tx
from xbeth.core import ZERO_ADDRESS, Hash32
from xbeth.datasets import (
    FILES, BlockRow, build_dataset1, build_dataset2, build_dataset3, build_dataset4,
    build_dataset5, build_dataset6, csv_bytes, fmt, fmt_decimal, read_rows, transform,
)
from xbeth.decode import TRANSFER_TOPIC, function_selector
from xbeth.fixture import FixtureSpec, generate
from xbeth.ingest import write_bundles

A, B, C = addr(1), addr(2), addr(3)


def word(n):
    return n.to_bytes(32, "big")


def test_empty_block_row():
    blocks, txs = build_dataset1([bundle(block(1), [reward()])])
    (row,) = blocks
    assert row.tx_count == 0 and txs == []
    assert (row.gas_price_min, row.gas_price_avg, row.gas_price_max) == (None, None, None)
    assert row.to_csv()[-3:] == ["", "", ""]


def test_miner_reward_is_fee():
    t = tx(0, A, B, gas_price=2 * 10**10)
    _, (row,) = build_dataset1([bundle(block(1, [t]), [call(t), reward()])])
    assert row.gas_used == 21_000 and row.miner_reward == 420_000_000_000_000


def test_gas_price_summary():
    ts = [tx(i, A, B, gas_price=p) for i, p in enumerate([10, 20, 40])]
    (row,), _ = build_dataset1([bundle(block(1, ts), [call(t) for t in ts])])
    assert (row.gas_price_min, row.gas_price_avg, row.gas_price_max) == (10, Fraction(70, 3), 40)
    assert fmt(row.gas_price_avg) == "23.33"


def test_errored_value_call_moves_nothing():
    t = tx(0, A, B, value=5 * ETHER)
    assert build_dataset2([bundle(block(1, [t]), [call(t, value=5 * ETHER, error="Reverted")])]) == []


def test_reverted_ancestor_excludes_descendants():
    t = tx(0, A, C)
    traces = [
        call(t, to=C, error="Out of gas"),
        call(t, (0,), sender=C, to=B, value=ETHER),
        call(t, (0, 0), sender=B, to=A, value=ETHER),
    ]
    assert build_dataset2([bundle(block(1, [t]), traces)]) == []


def test_value_rows_for_calls_and_suicides():
    t = tx(0, A, C, value=2 * ETHER)
    traces = [
        call(t, to=C, value=2 * ETHER),
        call(t, (0,), sender=C, to=B, value=ETHER),
        suicide(t, (1,), address=C, refund=A, balance=ETHER),
        suicide(t, (2,), address=B, refund=A, balance=0),
        reward(),
    ]
    rows = build_dataset2([bundle(block(1, [t]), traces)])
    assert [(r.kind, r.trace_address, r.value_wei) for r in rows] == [
        ("call_value", (), 2 * ETHER), ("call_value", (0,), ETHER), ("suicide_refund", (1,), ETHER)]
    assert (rows[2].from_, rows[2].to) == (C, A)


def test_failed_create_has_no_row():
    t = tx(0, A, None)
    skips = Counter()
    assert build_dataset3([bundle(block(1, [t]), [create(t, address=C, error="Out of gas")])], skips) == []
    assert skips == {"failed_create": 1}


def test_create_then_suicide_lifecycle():
    t0, t1 = tx(0, A, None, block=1), tx(0, B, C, block=2)
    b1 = bundle(block(1, [t0]), [create(t0, address=C, code=b"\x00" * 958)])
    b2 = bundle(block(2, [t1]), [call(t1, block_number=2),
                                 suicide(t1, (0,), address=C, refund=B, balance=7, block_number=2)])
    (row,) = build_dataset3([b1, b2])
    assert row.deployed_code_size_bytes == 958 and row.creator == A and row.creation_block == 1
    assert (row.deleted, row.deletion_block, row.refund_address, row.refund_value) == (True, 2, B, 7)
    assert row.provenance is None


def test_suicide_without_creation_is_flagged():
    t = tx(0, A, C)
    (row,) = build_dataset3([bundle(block(1, [t]), [call(t), suicide(t, (0,), address=C, refund=A)])])
    assert row.provenance == "unseen_creation" and row.creator is None and row.deleted


def test_contract_call_rows():
    data = function_selector("transfer(address,uint256)") + word(1) + word(2)
    t = tx(0, A, C, value=ETHER)
    traces = [call(t, to=C, value=ETHER), call(t, (0,), sender=C, to=B, data=data, error="Bad jump destination")]
    rows = build_dataset4([bundle(block(1, [t]), traces)])
    assert rows[0].selector is None and rows[0].input_size == 0 and rows[0].value_wei == ETHER
    assert rows[1].selector.hex() == "a9059cbb" and rows[1].error == "Bad jump destination"
    assert len(build_dataset2([bundle(block(1, [t]), traces)])) == 1


def test_transfer_partition_between_datasets():
    token = addr(77)
    t = tx(0, A, token)
    logs = [
        log(token, [TRANSFER_TOPIC, Hash32(word(1)), Hash32(word(2))], word(9), 0),
        log(token, [TRANSFER_TOPIC, Hash32(bytes(32)), Hash32(word(2)), Hash32(word(5))], b"", 1),
        log(token, [TRANSFER_TOPIC], word(1) + word(3) + word(4), 2),
    ]
    b = bundle(block(1, [t]), [call(t)], logs={0: logs})
    erc20, meta = build_dataset5([b])
    assert [(r.value, r.log_index) for r in erc20] == [(9, 0), (4, 2)]
    assert [m.token for m in meta] == [token] and meta[0].name is None
    (nft,) = build_dataset6([b])
    assert nft.from_ == ZERO_ADDRESS and nft.token_id == 5


def test_csv_round_trip_every_row_type(seed42):
    for name, row_type in FILES.items():
        rows = read_rows(seed42.out, name)
        again = [row_type.from_csv(r.to_csv()) for r in rows]
        assert again == rows
        assert csv_bytes(row_type, rows).startswith(",".join(row_type.header()).encode() + b"\r\n")


def test_fmt_rules():
    assert fmt(None) == "" and fmt(True) == "true" and fmt((0, 1)) == "[0,1]"
    assert fmt(b"\x01\x02") == "0x0102"
    assert fmt_decimal(Fraction(1, 8)) == "0.12" and fmt_decimal(Fraction(3, 8)) == "0.38"
    assert fmt_decimal(Fraction(1, 3), 4) == "0.3333"


@pytest.mark.parametrize("name", sorted(FILES))
def test_seed42_rows_equal_ledger(seed42, name):
    from xbeth.datasets import dataset_path, read_csv_table

    header, rows = read_csv_table(dataset_path(seed42.out, name))
    expected = seed42.ledger["expected_rows"][name]
    assert header == expected["header"]
    assert len(rows) == seed42.ledger["expected_row_counts"][name]
    assert rows == expected["rows"]


def test_seed42_manifest_matches_golden(seed42):
    import json
    from pathlib import Path

    golden = json.loads((Path(__file__).parent / "golden" / "manifest-42.json").read_text())
    assert json.loads((seed42.out / "manifest.json").read_text()) == golden


def test_selected_datasets_only(seed42, tmp_path):
    m = transform(seed42.raw, tmp_path, datasets=(1, 2))
    assert sorted(p.name for p in tmp_path.iterdir()) == [
        "dataset1_blocks.csv", "dataset1_txs.csv", "dataset2_internal_eth.csv", "manifest.json"]
    assert m["datasets"] == [1, 2]


def test_sub_range_and_gzip(tmp_path):
    generate(FixtureSpec(seed=8, n_blocks=40), tmp_path / "raw")
    plain = transform(tmp_path / "raw", tmp_path / "a", 10, 29, workers=3)
    gz = transform(tmp_path / "raw", tmp_path / "b", 10, 29, workers=1, gz=True)
    assert plain["range"] == [10, 29]
    assert {k: v["sha256"] for k, v in plain["files"].items()} == {
        k.replace(".gz", ""): v["sha256"] for k, v in gz["files"].items()}
    blocks = read_rows(tmp_path / "b", "dataset1_blocks")
    assert [b.number for b in blocks] == list(range(10, 30))
    assert isinstance(blocks[0], BlockRow)


def test_partition_boundaries_do_not_change_output(tmp_path):
    spec = FixtureSpec(seed=11, n_blocks=60)
    generate(spec, tmp_path / "raw")
    digests = []
    for w in (1, 2, 7, 60):
        m = transform(tmp_path / "raw", tmp_path / f"o{w}", workers=w)
        digests.append({k: v["sha256"] for k, v in m["files"].items()})
    assert all(d == digests[0] for d in digests)
