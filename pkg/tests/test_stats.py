import json
from fractions import Fraction

import pytest

from builders import ETHER, addr, h
from xbeth.core import ZERO_ADDRESS, Amount256
from xbeth.datasets import (
    BlockRow, ContractCallRow, ContractInfoRow, Erc20TransferRow, Erc721TransferRow,
    InternalEtherTxRow, TokenMetadataRow, fmt_decimal,
)
from xbeth.errors import EmptyReportError
from xbeth.stats import (
    build_report, ether_bucket, normalize_error, stats_blocks, stats_calls, stats_contracts,
    stats_ether, stats_miner_text, stats_throughput, stats_tokens, turnover_by_birth_block,
    write_report,
)

A, B, C = addr(1), addr(2), addr(3)


def brow(n, ts=0, txs=0, miner=A, extra=b"", size=1000):
    return BlockRow(n, h(n), miner, ts, 10**7, 0, size, extra, txs, None, None, None)


def ether(n, src, dst, wei):
    return InternalEtherTxRow(n, h(n), (), "call_value", src, dst, Amount256(wei))


def crow(sel=None, size=0, error=None, kind="call", n=1):
    return ContractCallRow(n, h(n), (), kind, A, B, sel, size, Amount256(0), 0, error)


def test_published_mean_transactions_per_block():
    # published totals: 491,562,222 transactions over 8,100,000 blocks
    exact = Fraction(491_562_222, 8_100_000)
    assert abs(exact - Fraction("60.68")) <= Fraction("0.01")
    assert fmt_decimal(exact) == "60.69"


def test_published_throughput():
    tps = stats_throughput({"mean_tx_per_block": Fraction("60.68"), "mean_block_time": Fraction("15.33")})
    assert fmt_decimal(tps) == "3.96" and abs(tps - 4) < Fraction("0.1")


def test_throughput_guards():
    with pytest.raises(ZeroDivisionError):
        stats_throughput({"mean_tx_per_block": 1, "mean_block_time": 0})
    assert stats_throughput({"mean_tx_per_block": 1, "mean_block_time": None}) is None


def test_single_block_has_no_block_time():
    t = stats_blocks([brow(5, ts=100, txs=3)])["table1"]
    assert t["mean_block_time"] is None and t["mean_tx_per_block"] == 3


def test_block_means():
    t = stats_blocks([brow(0, 0, 2, size=10), brow(1, 15, 4, size=20), brow(2, 31, 0, size=33, miner=B)])["table1"]
    assert (t["blocks"], t["transactions"], t["miners"]) == (3, 6, 2)
    assert t["mean_block_time"] == Fraction(31, 2) and t["mean_block_size"] == 21


def test_no_blocks_is_an_error():
    with pytest.raises(EmptyReportError):
        stats_blocks([])


def test_single_ether_row():
    t = stats_ether([ether(1, A, B, ETHER)])["table2"]
    assert t == {"transactions": 1, "addresses": 2, "mean_ether": 1, "max_ether": 1}


def test_self_transfer_is_one_address():
    assert stats_ether([ether(1, A, A, 5)])["table2"]["addresses"] == 1


@pytest.mark.parametrize("wei,label", [
    (0, "<1e-6"), (10**12 - 1, "<1e-6"), (10**12, "1e-6"), (ETHER, "1e0"),
    (10**19 - 1, "1e0"), (10**25, "1e7"), (10**26, ">=1e8"),
])
def test_ether_buckets(wei, label):
    assert ether_bucket(wei) == label


def contract(addr_, creator, size, deleted=False, refund=None, unseen=False):
    if unseen:
        return ContractInfoRow(addr_, None, None, None, None, None, None, None, True, 9, refund, Amount256(0),
                               "unseen_creation")
    return ContractInfoRow(addr_, creator, 1, h(1), Amount256(0), b"", b"\x00" * size, size, deleted,
                           5 if deleted else None, refund, Amount256(0) if deleted else None, None)


def test_two_contracts_one_creator():
    s = stats_contracts([contract(B, A, 100), contract(C, A, 300, deleted=True, refund=A)])
    assert s["table3"] == {"created": 2, "creators": 1, "deleted": 1, "refund_addresses": 1, "mean_code_size": 200}
    assert s["histograms"]["code_size"] == [[0, 1], [256, 1]]


def test_unseen_creation_counts_only_as_deletion():
    s = stats_contracts([contract(B, A, 10), contract(C, None, 0, refund=B, unseen=True)])["table3"]
    assert s["created"] == 1 and s["deleted"] == 1


def test_top_selector_share():
    sel, other = bytes.fromhex("a9059cbb"), bytes.fromhex("095ea7b3")
    rows = [crow(sel, 68)] * 4 + [crow(other, 68)] * 2 + [crow()] * 4
    s = stats_calls(rows)
    assert s["top_selectors"][0] == {"selector": "0xa9059cbb", "count": 4, "share": "0.4000",
                                     "cumulative_share": "0.4000"}
    assert s["top_selectors"][1]["cumulative_share"] == "0.6000"
    assert s["table4"] == {"calls": 10, "calls_with_input": 6, "calls_with_error": 0}


@pytest.mark.parametrize("label,key", [
    ("Out of gas", "out_of_gas"), ("out of gas", "out_of_gas"), ("OUT OF GAS ", "out_of_gas"),
    ("Reverted", "reverted"), ("Bad instruction", "bad_instruction"),
    ("Bad jump destination", "bad_jump_destination"), ("Stack underflow", "other:stack underflow"),
])
def test_error_normalization(label, key):
    assert normalize_error(label) == key


def test_error_distribution_and_call_types():
    rows = [crow(error="Out of gas"), crow(error="out of gas"), crow(error="Reverted", kind="delegatecall")]
    s = stats_calls(rows)
    assert s["error_types"] == [["out_of_gas", 2], ["reverted", 1]]
    assert s["call_types"] == {"call": 2, "delegatecall": 1, "staticcall": 0, "callcode": 0}


def erc20(src, dst, token=C, n=1):
    return Erc20TransferRow(token, src, dst, Amount256(1), n, h(n), 0)


def nft(src, dst, tid, n, token=C):
    return Erc721TransferRow(token, src, dst, Amount256(tid), n, h(n), 0)


def test_holders():
    assert stats_tokens([erc20(A, B)], None)["tables5_6"]["erc20"]["holders"] == 2
    assert stats_tokens([erc20(ZERO_ADDRESS, A)], None)["tables5_6"]["erc20"]["holders"] == 1


def test_miner_words():
    blocks = [brow(i, extra=b"nanopool") for i in range(3)] + [brow(3, extra=b"ethermine")]
    assert stats_miner_text(blocks)[0] == ["nanopool", 3]
    assert stats_miner_text([brow(0, extra=bytes(32))]) == []


def test_token_name_words():
    tokens = [TokenMetadataRow(A, "Golden Token", "GLD", 18, Amount256(1)),
              TokenMetadataRow(B, "Token", None, None, None), TokenMetadataRow(C, None, None, None, None)]
    assert stats_tokens([], None, tokens)["word_frequencies"]["token_names"] == [["token", 2], ["golden", 1]]


def test_turnover():
    rows = [nft(ZERO_ADDRESS, A, 1, 10), nft(A, B, 1, 12), nft(B, C, 1, 20_005), nft(ZERO_ADDRESS, A, 2, 10_001)]
    assert turnover_by_birth_block(rows, C) == [[0, 2], [10_000, 0]]


def test_report_sections_by_selection(seed42, tmp_path):
    import shutil

    for p in seed42.out.glob("dataset1_*.csv"):
        shutil.copy(p, tmp_path / p.name)
    report = write_report(tmp_path, (1,))
    assert "table1" in report and "table2" not in report and "table4" not in report
    assert set(report["series"]) == {"tx_count", "gas_price"}
    with pytest.raises(FileNotFoundError):
        build_report(tmp_path, (2,))


@pytest.mark.parametrize("section", [
    "table1", "throughput", "table2", "table3", "table4", "call_types", "error_types",
    "top_selectors", "tables5_6", "popularity", "word_frequencies", "series", "histograms", "turnover",
])
def test_seed42_stats_equal_ledger(seed42, section):
    report = json.loads((seed42.out / "stats.json").read_text())
    assert report[section] == seed42.ledger["expected_stats"][section]


def test_series_and_histogram_files(seed42):
    names = sorted(p.name for p in seed42.out.glob("*.csv") if not p.name.startswith("dataset"))
    assert "series_tx_count.csv" in names and "hist_ether_value.csv" in names
    assert "series_gas_price_per_block.csv" in names and "series_turnover.csv" in names
    text = (seed42.out / "hist_ether_value.csv").read_text()
    assert text.splitlines()[0] == "bucket,count" and len(text.splitlines()) == 17
