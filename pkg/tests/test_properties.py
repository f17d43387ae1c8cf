"""Property checks over randomly generated inputs."""

import random
from collections import Counter

from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from builders import ETHER, addr, block, bundle, call, reward, suicide, tx
from xbeth.core import Amount256, Hash32, LogEntry
from xbeth.datasets import (
    ContractCallRow, ContractInfoRow, Erc20TransferRow, InternalEtherTxRow, build_dataset1,
    build_dataset2,
)
from xbeth.decode import ERC20, ERC20_NONSTANDARD, ERC721, TRANSFER_TOPIC, classify_transfer_log
from xbeth.stats import stats_calls, stats_contracts, stats_ether, stats_tokens

CASES = settings(max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow])


# --- gas price ordering ---------------------------------------------------------

@CASES
@given(st.lists(st.lists(st.integers(0, 10**15), min_size=0, max_size=12), min_size=1, max_size=4))
def test_gas_price_min_avg_max(blocks):
    bundles = []
    for n, prices in enumerate(blocks, start=1):
        txs = [tx(i, addr(1), addr(2), gas_price=p, block=n) for i, p in enumerate(prices)]
        bundles.append(bundle(block(n, txs), [call(t, block_number=n) for t in txs] + [reward(block_number=n)]))
    rows, txrows = build_dataset1(bundles)
    for row, prices in zip(rows, blocks):
        assert row.tx_count == len(prices)
        if prices:
            assert row.gas_price_min <= row.gas_price_avg <= row.gas_price_max
            assert (row.gas_price_min, row.gas_price_max) == (min(prices), max(prices))
        else:
            assert row.gas_price_avg is None
    assert len(txrows) == sum(map(len, blocks))


# --- reverted-ancestor exclusion ----------------------------------------------------

node = st.tuples(
    st.integers(0, 10**6),                 # parent pick
    st.booleans(),                         # errored
    st.integers(0, 3).map(lambda k: k * ETHER // 2),  # value
    st.sampled_from(["call", "suicide"]),
)


@CASES
@given(st.lists(node, min_size=1, max_size=14), st.booleans())
def test_reverted_ancestors_move_nothing(nodes, root_error):
    t = tx(0, addr(1), addr(2))
    parent = [None]
    children = {0: 0}
    paths = [()]
    errors = [root_error]
    # build the tree: node i attaches to an earlier call node
    kinds = ["call"]
    values = [nodes[0][2]]
    for pick, err, value, kind in nodes[1:]:
        calls = [i for i, k in enumerate(kinds) if k == "call"]
        p = calls[pick % len(calls)]
        paths.append(paths[p] + (children[p],))
        children[p] += 1
        children[len(paths) - 1] = 0
        parent.append(p)
        errors.append(err and kind == "call")
        kinds.append(kind)
        values.append(value)
    traces = []
    for i, path in enumerate(paths):
        if kinds[i] == "call":
            traces.append(call(t, path, to=addr(100 + i), value=values[i], error="Reverted" if errors[i] else None))
        else:
            traces.append(suicide(t, path, address=addr(100 + i), refund=addr(1), balance=values[i]))
    rows = build_dataset2([bundle(block(1, [t]), traces)])

    def effective(i):
        while i is not None:
            if errors[i]:
                return False
            i = parent[i]
        return True

    want = {paths[i] for i in range(len(paths)) if values[i] > 0 and effective(i)}
    assert {r.trace_address for r in rows} == want
    for r in rows:
        i = paths.index(r.trace_address)
        assert effective(i)


# --- distribution sums --------------------------------------------------------------

addresses = st.integers(1, 12).map(addr)


@CASES
@given(st.lists(st.tuples(addresses, addresses, st.integers(0, 10**27), st.integers(0, 50_000)), max_size=30))
def test_ether_histogram_sums(rows):
    data = [InternalEtherTxRow(n, Hash32(bytes(32)), (), "call_value", a, b, Amount256(v)) for a, b, v, n in rows]
    s = stats_ether(data)
    assert sum(n for _, n in s["histograms"]["ether_value"]) == len(data)
    assert len(s["histograms"]["ether_value"]) == 16
    assert s["table2"]["transactions"] == len(data)


calls = st.tuples(
    st.sampled_from(["call", "delegatecall", "staticcall", "callcode"]),
    st.one_of(st.none(), st.sampled_from(["Out of gas", "out of gas", "Reverted", "Weird thing"])),
    st.one_of(st.none(), st.binary(min_size=4, max_size=4)),
    st.integers(0, 30_000),
)


@CASES
@given(st.lists(calls, min_size=1, max_size=40))
def test_call_distribution_sums(rows):
    data = [ContractCallRow(n, Hash32(bytes(32)), (), kind, addr(1), addr(2), sel, 4 if sel else 0,
                            Amount256(0), 0, err) for kind, err, sel, n in rows]
    s = stats_calls(data)
    assert sum(s["call_types"].values()) == len(data)
    assert sum(n for _, n in s["error_types"]) == s["table4"]["calls_with_error"]
    assert sum(n for _, n in s["series"]["calls"]) == len(data)
    assert sum(n for _, n in s["series"]["call_errors"]) == s["table4"]["calls_with_error"]
    assert sum(e["count"] for e in s["top_selectors"]) <= s["table4"]["calls_with_input"]
    if len({r[2] for r in rows if r[2]}) <= 10:
        assert sum(e["count"] for e in s["top_selectors"]) == s["table4"]["calls_with_input"]


@CASES
@given(st.lists(st.tuples(addresses, st.integers(0, 5000), st.integers(0, 40_000)), max_size=30))
def test_code_size_histogram_sums(rows):
    data = [ContractInfoRow(addr(500 + i), c, n, Hash32(bytes(32)), Amount256(0), b"", b"", size, False,
                            None, None, None, None) for i, (c, size, n) in enumerate(rows)]
    s = stats_contracts(data)
    assert sum(n for _, n in s["histograms"]["code_size"]) == len(data)
    assert sum(n for _, n in s["series"]["contracts_created"]) == len(data)


@CASES
@given(st.lists(st.tuples(addresses, addresses, st.integers(1, 4).map(lambda k: addr(900 + k))), max_size=30))
def test_token_popularity_sums(rows):
    data = [Erc20TransferRow(tok, a, b, Amount256(1), 1, Hash32(bytes(32)), i) for i, (a, b, tok) in enumerate(rows)]
    s = stats_tokens(data, None)
    assert sum(n for _, n in s["popularity"]["erc20"]) == s["tables5_6"]["erc20"]["transfers"] == len(data)
    assert s["tables5_6"]["erc20"]["contracts"] == len(s["popularity"]["erc20"])


# --- transfer classification partition ---------------------------------------------


def random_log(rnd: random.Random, i: int) -> LogEntry:
    def addr_word():
        high = bytes(12) if rnd.random() < 0.9 else rnd.randbytes(12)
        return Hash32(high + rnd.randbytes(20))

    n_topics = rnd.randint(0, 4)
    topics = []
    if n_topics:
        topics.append(TRANSFER_TOPIC if rnd.random() < 0.8 else Hash32(rnd.randbytes(32)))
        topics += [addr_word() for _ in range(n_topics - 1)]
    size = rnd.choice([0, 0, 32, 32, 64, 96, 96, rnd.randint(1, 200)])
    if size == 96 and rnd.random() < 0.9:
        data = bytes(addr_word()) + bytes(addr_word()) + rnd.randbytes(32)
    else:
        data = rnd.randbytes(size)
    return LogEntry(addr(rnd.randint(1, 50)), tuple(topics), data, i)


def shape_is_erc20(log):
    return len(log.topics) == 3 and len(log.data) == 32


def shape_is_erc721(log):
    return len(log.topics) == 4 and log.data == b""


def shape_is_nonstandard(log):
    return len(log.topics) == 1 and len(log.data) == 96


def clean(word: bytes) -> bool:
    return word[:12] == bytes(12)


def test_classification_partition_random_logs():
    rnd = random.Random(20_240_601)
    seen = Counter()
    for i in range(10_000):
        log = random_log(rnd, i)
        d = classify_transfer_log(log)
        is_transfer = bool(log.topics) and log.topics[0] == TRANSFER_TOPIC
        shapes = [shape_is_erc20(log), shape_is_erc721(log), shape_is_nonstandard(log)]
        assert sum(shapes) <= 1
        if not is_transfer or not any(shapes):
            assert d is None
            continue
        if shapes[2]:
            src, dst = log.data[:32], log.data[32:64]
        else:
            src, dst = bytes(log.topics[1]), bytes(log.topics[2])
        if not (clean(src) and clean(dst)):
            assert d is None
            continue
        want = [ERC20, ERC721, ERC20_NONSTANDARD][shapes.index(True)]
        assert d is not None and d.standard == want
        seen[want] += 1
    assert all(seen[k] > 100 for k in (ERC20, ERC721, ERC20_NONSTANDARD))
