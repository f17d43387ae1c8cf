from collections import Counter

import pytest
from Crypto.Hash import keccak as oracle

from builders import addr, log
from xbeth.core import Hash32
from xbeth.decode import (
    APPROVAL_TOPIC, ERC20, ERC20_NONSTANDARD, ERC721, TRANSFER_TOPIC, classify_transfer_log,
    decode_extra_text, decode_string, decode_uint, encode_bytes32_string, encode_string,
    event_topic, extract_selector, function_selector, word_to_address,
)


def word(n: int) -> bytes:
    return n.to_bytes(32, "big")


def topic(n: int) -> Hash32:
    return Hash32(word(n))


def test_transfer_topic():
    assert str(TRANSFER_TOPIC) == "0xddf252ad1be2c89b69c2b068fc378daa952ba7f163c4a11628f55a4df523b3ef"


def test_approval_topic_matches_oracle():
    ref = oracle.new(digest_bits=256, data=b"Approval(address,address,uint256)").digest()
    assert APPROVAL_TOPIC == ref
    assert event_topic("Approval(address,address,uint256)") == ref


def test_signature_with_whitespace_rejected():
    with pytest.raises(ValueError):
        event_topic("Transfer (address,address,uint256)")


def test_transfer_selector():
    data = function_selector("transfer(address,uint256)") + word(1) + word(2)
    assert extract_selector(data).hex() == "a9059cbb"


@pytest.mark.parametrize("data", [b"", b"\x01\x02\x03"])
def test_short_input_has_no_selector(data):
    assert extract_selector(data) is None


def test_erc20_shape():
    a, b = addr(1), addr(2)
    d = classify_transfer_log(log(addr(9), [TRANSFER_TOPIC, topic(1), topic(2)], word(500), 3))
    assert (d.standard, d.token, d.from_, d.to, d.amount_or_token_id, d.log_index) == (ERC20, addr(9), a, b, 500, 3)


def test_erc721_shape():
    d = classify_transfer_log(log(addr(9), [TRANSFER_TOPIC, topic(0), topic(2), topic(77)]))
    assert d.standard == ERC721 and d.amount_or_token_id == 77 and d.from_ == addr(0)


def test_nonstandard_erc20_shape():
    d = classify_transfer_log(log(addr(9), [TRANSFER_TOPIC], word(1) + word(2) + word(10**20)))
    assert d.standard == ERC20_NONSTANDARD and d.amount_or_token_id == 10**20


def test_other_topic_is_not_a_transfer():
    skips = Counter()
    assert classify_transfer_log(log(addr(9), [APPROVAL_TOPIC, topic(1), topic(2)], word(5)), skips) is None
    assert not skips


@pytest.mark.parametrize("topics,data", [
    ([TRANSFER_TOPIC, topic(1), topic(2)], b""),
    ([TRANSFER_TOPIC, topic(1)], word(3)),
    ([TRANSFER_TOPIC, topic(1), topic(2)], word(1) + word(2)),
    ([TRANSFER_TOPIC, topic(1), topic(2), topic(3)], word(1)),
])
def test_unknown_shapes_counted(topics, data):
    skips = Counter()
    assert classify_transfer_log(log(addr(9), topics, data), skips) is None
    assert skips == {"shape": 1}


def test_dirty_address_padding_counted():
    skips = Counter()
    dirty = Hash32(b"\x01" + bytes(30) + b"\x05")
    assert classify_transfer_log(log(addr(9), [TRANSFER_TOPIC, dirty, topic(2)], word(1)), skips) is None
    assert skips == {"address_padding": 1}
    assert word_to_address(bytes(dirty)) is None


@pytest.mark.parametrize("raw,words", [
    (b"Nanopool", ["nanopool"]),
    (bytes(32), []),
    (b"ethermine-eu1", ["ethermine", "eu1"]),
    (b"\xd8\x83\x01\x08\x0b\x84geth\x87go1.10.4\x85linux", ["geth", "go1", "10", "4", "linux"]),
    (b"Golden_Token 2", ["golden", "token", "2"]),
])
def test_extra_text_words(raw, words):
    assert decode_extra_text(raw) == words


def test_abi_string_round_trip():
    assert decode_string(encode_string("Hello Token")) == "Hello Token"
    assert decode_string(encode_string("x" * 70)) == "x" * 70
    assert decode_string(encode_bytes32_string("MKR")) == "MKR"
    assert decode_uint(word(10**24)) == 10**24


def test_truncated_string_rejected():
    with pytest.raises(ValueError):
        decode_string(encode_string("abcdef")[:-40])
