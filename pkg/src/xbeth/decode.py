"""Pure decoding primitives: signature hashing, selectors, Transfer logs, miner text."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

from .core import Address, Amount256, Hash32, LogEntry
from .keccak import keccak256

ERC20 = "erc20"
ERC20_NONSTANDARD = "erc20_nonstandard"
ERC721 = "erc721"


@lru_cache(maxsize=None)
def event_topic(signature: str) -> Hash32:
    """Topic0 for a canonical event signature such as ``Transfer(address,address,uint256)``."""
    if any(ch.isspace() for ch in signature):
        raise ValueError(f"event signature must not contain whitespace: {signature!r}")
    return Hash32(keccak256(signature.encode("ascii")))


@lru_cache(maxsize=None)
def function_selector(signature: str) -> bytes:
    if any(ch.isspace() for ch in signature):
        raise ValueError(f"function signature must not contain whitespace: {signature!r}")
    return keccak256(signature.encode("ascii"))[:4]


TRANSFER_TOPIC = event_topic("Transfer(address,address,uint256)")
APPROVAL_TOPIC = event_topic("Approval(address,address,uint256)")


def extract_selector(data: bytes) -> bytes | None:
    """First four bytes of call input, or None for plain transfers and short payloads."""
    if len(data) < 4:
        return None
    return bytes(data[:4])


@dataclass(frozen=True, slots=True)
class DecodedTransfer:
    standard: str
    token: Address
    from_: Address
    to: Address
    amount_or_token_id: Amount256
    log_index: int


def word_to_address(word: bytes) -> Address | None:
    """Low 20 bytes of a 32-byte word, or None if the high 12 bytes are not zero."""
    if len(word) != 32 or any(word[:12]):
        return None
    return Address(word[12:])


def classify_transfer_log(log: LogEntry, skips: Counter | None = None) -> DecodedTransfer | None:
    """Decode a Transfer event by its (topic count, data length) shape.

    3 topics + 32 data bytes is ERC20, 4 topics + no data is ERC721 and
    1 topic + 96 data bytes is an ERC20 token with unindexed parameters.
    Anything else carrying the Transfer topic is counted in ``skips`` under
    ``"shape"``; indexed addresses with non-zero padding count under
    ``"address_padding"``.
    """
    topics = log.topics
    if not topics or topics[0] != TRANSFER_TOPIC:
        return None
    n, size = len(topics), len(log.data)
    if n == 3 and size == 32:
        standard, words = ERC20, (topics[1], topics[2], log.data)
    elif n == 4 and size == 0:
        standard, words = ERC721, (topics[1], topics[2], topics[3])
    elif n == 1 and size == 96:
        d = log.data
        standard, words = ERC20_NONSTANDARD, (d[:32], d[32:64], d[64:])
    else:
        if skips is not None:
            skips["shape"] += 1
        return None
    src, dst = word_to_address(words[0]), word_to_address(words[1])
    if src is None or dst is None:
        if skips is not None:
            skips["address_padding"] += 1
        return None
    return DecodedTransfer(
        standard=standard,
        token=log.address,
        from_=src,
        to=dst,
        amount_or_token_id=Amount256(int.from_bytes(words[2], "big")),
        log_index=log.log_index,
    )


_WORD = re.compile(r"[^\W_]+")


def decode_extra_text(data: bytes) -> list[str]:
    """Tokenize free text (miner extra data, token names) into lower-case words."""
    text = bytes(data).decode("utf-8", errors="replace")
    text = "".join(ch for ch in text if ch.isprintable()).lower()
    return _WORD.findall(text)


# --- minimal ABI helpers for token metadata calls ---------------------------


def encode_uint(value: int) -> bytes:
    return int(value).to_bytes(32, "big")


def encode_string(text: str) -> bytes:
    raw = text.encode("utf-8")
    padded = raw + b"\x00" * (-len(raw) % 32)
    return encode_uint(32) + encode_uint(len(raw)) + padded


def encode_bytes32_string(text: str) -> bytes:
    raw = text.encode("utf-8")
    if len(raw) > 32:
        raise ValueError("bytes32 text longer than 32 bytes")
    return raw.ljust(32, b"\x00")


def decode_uint(data: bytes) -> int:
    if len(data) < 32:
        raise ValueError(f"uint256 response needs 32 bytes, got {len(data)}")
    return int.from_bytes(data[:32], "big")


def decode_string(data: bytes) -> str:
    """Decode an ABI ``string`` return value, or a ``bytes32`` one as some old tokens use."""
    if len(data) == 32:
        return data.rstrip(b"\x00").decode("utf-8", errors="replace")
    if len(data) < 64:
        raise ValueError(f"string response too short: {len(data)} bytes")
    offset = decode_uint(data[:32])
    length = decode_uint(data[offset : offset + 32])
    body = data[offset + 32 : offset + 32 + length]
    if len(body) != length:
        raise ValueError("string response truncated")
    return body.decode("utf-8", errors="replace")


METADATA_SELECTORS = {
    "name": function_selector("name()"),
    "symbol": function_selector("symbol()"),
    "decimals": function_selector("decimals()"),
    "total_supply": function_selector("totalSupply()"),
}
