import os

import pytest
from Crypto.Hash import keccak as oracle

from xbeth.keccak import EMPTY_DIGEST, keccak256


def reference(data: bytes) -> bytes:
    return oracle.new(digest_bits=256, data=data).digest()


def test_empty_input():
    assert keccak256(b"").hex() == "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470"
    assert EMPTY_DIGEST == reference(b"")


def test_transfer_signature():
    want = "ddf252ad1be2c89b69c2b068fc378daa952ba7f163c4a11628f55a4df523b3ef"
    assert keccak256(b"Transfer(address,address,uint256)").hex() == want
    assert reference(b"Transfer(address,address,uint256)").hex() == want


@pytest.mark.parametrize("n", [1, 55, 135, 136, 137, 271, 272, 273, 1000])
def test_block_boundaries(n):
    data = os.urandom(n)
    assert keccak256(data) == reference(data)


def test_random_inputs_match_oracle():
    rnd = __import__("random").Random(7)
    for _ in range(300):
        data = rnd.randbytes(rnd.randrange(0, 600))
        digest = keccak256(data)
        assert len(digest) == 32
        assert digest == reference(data)


def test_accepts_bytearray_and_memoryview():
    assert keccak256(bytearray(b"abc")) == keccak256(memoryview(b"abc")) == reference(b"abc")
