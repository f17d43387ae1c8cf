"""Keccak-256 with the original Keccak padding (0x01 ... 0x80).

This is the hash Ethereum uses for function selectors and event topics.  It
differs from the standardized SHA3-256 only in the domain padding byte, which
is exactly the mistake that would silently corrupt every decoded token row,
so :func:`self_check` is run at import time.
"""

from __future__ import annotations

_RATE = 136  # bytes, for a 256-bit capacity of 512
_MASK = (1 << 64) - 1

_RC = (
    0x0000000000000001, 0x0000000000008082, 0x800000000000808A, 0x8000000080008000,
    0x000000000000808B, 0x0000000080000001, 0x8000000080008081, 0x8000000000008009,
    0x000000000000008A, 0x0000000000000088, 0x0000000080008009, 0x000000008000000A,
    0x000000008000808B, 0x800000000000008B, 0x8000000000008089, 0x8000000000008003,
    0x8000000000008002, 0x8000000000000080, 0x000000000000800A, 0x800000008000000A,
    0x8000000080008081, 0x8000000000008080, 0x0000000080000001, 0x8000000080008008,
)

# rotation offsets indexed by x + 5*y
_ROT = (
    0, 1, 62, 28, 27,
    36, 44, 6, 55, 20,
    3, 10, 43, 25, 39,
    41, 45, 15, 21, 8,
    18, 2, 61, 56, 14,
)

# pi step: lane at x + 5*y moves to y + 5*((2x + 3y) % 5)
_PI = tuple(y + 5 * ((2 * x + 3 * y) % 5) for y in range(5) for x in range(5))


def _permute(s: list[int]) -> None:
    rot, pi, mask = _ROT, _PI, _MASK
    b = [0] * 25
    for rc in _RC:
        c0 = s[0] ^ s[5] ^ s[10] ^ s[15] ^ s[20]
        c1 = s[1] ^ s[6] ^ s[11] ^ s[16] ^ s[21]
        c2 = s[2] ^ s[7] ^ s[12] ^ s[17] ^ s[22]
        c3 = s[3] ^ s[8] ^ s[13] ^ s[18] ^ s[23]
        c4 = s[4] ^ s[9] ^ s[14] ^ s[19] ^ s[24]
        d = (
            c4 ^ (((c1 << 1) | (c1 >> 63)) & mask),
            c0 ^ (((c2 << 1) | (c2 >> 63)) & mask),
            c1 ^ (((c3 << 1) | (c3 >> 63)) & mask),
            c2 ^ (((c4 << 1) | (c4 >> 63)) & mask),
            c3 ^ (((c0 << 1) | (c0 >> 63)) & mask),
        )
        for i in range(25):
            v = s[i] ^ d[i % 5]
            r = rot[i]
            b[pi[i]] = ((v << r) | (v >> (64 - r))) & mask if r else v
        for y in range(0, 25, 5):
            b0, b1, b2, b3, b4 = b[y], b[y + 1], b[y + 2], b[y + 3], b[y + 4]
            s[y] = b0 ^ (~b1 & b2)
            s[y + 1] = b1 ^ (~b2 & b3)
            s[y + 2] = b2 ^ (~b3 & b4)
            s[y + 3] = b3 ^ (~b4 & b0)
            s[y + 4] = b4 ^ (~b0 & b1)
        s[0] ^= rc


def keccak256(data: bytes) -> bytes:
    """Return the 32-byte Keccak-256 digest of ``data``."""
    data = bytes(data)
    pad = _RATE - len(data) % _RATE
    padded = bytearray(data)
    padded += b"\x00" * pad
    padded[len(data)] |= 0x01
    padded[-1] |= 0x80
    state = [0] * 25
    for off in range(0, len(padded), _RATE):
        block = padded[off : off + _RATE]
        for i in range(_RATE // 8):
            state[i] ^= int.from_bytes(block[8 * i : 8 * i + 8], "little")
        _permute(state)
    return b"".join(state[i].to_bytes(8, "little") for i in range(4))


EMPTY_DIGEST = bytes.fromhex("c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470")


def self_check() -> None:
    if keccak256(b"") != EMPTY_DIGEST:
        raise RuntimeError("keccak256 self-check failed: wrong padding or permutation")


self_check()
