"""Binary universal hashing for privacy amplification and key verification.

Toeplitz matrices over GF(2) form a universal family: any fixed pair of
distinct inputs collides with probability at most 2^-output_length over the
seed. Inputs are processed as packed 64-bit words (little-endian bit order
within a word); hex serialization is most-significant-bit first. Both
conventions are part of the wire format and must not change.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BitString",
    "ToeplitzSeed",
    "toeplitz_hash",
    "collision_probability",
    "verification_tag",
    "auth_failure_prob",
]


def _pack(bits: np.ndarray) -> np.ndarray:
    """uint8 bit array -> uint64 words, bit i at word i//64, position i%64."""
    raw = np.packbits(bits.astype(np.uint8), bitorder="little")
    pad = (-raw.size) % 8
    if pad:
        raw = np.concatenate([raw, np.zeros(pad, dtype=np.uint8)])
    return raw.view("<u8").copy()


def _unpack(words: np.ndarray, length: int) -> np.ndarray:
    return np.unpackbits(words.view(np.uint8), bitorder="little")[:length]


@dataclass(frozen=True, eq=False)
class BitString:
    words: np.ndarray
    length: int

    @staticmethod
    def from_bits(bits) -> "BitString":
        arr = np.asarray(bits, dtype=np.uint8)
        if arr.ndim != 1 or np.any(arr > 1):
            raise ValueError("bits must be a flat 0/1 array")
        return BitString(words=_pack(arr), length=arr.size)

    @staticmethod
    def zeros(length: int) -> "BitString":
        return BitString(words=np.zeros((length + 63) // 64, dtype="<u8"), length=length)

    @staticmethod
    def random(rng: np.random.Generator, length: int) -> "BitString":
        return BitString.from_bits(rng.integers(0, 2, size=length, dtype=np.uint8))

    def to_bits(self) -> np.ndarray:
        return _unpack(self.words, self.length)

    def __len__(self) -> int:
        return self.length

    def __xor__(self, other: "BitString") -> "BitString":
        if self.length != other.length:
            raise ValueError("length mismatch")
        return BitString(words=self.words ^ other.words, length=self.length)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitString):
            return NotImplemented
        return self.length == other.length and bool(np.all(self.words == other.words))

    def __hash__(self):
        return hash((self.length, self.words.tobytes()))

    def to_hex(self) -> str:
        """Bit 0 becomes the most significant bit of the first hex digit."""
        bits = self.to_bits()
        pad = (-bits.size) % 8
        if pad:
            bits = np.concatenate([bits, np.zeros(pad, dtype=np.uint8)])
        digits = np.packbits(bits, bitorder="big").tobytes().hex()
        return digits[: (self.length + 3) // 4]

    @staticmethod
    def from_hex(text: str, length: int) -> "BitString":
        if len(text) != (length + 3) // 4:
            raise ValueError("hex length does not match bit length")
        padded = text + "0" * ((-len(text)) % 2)
        bits = np.unpackbits(
            np.frombuffer(bytes.fromhex(padded), dtype=np.uint8), bitorder="big"
        )[:length]
        return BitString.from_bits(bits)


@dataclass(frozen=True)
class ToeplitzSeed:
    """Seed bits of a Toeplitz map from input_len bits to output_len bits."""

    bits: BitString
    input_len: int
    output_len: int

    def __post_init__(self) -> None:
        if not (1 <= self.output_len <= self.input_len):
            raise ValueError("need 1 <= output_len <= input_len")
        if self.bits.length != self.input_len + self.output_len - 1:
            raise ValueError("seed must have input_len + output_len - 1 bits")

    @staticmethod
    def random(rng: np.random.Generator, input_len: int, output_len: int) -> "ToeplitzSeed":
        return ToeplitzSeed(
            bits=BitString.random(rng, input_len + output_len - 1),
            input_len=input_len,
            output_len=output_len,
        )


def toeplitz_hash(seed: ToeplitzSeed, x: BitString) -> BitString:
    """Matrix-vector product over GF(2) with the Toeplitz matrix of the seed.

    Row i of the matrix reads the reversed seed starting at offset
    output_len - 1 - i, so each row is a word-aligned window of one of 64
    preshifted copies; the product is AND + popcount parity per window.
    Linear: hash(x ^ y) = hash(x) ^ hash(y).
    """
    n1, n2 = seed.input_len, seed.output_len
    if x.length != n1:
        raise ValueError(f"input must have {n1} bits, got {x.length}")
    rev = seed.bits.to_bits()[::-1]
    xw = x.words
    wx = xw.size
    out = np.zeros(n2, dtype=np.uint8)
    for shift in range(min(64, n2)):
        offsets = np.arange(shift, n2, 64)
        shifted = _pack(rev[shift:])
        word_starts = (offsets - shift) // 64
        need = int(word_starts.max()) + wx
        if shifted.size < need:
            shifted = np.concatenate([shifted, np.zeros(need - shifted.size, dtype="<u8")])
        windows = np.lib.stride_tricks.sliding_window_view(shifted, wx)[word_starts]
        ones = np.bitwise_count(windows & xw[None, :]).sum(axis=1, dtype=np.int64)
        out[n2 - 1 - offsets] = (ones & 1).astype(np.uint8)
    return BitString.from_bits(out)


def _gf2_rank(rows: list[int]) -> int:
    basis: dict[int, int] = {}
    rank = 0
    for value in rows:
        while value:
            top = value.bit_length() - 1
            if top not in basis:
                basis[top] = value
                rank += 1
                break
            value ^= basis[top]
    return rank


def collision_probability(input_len: int, output_len: int) -> float:
    """Worst-case pair collision probability over all seeds, computed exactly.

    By linearity a pair (c, c') collides iff the map sends d = c ^ c' to
    zero, and the fraction of seeds doing so is 2^-rank of the d-windows as
    linear forms in the seed bits. Exhaustive over every nonzero d.
    """
    if not (1 <= output_len <= input_len):
        raise ValueError("need 1 <= output_len <= input_len")
    if input_len > 12:
        raise ValueError("exhaustive check limited to input_len <= 12")
    worst = 0.0
    for d in range(1, 1 << input_len):
        drev = int(f"{d:0{input_len}b}"[::-1], 2)  # window mask at offset 0
        rows = [drev << i for i in range(output_len)]
        worst = max(worst, 2.0 ** -_gf2_rank(rows))
    return worst


def verification_tag(key: BitString, seed: ToeplitzSeed, tag_len: int) -> BitString:
    """Short universal-hash tag for equality verification of two keys."""
    if tag_len > key.length:
        raise ValueError("tag cannot be longer than the key")
    if tag_len == 0:
        return BitString.zeros(0)
    if seed.input_len != key.length or seed.output_len != tag_len:
        raise ValueError("seed dimensions do not match key/tag lengths")
    return toeplitz_hash(seed, key)


def auth_failure_prob(message_count: int, auth_key_bits: int) -> float:
    """Failure probability budget of authenticating message_count messages."""
    if auth_key_bits < 1:
        raise ValueError("need at least one authentication key bit")
    return min(1.0, message_count * 2.0 ** (1 - auth_key_bits))
