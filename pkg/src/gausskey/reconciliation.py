"""Reverse reconciliation over a binary linear code.

Bob discretizes his observations, publishes the coset representative of his
word's syndrome, and keeps the resulting codeword; Alice decodes the same
codeword from her correlated symbols with belief propagation. The code is a
pluggable parity-check matrix in the standard alist text format; a small
Gallager-style regular construction ships for tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import ndtr

from .estimation import EmpiricalCdf, EstimateBundle
from .hashing import BitString

__all__ = [
    "LinearCode",
    "SoftChannel",
    "load_alist",
    "gallager_code",
    "syndrome",
    "coset_representative",
    "channel_llr",
    "bp_decode",
    "reconcile",
]

LLR_CLAMP = 40.0  # near-deterministic symbols saturate here


def _pack_rows(rows: list[list[int]], n: int) -> np.ndarray:
    words = (n + 63) // 64
    out = np.zeros((len(rows), words), dtype=np.uint64)
    for i, cols in enumerate(rows):
        for c in cols:
            out[i, c >> 6] |= np.uint64(1) << np.uint64(c & 63)
    return out


class LinearCode:
    """Binary linear code given by parity checks, with fixed coset inverses.

    Gaussian elimination runs once at load time, tracking the row transform
    so that coset representatives are a deterministic function of the
    syndrome (supported on the pivot columns, lowest columns first).
    """

    def __init__(self, n_code: int, check_cols: list[list[int]]):
        if any((c < 0 or c >= n_code) for cols in check_cols for c in cols):
            raise ValueError("column index out of range")
        self.n_code = n_code
        self.num_checks = len(check_cols)
        self.check_cols = [sorted(set(cols)) for cols in check_cols]
        self._rows = _pack_rows(self.check_cols, n_code)
        self._edges_check = np.concatenate(
            [np.full(len(cols), i) for i, cols in enumerate(self.check_cols)]
        ).astype(np.int64)
        self._edges_var = np.concatenate(self.check_cols).astype(np.int64)
        counts = np.bincount(self._edges_check, minlength=self.num_checks)
        if np.any(counts == 0):
            raise ValueError("empty parity check row")
        self._check_starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        self._elaborate()

    def _elaborate(self) -> None:
        r, w = self._rows.shape
        work = self._rows.copy()
        aug_words = (r + 63) // 64
        transform = np.zeros((r, aug_words), dtype=np.uint64)
        idx = np.arange(r)
        transform[idx, idx >> 6] = np.uint64(1) << (idx & 63).astype(np.uint64)
        rank = 0
        pivots = []
        one = np.uint64(1)
        for col in range(self.n_code):
            wi, bi = col >> 6, np.uint64(col & 63)
            column = (work[rank:, wi] >> bi) & one
            hit = np.nonzero(column)[0]
            if hit.size == 0:
                continue
            piv = rank + int(hit[0])
            if piv != rank:
                work[[rank, piv]] = work[[piv, rank]]
                transform[[rank, piv]] = transform[[piv, rank]]
            sel = ((work[:, wi] >> bi) & one).astype(bool)
            sel[rank] = False
            if sel.any():
                work[sel] ^= work[rank]
                transform[sel] ^= transform[rank]
            pivots.append(col)
            rank += 1
            if rank == r:
                break
        self.rank = rank
        self.dim = self.n_code - rank
        self._pivots = np.asarray(pivots, dtype=np.int64)
        self._transform = transform

    @property
    def rate(self) -> float:
        return self.dim / self.n_code

    def syndrome_of(self, x: BitString) -> BitString:
        if x.length != self.n_code:
            raise ValueError("length mismatch")
        ones = np.bitwise_count(self._rows & x.words[None, :]).sum(axis=1, dtype=np.int64)
        return BitString.from_bits((ones & 1).astype(np.uint8))

    def representative(self, syn: BitString) -> BitString:
        if syn.length != self.num_checks:
            raise ValueError("syndrome length mismatch")
        ones = np.bitwise_count(self._transform & syn.words[None, :]).sum(
            axis=1, dtype=np.int64
        )
        reduced = (ones & 1).astype(np.uint8)
        if reduced[self.rank :].any():
            raise ValueError("syndrome outside the row space")
        bits = np.zeros(self.n_code, dtype=np.uint8)
        bits[self._pivots] = reduced[: self.rank]
        return BitString.from_bits(bits)

    def to_alist(self) -> str:
        n, r = self.n_code, self.num_checks
        col_lists: list[list[int]] = [[] for _ in range(n)]
        for i, cols in enumerate(self.check_cols):
            for c in cols:
                col_lists[c].append(i)
        cw = [len(c) for c in col_lists]
        rw = [len(c) for c in self.check_cols]
        mc, mr = max(cw), max(rw)
        lines = [f"{n} {r}", f"{mc} {mr}"]
        lines.append(" ".join(map(str, cw)))
        lines.append(" ".join(map(str, rw)))
        for rows_of_col in col_lists:
            entries = [str(i + 1) for i in rows_of_col] + ["0"] * (mc - len(rows_of_col))
            lines.append(" ".join(entries))
        for cols in self.check_cols:
            entries = [str(c + 1) for c in cols] + ["0"] * (mr - len(cols))
            lines.append(" ".join(entries))
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_alist(text: str) -> "LinearCode":
        tokens = text.split()
        if len(tokens) < 4:
            raise ValueError("truncated alist header")
        pos = 0

        def take(count: int) -> list[int]:
            nonlocal pos
            if pos + count > len(tokens):
                raise ValueError("truncated alist body")
            out = [int(t) for t in tokens[pos : pos + count]]
            pos += count
            return out

        n, r = take(2)
        mc, mr = take(2)
        col_w = take(n)
        row_w = take(r)
        if any(w < 0 or w > mc for w in col_w) or any(w < 0 or w > mr for w in row_w):
            raise ValueError("alist weight out of range")
        check_cols: list[list[int]] = [[] for _ in range(r)]
        for col in range(n):
            entries = take(mc)
            live = [e for e in entries if e != 0]
            if len(live) != col_w[col]:
                raise ValueError(f"column {col} weight mismatch")
            for e in live:
                check_cols[e - 1].append(col)
        for row in range(r):
            entries = take(mr)
            live = sorted(e - 1 for e in entries if e != 0)
            if live != check_cols[row]:
                raise ValueError(f"row {row} disagrees with column lists")
        return LinearCode(n_code=n, check_cols=check_cols)


@lru_cache(maxsize=8)
def load_alist(path: str) -> LinearCode:
    with open(path, "r", encoding="ascii") as fh:
        return LinearCode.from_alist(fh.read())


def gallager_code(
    n_code: int, col_weight: int, row_weight: int, rng: np.random.Generator
) -> LinearCode:
    """Regular construction: one band of disjoint rows per column weight.

    Band zero partitions the columns in order; every further band applies an
    independent random column permutation to the same partition.
    """
    if n_code % row_weight != 0:
        raise ValueError("row_weight must divide n_code")
    band_rows = n_code // row_weight
    check_cols: list[list[int]] = []
    for band in range(col_weight):
        cols = np.arange(n_code) if band == 0 else rng.permutation(n_code)
        for j in range(band_rows):
            check_cols.append(sorted(cols[j * row_weight : (j + 1) * row_weight].tolist()))
    return LinearCode(n_code=n_code, check_cols=check_cols)


def syndrome(code: LinearCode, x: BitString) -> BitString:
    return code.syndrome_of(x)


def coset_representative(code: LinearCode, syn: BitString) -> BitString:
    return code.representative(syn)


@dataclass(frozen=True)
class SoftChannel:
    """Likelihoods of Alice's symbol given Bob's published bit.

    Built from the estimated residual CDF; the prior log-ratio corrects for
    the (small, data-driven) asymmetry of the bit marginal.
    """

    c_hat: float
    residual_cdf: EmpiricalCdf
    prior_log_ratio: float  # ln Pr[bit 1] - ln Pr[bit 0]

    @staticmethod
    def from_bundle(bundle: EstimateBundle) -> "SoftChannel":
        if not bundle.complete:
            raise ValueError("bundle has no residuals")
        cdf = EmpiricalCdf(points=bundle.residuals)
        nodes, weights = _std_nodes()
        p_zero = 1.0 - np.asarray(cdf(-bundle.c_hat * nodes), dtype=float)
        z0 = float(np.dot(weights, p_zero))
        z0 = min(max(z0, 1e-300), 1.0 - 1e-16)
        prior = math.log(1.0 - z0) - math.log(z0)
        return SoftChannel(
            c_hat=bundle.c_hat, residual_cdf=cdf, prior_log_ratio=prior
        )

    def llr_array(self, symbols: np.ndarray, flips: np.ndarray) -> np.ndarray:
        signed = np.where(np.asarray(flips) != 0, -1.0, 1.0) * np.asarray(symbols, float)
        g1 = np.asarray(self.residual_cdf(-self.c_hat * signed), dtype=float)
        g0 = 1.0 - g1
        with np.errstate(divide="ignore"):
            llr = np.log(g0) - np.log(g1) + self.prior_log_ratio
        return np.clip(llr, -LLR_CLAMP, LLR_CLAMP)


_STD_CACHE: tuple[np.ndarray, np.ndarray] | None = None


def _std_nodes() -> tuple[np.ndarray, np.ndarray]:
    global _STD_CACHE
    if _STD_CACHE is None:
        x, w = np.polynomial.hermite.hermgauss(96)
        _STD_CACHE = (x * math.sqrt(2.0), w / math.sqrt(math.pi))
    return _STD_CACHE


def channel_llr(chan: SoftChannel, symbol: float, flip: int) -> float:
    """Log-likelihood ratio for one symbol under the published coset bit."""
    return float(chan.llr_array(np.array([symbol]), np.array([flip]))[0])


def bp_decode(
    code: LinearCode, llrs, max_iters: int = 60
) -> tuple[BitString, bool]:
    """Sum-product decoding; converged means every parity check passed.

    Non-convergence is not an error: downstream verification catches any
    residual mismatch.
    """
    llrs = np.clip(np.asarray(llrs, dtype=float), -LLR_CLAMP, LLR_CLAMP)
    if llrs.size != code.n_code:
        raise ValueError("llr vector length mismatch")
    ce, ve, starts = code._edges_check, code._edges_var, code._check_starts
    msg_vc = llrs[ve]
    hard = (llrs < 0).astype(np.uint8)
    ok = not code.syndrome_of(BitString.from_bits(hard)).to_bits().any()
    if ok:
        return BitString.from_bits(hard), True
    tiny = 1e-12
    for _ in range(max_iters):
        t = np.tanh(0.5 * msg_vc)
        mag = np.clip(np.abs(t), tiny, 1.0 - 1e-12)
        neg = (t < 0).astype(np.int64)
        log_mag = np.log(mag)
        group_log = np.add.reduceat(log_mag, starts)
        group_neg = np.add.reduceat(neg, starts)
        ext_log = group_log[ce] - log_mag
        ext_sign = 1.0 - 2.0 * ((group_neg[ce] - neg) & 1)
        prod = np.clip(ext_sign * np.exp(ext_log), -(1.0 - 1e-12), 1.0 - 1e-12)
        msg_cv = 2.0 * np.arctanh(prod)
        totals = llrs + np.bincount(ve, weights=msg_cv, minlength=code.n_code)
        msg_vc = np.clip(totals[ve] - msg_cv, -LLR_CLAMP, LLR_CLAMP)
        hard = (totals < 0).astype(np.uint8)
        if not code.syndrome_of(BitString.from_bits(hard)).to_bits().any():
            return BitString.from_bits(hard), True
    return BitString.from_bits(hard), False


def reconcile(
    code: LinearCode, bob_bits: BitString, alice_symbols, chan: SoftChannel
) -> tuple[BitString, BitString, BitString]:
    """One reconciliation block.

    Bob moves his word into the code by subtracting the deterministic coset
    representative of its syndrome; the representative is the only public
    message. Alice decodes the same codeword from her symbols, with signs
    flipped where the representative has ones.
    """
    symbols = np.asarray(alice_symbols, dtype=float)
    if bob_bits.length != code.n_code or symbols.size != code.n_code:
        raise ValueError("block length mismatch")
    shift = code.representative(code.syndrome_of(bob_bits))
    bob_codeword = bob_bits ^ shift
    llrs = chan.llr_array(symbols, shift.to_bits())
    alice_codeword, _converged = bp_decode(code, llrs)
    return bob_codeword, alice_codeword, shift
