import math

import numpy as np
import pytest

from gausskey.estimation import EmpiricalCdf, EstimateBundle
from gausskey.hashing import BitString
from gausskey.reconciliation import (
    LinearCode,
    SoftChannel,
    bp_decode,
    channel_llr,
    coset_representative,
    gallager_code,
    load_alist,
    reconcile,
    syndrome,
)


# ------------------------------------------------------------------ code core

def repetition_code():
    # three bits, two adjacent-equality checks, one-dimensional
    return LinearCode(3, [[0, 1], [1, 2]])


def test_repetition_code_structure():
    code = repetition_code()
    assert (code.rank, code.dim) == (2, 1)
    assert code.rate == pytest.approx(1.0 / 3.0)
    assert not code.syndrome_of(BitString.from_bits([1, 1, 1])).to_bits().any()
    assert np.array_equal(
        code.syndrome_of(BitString.from_bits([1, 0, 1])).to_bits(), [1, 1])


def test_repetition_code_representative_by_hand():
    # pivots are columns 0 and 1; reduced system maps (1,1) to word 010
    code = repetition_code()
    rep = code.representative(BitString.from_bits([1, 1]))
    assert np.array_equal(rep.to_bits(), [0, 1, 0])
    assert code.syndrome_of(rep) == BitString.from_bits([1, 1])


def test_code_validation():
    with pytest.raises(ValueError, match="out of range"):
        LinearCode(3, [[0, 3]])
    with pytest.raises(ValueError, match="empty parity check"):
        LinearCode(3, [[0, 1], []])
    code = repetition_code()
    with pytest.raises(ValueError, match="length mismatch"):
        code.syndrome_of(BitString.zeros(4))
    with pytest.raises(ValueError, match="syndrome length"):
        code.representative(BitString.zeros(3))


def test_coset_identity_on_reachable_syndromes(small_code):
    # representative is a right inverse of the syndrome map on its image
    rng = np.random.default_rng(21)
    for _ in range(200):
        word = BitString.random(rng, small_code.n_code)
        syn = small_code.syndrome_of(word)
        rep = small_code.representative(syn)
        assert small_code.syndrome_of(rep) == syn


def test_representative_deterministic_and_pivot_supported(small_code):
    rng = np.random.default_rng(22)
    word = BitString.random(rng, small_code.n_code)
    syn = small_code.syndrome_of(word)
    rep1 = small_code.representative(syn)
    rep2 = small_code.representative(syn)
    assert rep1 == rep2
    support = np.nonzero(rep1.to_bits())[0]
    assert set(support).issubset(set(small_code._pivots.tolist()))


def test_unreachable_syndrome_rejected():
    # third check is the sum of the first two, so (1, 0, 0) has no preimage
    code = LinearCode(3, [[0, 1], [1, 2], [0, 2]])
    assert code.rank == 2
    with pytest.raises(ValueError, match="outside the row space"):
        code.representative(BitString.from_bits([1, 0, 0]))


def test_duplicate_columns_collapse():
    # repeated column indices within a row reduce mod 2 at construction
    code = LinearCode(3, [[0, 1, 1, 0, 2]])
    assert code.check_cols == [[0, 1, 2]]


# ---------------------------------------------------------------------- alist

def test_alist_round_trip(tmp_path):
    rng = np.random.default_rng(13)
    code = gallager_code(64, 3, 4, rng)
    text = code.to_alist()
    back = LinearCode.from_alist(text)
    assert back.check_cols == code.check_cols
    assert (back.rank, back.dim) == (code.rank, code.dim)
    path = tmp_path / "code.alist"
    path.write_text(text)
    loaded = load_alist(str(path))
    assert loaded.check_cols == code.check_cols
    assert load_alist(str(path)) is loaded  # cached by path


def test_alist_malformed_inputs():
    good = gallager_code(8, 2, 4, np.random.default_rng(1)).to_alist()
    with pytest.raises(ValueError, match="truncated alist header"):
        LinearCode.from_alist("8 4\n")
    with pytest.raises(ValueError, match="truncated alist body"):
        LinearCode.from_alist(" ".join(good.split()[:12]))
    tokens = good.split()
    tokens[4] = "9"  # first column weight now exceeds its entry count
    with pytest.raises(ValueError, match="weight out of range|weight mismatch"):
        LinearCode.from_alist(" ".join(tokens))
    tokens = good.split()
    tokens[-1] = "1" if tokens[-1] != "1" else "2"  # corrupt a row list entry
    with pytest.raises(ValueError, match="disagrees"):
        LinearCode.from_alist(" ".join(tokens))


def test_gallager_construction():
    rng = np.random.default_rng(2)
    code = gallager_code(32, 3, 4, rng)
    assert code.num_checks == 24
    assert all(len(cols) == 4 for cols in code.check_cols)
    # every band touches every column exactly once
    cover = np.zeros(32, dtype=int)
    for cols in code.check_cols:
        cover[cols] += 1
    assert (cover == 3).all()
    assert code.check_cols[0] == [0, 1, 2, 3]
    with pytest.raises(ValueError, match="divide"):
        gallager_code(30, 3, 4, rng)


def test_module_level_wrappers(small_code):
    rng = np.random.default_rng(23)
    word = BitString.random(rng, small_code.n_code)
    syn = syndrome(small_code, word)
    assert syn == small_code.syndrome_of(word)
    assert coset_representative(small_code, syn) == small_code.representative(syn)


# --------------------------------------------------------------- soft channel

def test_channel_llr_hand_values():
    # three equally weighted residual points; at symbol 0.3 the flip
    # likelihood is the single point below -0.6
    cdf = EmpiricalCdf(points=(-1.0, 0.0, 0.5))
    chan = SoftChannel(c_hat=2.0, residual_cdf=cdf, prior_log_ratio=0.0)
    assert channel_llr(chan, 0.3, 0) == pytest.approx(math.log(2.0))
    assert channel_llr(chan, 0.3, 1) == -40.0  # all mass below 0.6
    shifted = SoftChannel(c_hat=2.0, residual_cdf=cdf, prior_log_ratio=0.7)
    assert channel_llr(shifted, 0.3, 0) == pytest.approx(math.log(2.0) + 0.7)


def test_llr_array_clipping_and_sign_symmetry():
    cdf = EmpiricalCdf(points=(-0.2, 0.1, 0.4))
    chan = SoftChannel(c_hat=1.0, residual_cdf=cdf, prior_log_ratio=0.0)
    out = chan.llr_array(np.array([100.0, -100.0, 0.3]), np.zeros(3))
    assert out[0] == 40.0 and out[1] == -40.0
    assert np.abs(out).max() <= 40.0
    # flipping the published bit mirrors the symbol
    a = np.array([0.3, -0.7])
    assert np.allclose(chan.llr_array(a, np.ones(2)),
                       chan.llr_array(-a, np.zeros(2)))


def test_from_bundle_prior_vanishes_for_symmetric_residuals():
    res = (-1.7, -0.9, -0.3, 0.3, 0.9, 1.7)
    bundle = EstimateBundle(e_hat=0.0, v_hat=2.0, c_hat=1.0, v_ab_hat=4.0,
                            w_hat=5.0, l=6, epsilon=0.01, residuals=res)
    chan = SoftChannel.from_bundle(bundle)
    assert chan.prior_log_ratio == pytest.approx(0.0, abs=1e-12)
    assert chan.c_hat == 1.0
    with pytest.raises(ValueError, match="no residuals"):
        SoftChannel.from_bundle(
            EstimateBundle(e_hat=0.0, v_hat=2.0, c_hat=1.0, v_ab_hat=4.0,
                           w_hat=5.0, l=6, epsilon=0.01))


# ------------------------------------------------------------------- decoding

def test_bp_decode_noiseless_converges_immediately(small_code):
    rng = np.random.default_rng(42)
    word = BitString.random(rng, small_code.n_code)
    rep = small_code.representative(small_code.syndrome_of(word))
    codeword = word ^ rep
    llrs = np.where(codeword.to_bits() == 1, -40.0, 40.0)
    decoded, converged = bp_decode(small_code, llrs)
    assert converged
    assert decoded == codeword


def test_bp_decode_reports_nonconvergence():
    # a single check fed two contradicting saturated beliefs has no fix
    code = LinearCode(2, [[0, 1]])
    word, converged = bp_decode(code, np.array([40.0, -40.0]), max_iters=30)
    assert not converged
    assert code.syndrome_of(word).to_bits().any()


def test_bp_decode_corrects_sparse_errors(small_code):
    rng = np.random.default_rng(43)
    word = BitString.random(rng, small_code.n_code)
    codeword = word ^ small_code.representative(small_code.syndrome_of(word))
    llrs = np.where(codeword.to_bits() == 1, -8.0, 8.0)
    flip = rng.choice(small_code.n_code, size=10, replace=False)
    llrs[flip] *= -1.0
    decoded, converged = bp_decode(small_code, llrs)
    assert converged
    assert decoded == codeword


def test_bp_decode_validates_length(small_code):
    with pytest.raises(ValueError, match="length mismatch"):
        bp_decode(small_code, np.zeros(small_code.n_code + 1))


# -------------------------------------------------------------- reconciliation

def test_reconcile_noiseless_round_trip(small_code):
    rng = np.random.default_rng(44)
    bob = BitString.random(rng, small_code.n_code)
    # symbol sign encodes the bit exactly; point residual makes it certain
    symbols = np.where(bob.to_bits() == 1, -1.0, 1.0)
    chan = SoftChannel(c_hat=1.0, residual_cdf=EmpiricalCdf(points=(0.0,)),
                       prior_log_ratio=0.0)
    bob_cw, alice_cw, shift = reconcile(small_code, bob, symbols, chan)
    assert bob_cw == alice_cw
    assert not small_code.syndrome_of(bob_cw).to_bits().any()
    assert shift == small_code.representative(small_code.syndrome_of(bob))
    assert bob_cw == bob ^ shift


def test_reconcile_matches_at_operating_point(small_code):
    # correlated Gaussian data at the low-noise demo geometry: every block
    # must close; the shift is the only quantity a wiretapper sees
    rng = np.random.default_rng(77)
    gain, rstd = 2.0, math.sqrt(0.35)
    res = np.sort(rng.normal(scale=rstd, size=4000))
    bundle = EstimateBundle(
        e_hat=0.0, v_hat=gain * gain + 0.35, c_hat=gain,
        v_ab_hat=3 * gain * gain + 0.35, w_hat=10.0, l=4000,
        epsilon=5e-5, residuals=tuple(res.tolist()))
    chan = SoftChannel.from_bundle(bundle)
    matched = 0
    for _ in range(8):
        a = rng.normal(size=small_code.n_code)
        b = gain * a + rng.normal(scale=rstd, size=small_code.n_code)
        bits = BitString.from_bits((b < 0.0).astype(np.uint8))
        bob_cw, alice_cw, shift = reconcile(small_code, bits, a, chan)
        assert not small_code.syndrome_of(bob_cw).to_bits().any()
        matched += bob_cw == alice_cw
    assert matched >= 7


def test_reconcile_validates_lengths(small_code):
    chan = SoftChannel(c_hat=1.0, residual_cdf=EmpiricalCdf(points=(0.0,)),
                       prior_log_ratio=0.0)
    with pytest.raises(ValueError, match="block length"):
        reconcile(small_code, BitString.zeros(small_code.n_code),
                  np.zeros(small_code.n_code - 1), chan)
