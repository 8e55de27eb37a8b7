"""End-to-end key generation: sampling, estimation, reconciliation, hashing.

One run consumes n + 2l channel rounds. A public sampling seed splits them
into two disjoint estimation halves and the distillation block; moment and
residual estimates gate the run, size the sacrifice, and parameterize both
the decoder and the security certificates. Everything Bob publishes lands in
the Transcript, which is sufficient for Alice to replay her side bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .estimation import (
    EmpiricalCdf,
    EstimateBundle,
    EveCdf,
    estimate_eve_cdf,
    estimate_moments,
    residuals,
)
from .gaussmodel import ChannelParams, NoiseSpec, sample_rounds
from .hashing import BitString, ToeplitzSeed, auth_failure_prob, toeplitz_hash, verification_tag
from .reconciliation import LinearCode, SoftChannel, bp_decode, load_alist, reconcile
from .secbounds import (
    MODIFIED_MUTUAL_INFO,
    VARIATIONAL_DISTANCE,
    ExponentWithPadding,
    SecurityCertificate,
    build_certified_exponent,
    minimize_exponent,
    mutual_info_ab,
    sacrifice_length,
)

__all__ = [
    "ProtocolConfig",
    "Transcript",
    "ProtocolOutcome",
    "STATUS_SUCCESS",
    "STATUS_VERIFICATION_FAILED",
    "STATUS_ABORTED",
    "post_selection_gate",
    "certify",
    "run_protocol",
    "replay_alice",
]

STATUS_SUCCESS = "success"
STATUS_VERIFICATION_FAILED = "verification-failed"
STATUS_ABORTED = "aborted"

_SEED_BOUND = 2**63


@dataclass(frozen=True)
class ProtocolConfig:
    """Static run parameters; channel parameters live in ChannelParams."""

    n: int  # distillation rounds, a multiple of the code length
    l: int  # rounds per estimation half
    epsilon: float  # per-estimate confidence parameter
    security_target_log2: float  # distance-bound target, log2
    m2: int  # verification tag bits, removed from the key
    code_path: str
    m1_override: int | None = None  # fixed sacrifice, skips the search
    k_auth: int = 0  # authentication key bits per message, 0 = pre-shared trust

    def __post_init__(self) -> None:
        if self.n < 1 or self.l < 2:
            raise ValueError("need n >= 1 and l >= 2")
        if not (0 < self.epsilon < 0.5):
            raise ValueError("epsilon must lie in (0, 1/2)")
        if self.m2 < 0:
            raise ValueError("tag length must be nonnegative")
        if self.m1_override is not None and self.m1_override < 0:
            raise ValueError("sacrifice override must be nonnegative")
        if self.k_auth < 0:
            raise ValueError("authentication key length must be nonnegative")


@dataclass(frozen=True)
class Transcript:
    """Everything that crossed the public channel, in order.

    The estimation-round values are public by construction, so the sorted
    residual list rides along; it is what Alice needs to rebuild the decoder
    and the certificates without Bob's raw samples.
    """

    sampling_seed: int
    e_hat: float
    v_hat: float
    c_hat: float
    v_ab_hat: float
    residuals: tuple[float, ...] = field(repr=False)
    coset_hex: tuple[str, ...] = field(repr=False)
    m1: int
    m2: int
    pa_seed: int
    verify_seed: int
    bob_tag_hex: str
    alice_tag_hex: str

    @property
    def message_count(self) -> int:
        # seeds, two estimate batches, tag exchange, one coset word per block
        return 6 + len(self.coset_hex)

    def to_json_dict(self) -> dict:
        return {
            "sampling_seed": self.sampling_seed,
            "e_hat": self.e_hat,
            "v_hat": self.v_hat,
            "c_hat": self.c_hat,
            "v_ab_hat": self.v_ab_hat,
            "residuals": list(self.residuals),
            "coset_hex": list(self.coset_hex),
            "m1": self.m1,
            "m2": self.m2,
            "pa_seed": self.pa_seed,
            "verify_seed": self.verify_seed,
            "bob_tag_hex": self.bob_tag_hex,
            "alice_tag_hex": self.alice_tag_hex,
        }

    @staticmethod
    def from_json_dict(data: dict) -> "Transcript":
        return Transcript(
            sampling_seed=int(data["sampling_seed"]),
            e_hat=float(data["e_hat"]),
            v_hat=float(data["v_hat"]),
            c_hat=float(data["c_hat"]),
            v_ab_hat=float(data["v_ab_hat"]),
            residuals=tuple(float(x) for x in data["residuals"]),
            coset_hex=tuple(str(x) for x in data["coset_hex"]),
            m1=int(data["m1"]),
            m2=int(data["m2"]),
            pa_seed=int(data["pa_seed"]),
            verify_seed=int(data["verify_seed"]),
            bob_tag_hex=str(data["bob_tag_hex"]),
            alice_tag_hex=str(data["alice_tag_hex"]),
        )


@dataclass(frozen=True)
class ProtocolOutcome:
    status: str
    abort_reason: str | None = None
    bob_key: BitString | None = None
    alice_key: BitString | None = None
    certificates: tuple[SecurityCertificate, ...] = ()
    transcript: Transcript | None = None
    mutual_info_estimate: float | None = None
    converged_blocks: int = 0
    total_blocks: int = 0

    @property
    def key_length(self) -> int:
        return 0 if self.bob_key is None else self.bob_key.length


def post_selection_gate(bundle: EstimateBundle, params: ChannelParams) -> bool:
    """Keep the run only if the certified correlation clears the geometry.

    The injected-noise variance is inferred by subtracting the explained
    part and the detector variance from the observed variance, floored at
    zero; a zero floor degenerates the test to requiring any covariance
    signal at all.
    """
    v_y_hat = max(bundle.v_hat - bundle.c_hat**2 - params.bob_noise**2, 0.0)
    if v_y_hat == 0.0:
        return bundle.c_hat != 0.0
    uc = bundle.underline_c()
    ratio = params.eve_gain**2 / params.eve_noise**2
    return uc * uc / v_y_hat > ratio + 1.0


def certify(
    phi: ExponentWithPadding,
    bundle: EstimateBundle,
    config: ProtocolConfig,
    m1: int,
    message_count: int = 0,
) -> tuple[SecurityCertificate, SecurityCertificate]:
    """Both leakage certificates at the chosen sacrifice length.

    The reported confidence composes the two estimation-interval failures;
    with authentication enabled the per-message forgery bound joins in.
    """
    confidence = 1.0 - 2.0 * bundle.epsilon
    if config.k_auth > 0 and message_count > 0:
        confidence -= auth_failure_prob(message_count, config.k_auth)
    confidence = max(confidence, 0.0)
    uc = bundle.underline_c()
    dist = minimize_exponent(
        phi, config.n, m1, VARIATIONAL_DISTANCE,
        padding=phi.padding, shrunk_param=uc, confidence=confidence,
    )
    info = minimize_exponent(
        phi, config.n, m1, MODIFIED_MUTUAL_INFO,
        padding=phi.padding, shrunk_param=uc, confidence=confidence,
    )
    return dist, info


def _abort(reason: str, **extra) -> ProtocolOutcome:
    return ProtocolOutcome(status=STATUS_ABORTED, abort_reason=reason, **extra)


def _concat_bits(blocks: list[BitString]) -> BitString:
    return BitString.from_bits(np.concatenate([b.to_bits() for b in blocks]))


def run_protocol(
    params: ChannelParams,
    noise: NoiseSpec,
    config: ProtocolConfig,
    rng: np.random.Generator,
    inject_alice_bit_flips: int = 0,
    code: LinearCode | None = None,
) -> ProtocolOutcome:
    """One full protocol run against a simulated channel.

    inject_alice_bit_flips corrupts Alice's reconciled word before hashing,
    for exercising the verification step. A preloaded code skips the alist
    parse when many runs share one.
    """
    if code is None:
        code = load_alist(config.code_path)
    if config.n % code.n_code != 0:
        return _abort("config n is not a multiple of the code length")
    num_blocks = config.n // code.n_code
    dim_total = num_blocks * code.dim

    sampling_seed = int(rng.integers(_SEED_BOUND))
    total = config.n + 2 * config.l
    alice, bob, _eve, _injected = sample_rounds(params, noise, rng, total)

    perm = np.random.default_rng(sampling_seed).permutation(total)
    est1, est2 = perm[: config.l], perm[config.l : 2 * config.l]
    distill = perm[2 * config.l :]

    bundle = estimate_moments(
        np.column_stack([alice[est1], bob[est1]]), config.epsilon
    )
    bundle = residuals(np.column_stack([alice[est2], bob[est2]]), bundle)

    if not post_selection_gate(bundle, params):
        return _abort("post-selection gate rejected the estimated geometry")
    try:
        mi_estimate = mutual_info_ab(bundle, EmpiricalCdf(points=bundle.residuals))
    except ValueError as exc:
        return _abort(f"degenerate estimates: {exc}")
    if code.rate > mi_estimate:
        return _abort(
            f"code rate {code.rate:.4f} above estimated channel information "
            f"{mi_estimate:.4f}",
            mutual_info_estimate=mi_estimate,
        )

    eve = estimate_eve_cdf(bundle, params)
    try:
        phi = build_certified_exponent(bundle, eve, params, config.epsilon)
    except ValueError as exc:
        return _abort(str(exc), mutual_info_estimate=mi_estimate)

    if config.m1_override is not None:
        m1 = config.m1_override
        if m1 > config.n:
            return _abort("sacrifice override exceeds the distillation length")
    else:
        try:
            m1 = sacrifice_length(phi, config.n, config.security_target_log2)
        except ValueError as exc:
            return _abort(str(exc), mutual_info_estimate=mi_estimate)
    if dim_total - m1 - config.m2 < 0:
        return _abort(
            f"no key left: sacrifice {m1} plus tag {config.m2} "
            f"exceeds code dimension {dim_total}",
            mutual_info_estimate=mi_estimate,
        )

    chan = SoftChannel.from_bundle(bundle)
    bob_bits_all = (bob[distill] < bundle.e_hat).astype(np.uint8)  # B >= e_hat -> 0
    alice_symbols_all = alice[distill]
    bob_blocks: list[BitString] = []
    alice_blocks: list[BitString] = []
    coset_hex: list[str] = []
    converged = 0
    for k in range(num_blocks):
        sl = slice(k * code.n_code, (k + 1) * code.n_code)
        bob_cw, alice_cw, shift = reconcile(
            code, BitString.from_bits(bob_bits_all[sl]), alice_symbols_all[sl], chan
        )
        if bob_cw == alice_cw:
            converged += 1
        bob_blocks.append(bob_cw)
        alice_blocks.append(alice_cw)
        coset_hex.append(shift.to_hex())

    bob_word = _concat_bits(bob_blocks)
    alice_word = _concat_bits(alice_blocks)
    if inject_alice_bit_flips > 0:
        flips = rng.choice(config.n, size=inject_alice_bit_flips, replace=False)
        bits = alice_word.to_bits()
        bits[flips] ^= 1
        alice_word = BitString.from_bits(bits)

    n2 = dim_total - m1
    pa_seed = int(rng.integers(_SEED_BOUND))
    pa = ToeplitzSeed.random(np.random.default_rng(pa_seed), config.n, n2)
    bob_key = toeplitz_hash(pa, bob_word)
    alice_key = toeplitz_hash(pa, alice_word)

    verify_seed = int(rng.integers(_SEED_BOUND))
    if config.m2 > 0:
        vseed = ToeplitzSeed.random(np.random.default_rng(verify_seed), n2, config.m2)
        bob_tag = verification_tag(bob_key, vseed, config.m2)
        alice_tag = verification_tag(alice_key, vseed, config.m2)
    else:
        bob_tag = alice_tag = BitString.zeros(0)  # verification disabled

    transcript = Transcript(
        sampling_seed=sampling_seed,
        e_hat=bundle.e_hat,
        v_hat=bundle.v_hat,
        c_hat=bundle.c_hat,
        v_ab_hat=bundle.v_ab_hat,
        residuals=bundle.residuals,
        coset_hex=tuple(coset_hex),
        m1=m1,
        m2=config.m2,
        pa_seed=pa_seed,
        verify_seed=verify_seed,
        bob_tag_hex=bob_tag.to_hex(),
        alice_tag_hex=alice_tag.to_hex(),
    )
    certificates = certify(phi, bundle, config, m1, transcript.message_count)

    if bob_tag != alice_tag:
        return ProtocolOutcome(
            status=STATUS_VERIFICATION_FAILED,
            certificates=certificates,
            transcript=transcript,
            mutual_info_estimate=mi_estimate,
            converged_blocks=converged,
            total_blocks=num_blocks,
        )

    keep = n2 - config.m2  # tag bits are burned
    bob_final = BitString.from_bits(bob_key.to_bits()[:keep])
    alice_final = BitString.from_bits(alice_key.to_bits()[:keep])
    return ProtocolOutcome(
        status=STATUS_SUCCESS,
        bob_key=bob_final,
        alice_key=alice_final,
        certificates=certificates,
        transcript=transcript,
        mutual_info_estimate=mi_estimate,
        converged_blocks=converged,
        total_blocks=num_blocks,
    )


def replay_alice(
    alice_symbols: np.ndarray, transcript: Transcript, code: LinearCode
) -> BitString:
    """Alice's side recomputed from her raw symbols plus the transcript.

    Returns the final key after tag removal; byte-identical to the run's
    alice_key whenever the same transcript and symbols go in.
    """
    symbols = np.asarray(alice_symbols, dtype=float)
    l = len(transcript.residuals)
    total = symbols.size
    n = total - 2 * l
    if n <= 0 or n % code.n_code != 0:
        raise ValueError("symbol record does not match the transcript")
    num_blocks = n // code.n_code

    perm = np.random.default_rng(transcript.sampling_seed).permutation(total)
    distill = perm[2 * l :]
    mine = symbols[distill]

    bundle = EstimateBundle(
        e_hat=transcript.e_hat,
        v_hat=transcript.v_hat,
        c_hat=transcript.c_hat,
        v_ab_hat=transcript.v_ab_hat,
        w_hat=float("nan"),
        l=l,
        epsilon=0.25,  # decoder replay never touches the intervals
        residuals=transcript.residuals,
    )
    chan = SoftChannel.from_bundle(bundle)

    blocks: list[BitString] = []
    for k in range(num_blocks):
        sl = slice(k * code.n_code, (k + 1) * code.n_code)
        shift = BitString.from_hex(transcript.coset_hex[k], code.n_code)
        llrs = chan.llr_array(mine[sl], shift.to_bits())
        word, _ = bp_decode(code, llrs)
        blocks.append(word)

    n2 = num_blocks * code.dim - transcript.m1
    pa = ToeplitzSeed.random(np.random.default_rng(transcript.pa_seed), n, n2)
    key = toeplitz_hash(pa, _concat_bits(blocks))
    return BitString.from_bits(key.to_bits()[: n2 - transcript.m2])
