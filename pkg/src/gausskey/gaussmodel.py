"""Wiretap channel model with injected noise known to the eavesdropper.

Per round Alice transmits a standard Gaussian symbol. Bob receives an
attenuated copy plus injected noise plus detector noise; Eve receives her
own attenuated copy plus detector noise and additionally knows the injected
noise value. This module simulates rounds and provides the analytic
reductions that collapse Eve's knowledge into a single scalar, plus the
correlation formulas deciding whether the legitimate channel has an
advantage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ChannelParams",
    "NoiseSpec",
    "RoundSample",
    "EveReduced",
    "sample_round",
    "sample_rounds",
    "condense_eve_view",
    "squared_correlations",
    "advantage_condition",
    "combine_antennas",
    "split_complex_channel",
]


@dataclass(frozen=True)
class ChannelParams:
    """Constants of one quasi-static channel realization.

    bob_gain may carry any sign (a global sign flip is absorbed by the
    symmetric symbol distribution). eve_gain is the upper bound over the
    attenuations Eve can realize; simulations may use any true value at or
    below it.
    """

    bob_gain: float
    bob_noise: float  # detector noise stdev, > 0
    bob_offset: float
    eve_gain: float  # > 0, upper bound
    eve_noise: float  # detector noise stdev, > 0

    def __post_init__(self) -> None:
        if not (self.bob_noise > 0):
            raise ValueError("bob_noise must be positive")
        if not (self.eve_noise > 0):
            raise ValueError("eve_noise must be positive")
        if not (self.eve_gain > 0):
            raise ValueError("eve_gain must be positive")


@dataclass(frozen=True)
class NoiseSpec:
    """Distribution of the injected noise; mean is always zero.

    kind is one of "gaussian", "mixture", "empirical". The variance
    property is the exact second moment of the declared distribution, not
    a sample re-estimate: this object is the simulation ground truth.
    """

    kind: str
    gaussian_variance: float = 0.0
    components: tuple[tuple[float, float, float], ...] = ()  # (weight, mean, stdev)
    values: tuple[float, ...] = field(default=(), repr=False)

    @staticmethod
    def gaussian(variance: float) -> "NoiseSpec":
        if variance < 0 or not math.isfinite(variance):
            raise ValueError("variance must be finite and nonnegative")
        return NoiseSpec(kind="gaussian", gaussian_variance=float(variance))

    @staticmethod
    def mixture(components) -> "NoiseSpec":
        comps = tuple((float(w), float(m), float(s)) for w, m, s in components)
        if not comps:
            raise ValueError("mixture needs at least one component")
        wsum = sum(w for w, _, _ in comps)
        if abs(wsum - 1.0) > 1e-9:
            raise ValueError("mixture weights must sum to 1")
        mean = sum(w * m for w, m, _ in comps)
        if abs(mean) > 1e-9:
            raise ValueError("mixture must have overall mean 0")
        if any(w < 0 or s < 0 for w, _, s in comps):
            raise ValueError("weights and stdevs must be nonnegative")
        return NoiseSpec(kind="mixture", components=comps)

    @staticmethod
    def empirical(values) -> "NoiseSpec":
        arr = np.asarray(values, dtype=float)
        if arr.size == 0:
            raise ValueError("empirical noise needs at least one value")
        if not np.all(np.isfinite(arr)):
            raise ValueError("empirical values must be finite")
        arr = arr - arr.mean()  # centered at construction: mean must be 0
        return NoiseSpec(kind="empirical", values=tuple(arr.tolist()))

    @property
    def variance(self) -> float:
        if self.kind == "gaussian":
            return self.gaussian_variance
        if self.kind == "mixture":
            return sum(w * (m * m + s * s) for w, m, s in self.components)
        return float(np.mean(np.square(self.values)))

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.standard_normal(size) * math.sqrt(self.gaussian_variance)
        if self.kind == "mixture":
            weights = np.array([w for w, _, _ in self.components])
            means = np.array([m for _, m, _ in self.components])
            stdevs = np.array([s for _, _, s in self.components])
            idx = rng.choice(len(self.components), size=size, p=weights)
            return means[idx] + stdevs[idx] * rng.standard_normal(size)
        return rng.choice(np.asarray(self.values), size=size, replace=True)


@dataclass(frozen=True)
class RoundSample:
    alice: float  # Alice's Gaussian symbol
    bob: float  # Bob's observation
    eve: float  # Eve's observation
    injected: float  # injected noise value, known to Eve


@dataclass(frozen=True)
class EveReduced:
    """Eve's pair (observation, injected noise) condensed to one scalar.

    Conditioned on value, Bob's observation is Gaussian with mean cond_mean
    and variance cond_variance.
    """

    value: float
    cond_variance: float
    cond_mean: float


def sample_rounds(
    params: ChannelParams, noise: NoiseSpec, rng: np.random.Generator, count: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Draw count independent rounds; returns (alice, bob, eve, injected).

    Draw order is fixed (symbols, Bob detector, Eve detector, injected) so
    seeded runs are bit-reproducible.
    """
    a = rng.standard_normal(count)
    x1 = rng.standard_normal(count)
    x2 = rng.standard_normal(count)
    y = noise.draw(rng, count)
    b = params.bob_gain * a + y + params.bob_noise * x1 + params.bob_offset
    e = params.eve_gain * a + params.eve_noise * x2
    return a, b, e, y


def sample_round(
    params: ChannelParams, noise: NoiseSpec, rng: np.random.Generator
) -> RoundSample:
    a, b, e, y = sample_rounds(params, noise, rng, 1)
    return RoundSample(alice=a[0], bob=b[0], eve=e[0], injected=y[0])


def condense_eve_view(params: ChannelParams, eve: float, injected: float) -> EveReduced:
    """Collapse Eve's (observation, injected) pair into one scalar.

    The scalar is a sufficient statistic: given it, Bob's observation is
    Gaussian with the returned mean and variance regardless of the rest of
    Eve's view.
    """
    ae2 = params.eve_gain**2
    be2 = params.eve_noise**2
    value = (params.bob_gain * params.eve_gain / (ae2 + be2)) * eve + injected
    cond_var = params.bob_gain**2 * be2 / (ae2 + be2) + params.bob_noise**2
    return EveReduced(
        value=value, cond_variance=cond_var, cond_mean=value + params.bob_offset
    )


def squared_correlations(
    params: ChannelParams, injected_variance: float
) -> tuple[float, float, float]:
    """Squared correlations with Bob's observation.

    Returns (alice_sq, eve_condensed_sq, eve_informed_sq): Alice's symbol,
    Eve's condensed scalar, and the stronger variant where Eve is granted
    everything except the attenuated symbol. All lie in [0, 1].
    """
    if injected_variance < 0:
        raise ValueError("injected_variance must be nonnegative")
    ab2 = params.bob_gain**2
    ae2 = params.eve_gain**2
    be2 = params.eve_noise**2
    v_b = ab2 + injected_variance + params.bob_noise**2
    if v_b <= 0:
        raise ValueError("degenerate channel: Bob's variance is zero")
    rho_a = ab2 / v_b
    rho_cond = (ab2 * ae2 / (ae2 + be2) + injected_variance) / v_b
    rho_inf = (injected_variance + params.bob_noise**2) / v_b
    return rho_a, rho_cond, rho_inf


def advantage_condition(params: ChannelParams, injected_variance: float) -> bool:
    """True iff Alice-Bob correlation beats Eve's condensed view.

    Zero injected variance counts as an advantage whenever Bob's gain is
    nonzero (the ratio is taken as infinite).
    """
    if injected_variance < 0:
        raise ValueError("injected_variance must be nonnegative")
    ab2 = params.bob_gain**2
    if injected_variance == 0:
        return ab2 != 0
    return ab2 / injected_variance > params.eve_gain**2 / params.eve_noise**2 + 1


def combine_antennas(antennas) -> tuple[float, float]:
    """Reduce several Eve antennas to one effective (gain, noise) pair.

    Eve's best linear combination of k antennas is equivalent to a single
    observation. We normalize so that k identical antennas (g, s) give
    (g, s/sqrt(k)); for mixed antennas the gain is anchored to the weakest
    one, which is a convention (only the noise-to-gain ratio is canonical).
    """
    pairs = [(float(g), float(s)) for g, s in antennas]
    if not pairs:
        raise ValueError("need at least one antenna")
    if any(g <= 0 or s <= 0 for g, s in pairs):
        raise ValueError("gains and noise stdevs must be positive")
    k = len(pairs)
    ratio = math.sqrt(sum((s / g) ** 2 for g, s in pairs))
    gain = min(g for g, _ in pairs)
    return gain, gain * ratio / k


def split_complex_channel(
    bob_gain: float,
    bob_noise: float,
    eve_gain: float,
    eve_noise: float,
    bob_offset: float,
    theta_bob: float = 0.0,
    theta_eve: float = 0.0,
    theta_injected: float = 0.0,
    theta_bob_det: float = 0.0,
    theta_eve_det: float = 0.0,
    theta_offset: float = 0.0,
) -> tuple[ChannelParams, ChannelParams]:
    """Split a complex-envelope channel into two independent real channels.

    Phase rotations are absorbed by the circularly symmetric noise terms;
    only the offset phase relative to Bob's carrier survives, landing as a
    cosine/sine pair on the two real components. All magnitudes carry over
    unchanged.
    """
    if bob_noise <= 0 or eve_noise <= 0 or eve_gain <= 0:
        raise ValueError("noise stdevs and eve_gain must be positive")
    delta = theta_offset - theta_bob
    real = ChannelParams(
        bob_gain=bob_gain,
        bob_noise=bob_noise,
        bob_offset=bob_offset * math.cos(delta),
        eve_gain=eve_gain,
        eve_noise=eve_noise,
    )
    imag = ChannelParams(
        bob_gain=bob_gain,
        bob_noise=bob_noise,
        bob_offset=bob_offset * math.sin(delta),
        eve_gain=eve_gain,
        eve_noise=eve_noise,
    )
    return real, imag
