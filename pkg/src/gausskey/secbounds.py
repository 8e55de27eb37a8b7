"""Finite-block security bounds for sign-bit key distillation.

Everything here reduces to two integral functionals of a distribution P and
a conditional variance v: the entropy of the sign bit of a Gaussian centered
at a P-distributed point, and its Gallager-type exponent function. On top of
those sit the padded (estimation-aware) exponent, the convex exponent
minimizations giving leaked-information bounds, the sacrifice-length solver,
and the closed-form key-rate curve for the symmetric reference geometry.

All bounds are handled as log2 quantities throughout; nothing exponentiates
n-scaled exponents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, xlogy

from .estimation import (
    EmpiricalCdf,
    EstimateBundle,
    EveCdf,
    kolmogorov_quantile,
    ks_error_bound,
    two_sided_z,
)

__all__ = [
    "AnalyticGaussian",
    "PointMasses",
    "GaussianMixture",
    "SecurityCertificate",
    "VARIATIONAL_DISTANCE",
    "MODIFIED_MUTUAL_INFO",
    "sign_entropy",
    "sign_exponent",
    "certified_exponent",
    "build_certified_exponent",
    "reference_exponent_evaluator",
    "minimize_convex",
    "minimize_exponent",
    "sacrifice_length",
    "key_rate_symmetric",
    "mutual_info_ab",
]

_NODE_COUNT = 96  # Gauss-Hermite nodes per Gaussian component

_GH_X, _GH_W = np.polynomial.hermite.hermgauss(_NODE_COUNT)
_GH_X = _GH_X * math.sqrt(2.0)  # standard-normal abscissas
_GH_W = _GH_W / math.sqrt(math.pi)

VARIATIONAL_DISTANCE = "variational-distance"
MODIFIED_MUTUAL_INFO = "modified-mutual-info"


@dataclass(frozen=True)
class AnalyticGaussian:
    variance: float

    def __post_init__(self) -> None:
        if not (self.variance > 0):
            raise ValueError("variance must be positive")


@dataclass(frozen=True)
class PointMasses:
    points: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.points) == 0:
            raise ValueError("need at least one point")


@dataclass(frozen=True)
class GaussianMixture:
    """Equal-weight Gaussian kernels of common stdev on the given points."""

    points: tuple[float, ...]
    stdev: float

    def __post_init__(self) -> None:
        if len(self.points) == 0:
            raise ValueError("need at least one point")
        if not (self.stdev > 0):
            raise ValueError("stdev must be positive")


@dataclass(frozen=True)
class SecurityCertificate:
    criterion: str
    s_star: float
    log2_bound: float
    n: int
    m1: int
    padding: float = 0.0  # estimation-error term added inside the exponent
    shrunk_param: float = float("nan")  # conservative variance or covariance used
    confidence: float | None = None


def _probe(dist) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature points and weights integrating exactly against dist."""
    if isinstance(dist, AnalyticGaussian):
        return _GH_X * math.sqrt(dist.variance), _GH_W.copy()
    if isinstance(dist, PointMasses):
        pts = np.asarray(dist.points, dtype=float)
        return pts, np.full(pts.size, 1.0 / pts.size)
    if isinstance(dist, GaussianMixture):
        pts = np.asarray(dist.points, dtype=float)
        xs = (pts[:, None] + dist.stdev * _GH_X[None, :]).ravel()
        ws = np.tile(_GH_W / pts.size, pts.size)
        return xs, ws
    raise TypeError(f"unsupported distribution: {type(dist).__name__}")


def _binary_entropy(p: np.ndarray) -> np.ndarray:
    return -(xlogy(p, p) + xlogy(1.0 - p, 1.0 - p)) / math.log(2.0)


def _lq_mean(p: np.ndarray, ws: np.ndarray, q: float) -> float:
    """Weighted mean of the l_q norm of (p, 1-p), computed in a stable form.

    The norm is max * (1 + r^q)^(1/q) with r = min/max <= 1; r^q underflows
    to zero harmlessly for large q, which is exactly the q -> inf limit.
    """
    hi = np.maximum(p, 1.0 - p)
    lo = np.minimum(p, 1.0 - p)
    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        ratio_q = np.exp(q * np.log(np.where(lo > 0, lo / hi, 1.0)))
    ratio_q = np.where(lo > 0, ratio_q, 0.0)
    vals = hi * np.exp(np.log1p(ratio_q) / q)
    return float(np.dot(ws, vals))


def sign_entropy(dist, v: float) -> float:
    """Entropy (bits) of the sign of a N(x, v) draw with x distributed as dist."""
    if not (v > 0):
        raise ValueError("conditional variance must be positive")
    xs, ws = _probe(dist)
    p = ndtr(xs / math.sqrt(v))
    return float(np.dot(ws, _binary_entropy(p)))


def sign_exponent(dist, v: float, t: float) -> float:
    """Exponent functional of the sign channel; nonpositive, zero at t = 0."""
    if not (v > 0):
        raise ValueError("conditional variance must be positive")
    if not (0.0 <= t < 1.0):
        raise ValueError("t must lie in [0, 1)")
    if t == 0.0:
        return 0.0
    xs, ws = _probe(dist)
    p = ndtr(xs / math.sqrt(v))
    return math.log2(_lq_mean(p, ws, 1.0 / (1.0 - t)))


class ExponentWithPadding:
    """Padded exponent evaluator with the sign-probability vector precomputed.

    The integrand's base probabilities do not depend on t, so one evaluator
    reused across a minimization or a sacrifice search only pays for the
    power operations per call. Calls are memoized by t.
    """

    def __init__(self, dist, v: float, padding: float):
        if not (v > 0):
            raise ValueError("conditional variance must be positive")
        if padding < 0:
            raise ValueError("padding must be nonnegative")
        xs, ws = _probe(dist)
        self._p = ndtr(xs / math.sqrt(v))
        self._ws = ws
        self.v = float(v)
        self.padding = float(padding)
        self._cache: dict[float, float] = {}

    def raw(self, t: float) -> float:
        """Exponent without the padding term."""
        if t == 0.0:
            return 0.0
        return math.log2(_lq_mean(self._p, self._ws, 1.0 / (1.0 - t)))

    def __call__(self, t: float) -> float:
        if not (0.0 <= t < 1.0):
            raise ValueError("t must lie in [0, 1)")
        got = self._cache.get(t)
        if got is not None:
            return got
        if t == 0.0:
            val = 0.0
        else:
            base = _lq_mean(self._p, self._ws, 1.0 / (1.0 - t))
            val = math.log2(base + 2.0 * (1.0 - 2.0**-t) * self.padding)
        self._cache[t] = val
        return val


def build_certified_exponent(
    bundle: EstimateBundle, eve: EveCdf, params, epsilon: float
) -> ExponentWithPadding:
    """Padded exponent from live estimates, conservative against estimation error.

    The covariance estimate is shrunk by its confidence radius before it
    enters the conditional variance (smaller variance never understates the
    exponent), and the CDF estimation error bound is added inside the
    exponential.
    """
    if not bundle.complete:
        raise ValueError("bundle has no residuals")
    uc = bundle.underline_c(epsilon)
    if uc <= 0:
        raise ValueError("insufficient correlation for certification")
    pad = ks_error_bound(bundle, epsilon)
    if eve.smoothed:
        g2 = params.eve_gain**2
        s2 = params.eve_noise**2
        v = uc * uc * s2 / (g2 + s2) + params.bob_noise**2
        dist = GaussianMixture(points=bundle.residuals, stdev=eve.smoothing_stdev)
    else:
        v = uc * uc
        dist = PointMasses(points=bundle.residuals)
    return ExponentWithPadding(dist, v, pad)


def certified_exponent(
    bundle: EstimateBundle, eve: EveCdf, params, epsilon: float, t: float
) -> float:
    return build_certified_exponent(bundle, eve, params, epsilon)(t)


def reference_exponent_evaluator(
    params, injected_variance: float, l: int, epsilon: float
) -> ExponentWithPadding:
    """Padded exponent with estimates replaced by their Gaussian expectations.

    Reproduces the reference bound curves without simulation: the covariance
    estimate becomes the true gain, the product second moment its closed
    form, and the residual distribution its Gaussian limit.
    """
    c = params.bob_gain
    if c <= 0:
        raise ValueError("reference evaluator needs a positive gain")
    v_b = c * c + injected_variance + params.bob_noise**2
    v_ab = 2.0 * c * c + v_b
    uc = c - math.sqrt(v_ab) * two_sided_z(epsilon) / math.sqrt(l)
    if uc <= 0:
        raise ValueError("insufficient correlation for certification")
    pad = math.sqrt(v_ab) * two_sided_z(epsilon) / (
        math.sqrt(2.0 * math.pi * math.e) * c * math.sqrt(l)
    ) + kolmogorov_quantile(1.0 - epsilon) / math.sqrt(l)
    g2 = params.eve_gain**2
    s2 = params.eve_noise**2
    residual_var = injected_variance + params.bob_noise**2
    excess = c * c * g2 / (g2 + s2) - params.bob_noise**2
    if excess > 0:
        v = uc * uc * s2 / (g2 + s2) + params.bob_noise**2
        dist = AnalyticGaussian(residual_var + excess)
    else:
        v = uc * uc
        dist = AnalyticGaussian(residual_var)
    return ExponentWithPadding(dist, v, pad)


def _golden_section(f, lo: float, hi: float, tol: float) -> tuple[float, float]:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def minimize_convex(
    f,
    lo: float,
    hi: float,
    step: float = 1e-6,
    tol: float = 1e-6,
    noise_floor: float = 1e-12,
) -> tuple[float, float]:
    """Scalar convex minimization: bisect on the central-difference slope.

    Falls back to golden section when the difference drops below the noise
    floor (flat stretches near t = 0 of padded exponents). Endpoints are
    compared explicitly since the minimum may sit on the boundary.
    """
    if not (hi > lo):
        raise ValueError("empty interval")
    a, b = lo, hi
    while b - a > tol:
        mid = 0.5 * (a + b)
        h = min(step, 0.25 * (b - a))
        diff = f(min(mid + h, hi)) - f(max(mid - h, lo))
        if not math.isfinite(diff):
            raise ValueError("non-finite objective value")
        if abs(diff) < noise_floor:
            x, fx = _golden_section(f, a, b, tol)
            break
        if diff > 0:
            b = mid
        else:
            a = mid
    else:
        x = 0.5 * (a + b)
        fx = f(x)
    for cand in (lo, hi):
        fc = f(cand)
        if fc < fx:
            x, fx = cand, fc
    return x, fx


def minimize_exponent(
    phi_fn,
    n: int,
    m1: int,
    criterion: str,
    padding: float = 0.0,
    shrunk_param: float = float("nan"),
    confidence: float | None = None,
) -> SecurityCertificate:
    """Minimize the leaked-information exponent over its order parameter.

    variational-distance: min over [0, 1/2] of t(n - m1) + n phi(t), bound
    log2(3) plus the minimum. modified-mutual-info: the same affine family
    minus log2(s), searched over (0, 1) clipped away from the endpoints
    where 1/s blows up.
    """
    if not (0 <= m1 <= n):
        raise ValueError("need 0 <= m1 <= n")

    def checked_phi(t: float) -> float:
        val = phi_fn(t)
        if not math.isfinite(val):
            raise ValueError(f"non-finite exponent value at t={t}")
        return val

    if criterion == VARIATIONAL_DISTANCE:
        obj = lambda t: t * (n - m1) + n * checked_phi(t)
        s_star, val = minimize_convex(obj, 0.0, 0.5)
        bound = math.log2(3.0) + val
    elif criterion == MODIFIED_MUTUAL_INFO:
        obj = lambda s: s * (n - m1) + n * checked_phi(s) - math.log2(s)
        s_star, bound = minimize_convex(obj, 1e-4, 1.0 - 1e-4)
    else:
        raise ValueError(f"unknown criterion: {criterion!r}")
    return SecurityCertificate(
        criterion=criterion,
        s_star=s_star,
        log2_bound=bound,
        n=n,
        m1=m1,
        padding=padding,
        shrunk_param=shrunk_param,
        confidence=confidence,
    )


def _bound_at(phi_fn, n: int, m1: int) -> float:
    return minimize_exponent(phi_fn, n, m1, VARIATIONAL_DISTANCE).log2_bound


def sacrifice_length(phi_fn, n: int, target_log2: float) -> int:
    """Minimal sacrifice count whose distance bound meets the target.

    The bound is monotone nonincreasing in m1, so a binary search settles
    the answer; a quasiconcave transform of the constraint supplies a tight
    initial bracket so only a few full minimizations run.
    """
    if _bound_at(phi_fn, n, 0) <= target_log2:
        return 0
    if _bound_at(phi_fn, n, n) > target_log2:
        raise ValueError("target unachievable even when sacrificing every bit")

    # m1 >= n - (target' - n phi(t))/t for some t; maximize the right margin.
    target_prime = target_log2 - math.log2(3.0)

    def margin(t: float) -> float:
        return (target_prime - n * phi_fn(t)) / t

    t_star, neg = _golden_section(lambda t: -margin(t), 1e-9, 0.5, 1e-9)
    guess = max(0, min(n, math.ceil(n + neg)))  # neg = -max margin

    lo, hi = 0, n
    if _bound_at(phi_fn, n, min(n, guess + 4)) <= target_log2:
        hi = min(n, guess + 4)
    if guess >= 4 and _bound_at(phi_fn, n, guess - 4) > target_log2:
        lo = guess - 4
    while hi - lo > 0:
        mid = (lo + hi) // 2
        if _bound_at(phi_fn, n, mid) <= target_log2:
            hi = mid
        else:
            lo = mid + 1
    return hi


def key_rate_symmetric(x: float) -> tuple[float, float, float]:
    """Key rate at the symmetric reference geometry.

    x is the injected-to-detector variance ratio. Bob's gain is sqrt(2)
    detector units and Eve matches it; both mutual informations then close
    over a single standard Gaussian integral each.
    """
    if x < 0:
        raise ValueError("variance ratio must be nonnegative")
    std = AnalyticGaussian(1.0)
    mi_ab = 1.0 - sign_entropy(std, (1.0 + x) / 2.0)
    mi_eb = 1.0 - sign_entropy(std, 5.0 / (4.0 + 3.0 * x))
    return mi_ab - mi_eb, mi_ab, mi_eb


def mutual_info_ab(bundle: EstimateBundle, residual_cdf: EmpiricalCdf) -> float:
    """Capacity of the sign-bit channel from Bob back to Alice's symbol.

    Computed directly from the estimated residual CDF: condition on the
    symbol, read off the sign-flip probability, and integrate the binary
    entropies against the standard Gaussian symbol distribution. Used as
    the ceiling for the error-correcting code rate.
    """
    if bundle.c_hat == 0:
        raise ValueError("no correlation signal: covariance estimate is zero")
    if bundle.v_hat <= bundle.c_hat**2:
        raise ValueError("degenerate estimates: observed variance within explained part")
    # Pr[bit 0 | symbol a] = Pr[residual >= -c*a], left limit at atoms
    thresholds = -bundle.c_hat * _GH_X
    p_zero = 1.0 - np.asarray(residual_cdf.eval_left(thresholds), dtype=float)
    marginal = float(np.dot(_GH_W, p_zero))
    cond = float(np.dot(_GH_W, _binary_entropy(p_zero)))
    info = float(_binary_entropy(np.array(marginal))) - cond
    return min(1.0, max(0.0, info))
