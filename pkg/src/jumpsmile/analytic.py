"""Closed-form building blocks on the frozen-coefficient proxy.

With sigma and mu frozen at the proxy point, the terminal state conditional on
n jumps is Gaussian:

    X_T | {N_T = n}  ~  N(base_mean + n*mean,  base_var + n*vol^2),

so prices are Poisson mixtures of single-bucket Gaussian expectations (the
classic jump-diffusion series), and the spatial Greeks

    G_i = d^i/dx^i E[h(X + x)] | x=0,   i = 0..3,

are mixtures of closed-form derivatives of the bucket expectations in the
mean. Everything here is scalar math on purpose: single-price latency matters
more than array throughput on this path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import (
    DegenerateVarianceError,
    ImpliedVolError,
    UnsupportedOrderError,
)
from .model import CALL, DIGITAL, LOG_AA, JumpParams, ModelSpec, Payoff

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# Poisson series truncation: stop once cumulative mass >= 1 - MASS_TOL and the
# current term is below TERM_TOL of the running (absolute) sum; hard cap 200.
_MASS_TOL = 1e-12
_TERM_TOL = 1e-13
_MAX_TERMS = 200


def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / _SQRT2)


def norm_pdf(x: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


@dataclass(frozen=True)
class ProxyLaw:
    """Mixture law of the frozen-coefficient proxy at the horizon.

    base_mean = x0 + integral(mu), base_var = integral(sigma^2); bucket n adds
    n*mean to the mean and n*vol^2 to the variance.
    """

    base_mean: float
    base_var: float
    jumps: JumpParams
    horizon: float

    def __post_init__(self):
        if self.base_var < 0.0:
            raise DegenerateVarianceError("base variance must be >= 0")
        if self.horizon < 0.0:
            raise ValueError("horizon must be >= 0")


@dataclass(frozen=True)
class DealTerms:
    """Discounting and payoff data needed to evaluate E[h(.)].

    For the log variant h(x) = discount * payoff(carry * e^x); for the normal
    variant h(x) = discount * payoff(x) and carry is unused (kept at 1).
    """

    discount: float
    carry: float
    payoff: Payoff
    variant: str

    @classmethod
    def from_model(cls, model: ModelSpec, payoff: Payoff) -> "DealTerms":
        T = payoff.maturity
        carry = model.env.growth(T) if model.variant == LOG_AA else 1.0
        return cls(model.env.discount(T), carry, payoff, model.variant)


def _bucket_log(kind: str, mean: float, var: float, deal: DealTerms):
    """Orders 0..3 of m -> E[h(G + m - mean)], G ~ N(mean, var), log variant."""
    k = deal.payoff.strike
    sq = math.sqrt(var)
    d2 = (mean + math.log(deal.carry / k)) / sq
    d1 = d2 + sq
    disc = deal.discount
    if kind == DIGITAL:
        n2 = norm_cdf(d2)
        p2 = norm_pdf(d2)
        return (
            disc * n2,
            disc * p2 / sq,
            -disc * d2 * p2 / var,
            disc * (d2 * d2 - 1.0) * p2 / (var * sq),
        )
    ee = disc * deal.carry * math.exp(mean + 0.5 * var)
    bb = disc * k
    p1 = norm_pdf(d1)
    if kind == CALL:
        n1 = norm_cdf(d1)
        g0 = ee * n1 - bb * norm_cdf(d2)
        g1 = ee * n1
        g2 = g1 + ee * p1 / sq
        g3 = g1 + ee * (2.0 / sq - d1 / var) * p1
        return g0, g1, g2, g3
    # put
    n1m = norm_cdf(-d1)
    g0 = bb * norm_cdf(-d2) - ee * n1m
    g1 = -ee * n1m
    g2 = g1 + ee * p1 / sq
    g3 = g1 + ee * (2.0 / sq - d1 / var) * p1
    return g0, g1, g2, g3


def _bucket_normal(kind: str, mean: float, var: float, deal: DealTerms):
    """Orders 0..3 of the bucket expectation, normal (Bachelier) variant."""
    k = deal.payoff.strike
    sq = math.sqrt(var)
    z = (mean - k) / sq
    disc = deal.discount
    pz = norm_pdf(z)
    if kind == DIGITAL:
        return (
            disc * norm_cdf(z),
            disc * pz / sq,
            -disc * z * pz / var,
            disc * (z * z - 1.0) * pz / (var * sq),
        )
    if kind == CALL:
        return (
            disc * ((mean - k) * norm_cdf(z) + sq * pz),
            disc * norm_cdf(z),
            disc * pz / sq,
            -disc * z * pz / var,
        )
    # put
    return (
        disc * ((k - mean) * norm_cdf(-z) + sq * pz),
        -disc * norm_cdf(-z),
        disc * pz / sq,
        -disc * z * pz / var,
    )


def _bucket(mean: float, var: float, deal: DealTerms):
    if deal.variant == LOG_AA:
        return _bucket_log(deal.payoff.kind, mean, var, deal)
    return _bucket_normal(deal.payoff.kind, mean, var, deal)


def gaussian_payoff_derivative(
    order: int, mean: float, var: float, deal: DealTerms
) -> float:
    """i-th derivative at x=0 of x -> E[h(G + x)] with G ~ N(mean, var)."""
    if order not in (0, 1, 2, 3):
        raise UnsupportedOrderError(f"order must be in 0..3, got {order}")
    if var <= 0.0:
        raise DegenerateVarianceError("bucket variance must be > 0")
    return _bucket(mean, var, deal)[order]


def _mixture(law: ProxyLaw, deal: DealTerms, order: int, shift: int, terms):
    """Poisson-weighted sum of bucket derivatives; `shift` adds one jump copy."""
    if law.base_var <= 0.0:
        raise DegenerateVarianceError("proxy law has zero diffusion variance")
    j = law.jumps
    lam_t = j.intensity * law.horizon
    gvar = j.vol * j.vol
    weight = math.exp(-lam_t)
    cum = weight
    total = 0.0
    abs_total = 0.0
    n = 0
    while True:
        if weight > 0.0:
            term = weight * _bucket(
                law.base_mean + (n + shift) * j.mean,
                law.base_var + (n + shift) * gvar,
                deal,
            )[order]
        else:
            term = 0.0
        total += term
        abs_total += abs(term)
        if terms is not None:
            if n + 1 >= terms:
                return total
        elif (
            cum >= 1.0 - _MASS_TOL and abs(term) <= _TERM_TOL * abs_total
        ) or n >= _MAX_TERMS:
            return total
        n += 1
        weight *= lam_t / n
        cum += weight


def merton_price(law: ProxyLaw, deal: DealTerms, *, terms: int | None = None) -> float:
    """Poisson-mixture price E[h(X_T)] under the frozen-coefficient proxy.

    `terms` forces a fixed series length (testing hook); by default the series
    stops by the cumulative-mass / relative-term rule.
    """
    return _mixture(law, deal, 0, 0, terms)


def merton_greek(
    order: int,
    law: ProxyLaw,
    deal: DealTerms,
    shifted_by_jump_copy: bool = False,
    *,
    terms: int | None = None,
) -> float:
    """Mixture spatial Greek of order 1..3.

    With `shifted_by_jump_copy` the law gains one independent jump-size copy:
    every bucket mean shifts by the jump mean and variance by its square vol.
    """
    if order not in (1, 2, 3):
        raise UnsupportedOrderError(f"greek order must be in 1..3, got {order}")
    return _mixture(law, deal, order, 1 if shifted_by_jump_copy else 0, terms)


def mixture_price_and_greeks(law: ProxyLaw, deal: DealTerms):
    """(price, (g1, g2, g3), (g1', g2', g3')) in one pass over the series.

    The primed Greeks carry the extra jump copy. Shares Poisson weights and
    bucket evaluations; the truncation rule is applied to the price terms.
    """
    if law.base_var <= 0.0:
        raise DegenerateVarianceError("proxy law has zero diffusion variance")
    j = law.jumps
    lam_t = j.intensity * law.horizon
    gvar = j.vol * j.vol
    weight = math.exp(-lam_t)
    cum = weight
    acc = [0.0] * 7
    abs_price = 0.0
    n = 0
    while True:
        if weight > 0.0:
            g = _bucket(law.base_mean + n * j.mean, law.base_var + n * gvar, deal)
            h = _bucket(
                law.base_mean + (n + 1) * j.mean,
                law.base_var + (n + 1) * gvar,
                deal,
            )
            term0 = weight * g[0]
            acc[0] += term0
            acc[1] += weight * g[1]
            acc[2] += weight * g[2]
            acc[3] += weight * g[3]
            acc[4] += weight * h[1]
            acc[5] += weight * h[2]
            acc[6] += weight * h[3]
            abs_price += abs(term0)
        else:
            term0 = 0.0
        if (
            cum >= 1.0 - _MASS_TOL and abs(term0) <= _TERM_TOL * abs_price
        ) or n >= _MAX_TERMS:
            return acc[0], (acc[1], acc[2], acc[3]), (acc[4], acc[5], acc[6])
        n += 1
        weight *= lam_t / n
        cum += weight


# --- implied volatility ------------------------------------------------------

_VOL_LO = 1e-6
_VOL_HI = 5.0
_MAX_NEWTON = 100


def _bs_forward_price(kind: str, fwd: float, k: float, vol: float, t: float) -> float:
    sq = vol * math.sqrt(t)
    d1 = math.log(fwd / k) / sq + 0.5 * sq
    d2 = d1 - sq
    if kind == CALL:
        return fwd * norm_cdf(d1) - k * norm_cdf(d2)
    return k * norm_cdf(-d2) - fwd * norm_cdf(-d1)


def _bs_forward_vega(fwd: float, k: float, vol: float, t: float) -> float:
    sq = vol * math.sqrt(t)
    d1 = math.log(fwd / k) / sq + 0.5 * sq
    return fwd * norm_pdf(d1) * math.sqrt(t)


def _bachelier_forward_price(kind: str, fwd: float, k: float, vol: float, t: float) -> float:
    sq = vol * math.sqrt(t)
    z = (fwd - k) / sq
    if kind == CALL:
        return (fwd - k) * norm_cdf(z) + sq * norm_pdf(z)
    return (k - fwd) * norm_cdf(-z) + sq * norm_pdf(z)


def _bachelier_forward_vega(fwd: float, k: float, vol: float, t: float) -> float:
    z = (fwd - k) / (vol * math.sqrt(t))
    return norm_pdf(z) * math.sqrt(t)


def _corrado_miller_guess(fwd: float, k: float, call_fw: float, t: float) -> float:
    half = 0.5 * (fwd - k)
    arg = (call_fw - half) ** 2 - (fwd - k) ** 2 / math.pi
    root = math.sqrt(arg) if arg > 0.0 else 0.0
    total = math.sqrt(2.0 * math.pi) / (fwd + k) * (call_fw - half + root)
    return total / math.sqrt(t) if total > 0.0 else 0.2


def implied_vol(price: float, deal: DealTerms, forward: float) -> float:
    """Volatility reproducing `price`: Black-Scholes (log) or Bachelier (normal).

    Safeguarded Newton with a bisection fallback on the bracket
    [1e-6, 5.0] (scaled by max(|F|, K) for the normal variant). Raises
    ImpliedVolError, with the achievable band attached, when the price is
    outside the no-arbitrage band or past the bracket.
    """
    kind = deal.payoff.kind
    if kind == DIGITAL:
        raise UnsupportedOrderError("implied vol is only defined here for call/put")
    k = deal.payoff.strike
    t = deal.payoff.maturity
    disc = deal.discount
    if t <= 0.0:
        raise ImpliedVolError("maturity must be > 0", 0.0, 0.0)

    if deal.variant == LOG_AA:
        pricer, vega_fn = _bs_forward_price, _bs_forward_vega
        lo, hi = _VOL_LO, _VOL_HI
    else:
        pricer, vega_fn = _bachelier_forward_price, _bachelier_forward_vega
        scale = max(abs(forward), k)
        lo, hi = _VOL_LO * scale, _VOL_HI * scale

    target = price / disc
    intrinsic = max(forward - k, 0.0) if kind == CALL else max(k - forward, 0.0)
    f_lo = pricer(kind, forward, k, lo, t) - target
    f_hi = pricer(kind, forward, k, hi, t) - target
    if target <= intrinsic or f_lo > 0.0 or f_hi < 0.0:
        band_lo = disc * max(intrinsic, pricer(kind, forward, k, lo, t))
        band_hi = disc * pricer(kind, forward, k, hi, t)
        raise ImpliedVolError("price not attainable on the vol bracket", band_lo, band_hi)

    if deal.variant == LOG_AA:
        call_fw = target if kind == CALL else target + forward - k
        v = _corrado_miller_guess(forward, k, call_fw, t)
    else:
        v = max(target - 0.5 * intrinsic, 1e-12) * math.sqrt(2.0 * math.pi / t)
    v = min(max(v, lo), hi)

    for _ in range(_MAX_NEWTON):
        diff = pricer(kind, forward, k, v, t) - target
        vega = vega_fn(forward, k, v, t)
        if abs(diff) <= 1e-12 * max(1e-8, vega):
            return v
        if diff > 0.0:
            hi = v
        else:
            lo = v
        if vega > 1e-300:
            v_new = v - diff / vega
        else:
            v_new = 0.5 * (lo + hi)
        if not (lo < v_new < hi):
            v_new = 0.5 * (lo + hi)
        if hi - lo <= 1e-15 * max(1.0, hi):
            return v_new
        v = v_new
    raise ImpliedVolError(
        "implied vol iteration did not converge", disc * intrinsic, disc * target
    )
