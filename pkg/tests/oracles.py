"""Independent high-precision oracles used by the tests.

`mp_mixture_price` reimplements the Poisson-mixture expectation with mpmath so
central finite differences at the pinned 1e-4*sqrt(var) step are free of
float64 roundoff; it never shares code with the production path.
"""

from __future__ import annotations

import mpmath as mp

mp.mp.dps = 50


def _norm_cdf(x):
    return 0.5 * mp.erfc(-x / mp.sqrt(2))


def _norm_pdf(x):
    return mp.exp(-x * x / 2) / mp.sqrt(2 * mp.pi)


def mp_bucket_expectation(kind, variant, mean, var, discount, carry, strike):
    mean, var = mp.mpf(mean), mp.mpf(var)
    discount, carry, strike = mp.mpf(discount), mp.mpf(carry), mp.mpf(strike)
    sq = mp.sqrt(var)
    if variant == "log_aa":
        d2 = (mean + mp.log(carry / strike)) / sq
        d1 = d2 + sq
        if kind == "digital":
            return discount * _norm_cdf(d2)
        growth = discount * carry * mp.exp(mean + var / 2)
        if kind == "call":
            return growth * _norm_cdf(d1) - discount * strike * _norm_cdf(d2)
        return discount * strike * _norm_cdf(-d2) - growth * _norm_cdf(-d1)
    z = (mean - strike) / sq
    if kind == "digital":
        return discount * _norm_cdf(z)
    if kind == "call":
        return discount * ((mean - strike) * _norm_cdf(z) + sq * _norm_pdf(z))
    return discount * ((strike - mean) * _norm_cdf(-z) + sq * _norm_pdf(z))


def mp_term_count(lam_t, tail=mp.mpf("1e-30"), cap=400) -> int:
    """Series length with Poisson tail mass below `tail` (fixed across FD stencils)."""
    lam_t = mp.mpf(lam_t)
    w = mp.exp(-lam_t)
    cum = w
    n = 0
    while 1 - cum > tail and n < cap:
        n += 1
        w *= lam_t / n
        cum += w
    return n + 1


def mp_mixture_price(
    kind,
    variant,
    base_mean,
    base_var,
    lam,
    eta,
    gamma,
    horizon,
    discount,
    carry,
    strike,
    shift=0,
    n_terms=None,
):
    lam_t = mp.mpf(lam) * mp.mpf(horizon)
    if n_terms is None:
        n_terms = mp_term_count(lam_t)
    w = mp.exp(-lam_t)
    total = mp.mpf(0)
    for n in range(n_terms):
        if w != 0:
            total += w * mp_bucket_expectation(
                kind,
                variant,
                mp.mpf(base_mean) + (n + shift) * mp.mpf(eta),
                mp.mpf(base_var) + (n + shift) * mp.mpf(gamma) ** 2,
                discount,
                carry,
                strike,
            )
        w *= lam_t / (n + 1)
    return total


def mp_fd_greek(order, price_of_mean_shift, h):
    """Central finite difference of the given order at step h (callable takes the shift)."""
    h = mp.mpf(h)
    f = price_of_mean_shift
    if order == 1:
        return (f(h) - f(-h)) / (2 * h)
    if order == 2:
        return (f(h) - 2 * f(0) + f(-h)) / (h * h)
    if order == 3:
        return (f(2 * h) - 2 * f(h) + 2 * f(-h) - f(-2 * h)) / (2 * h**3)
    raise ValueError(order)
