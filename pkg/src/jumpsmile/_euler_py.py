"""Pure-numpy Euler kernel; fallback when the compiled extension is absent.

The per-step draw order is fixed and matches the compiled kernel draw for
draw: one standard normal per path for the diffusion; with jumps on, one
uniform per path inverted against precomputed Poisson thresholds for the step
count, then one standard normal per *jumping* path (ascending index) for the
aggregated jump size. Both backends therefore produce the same paths up to
floating-point ulps from vectorized libm calls.
"""

from __future__ import annotations

import math

import numpy as np

VARIANT_EXP = 0  # sigma(x) = a * exp(b * x), drift c - sigma^2/2
VARIANT_LINEAR = 1  # sigma(x) = max(a + b * (x - x0), 0), drift c

COMPILED = False

_TAIL = 1e-18
_MAX_COUNT = 63


def poisson_thresholds(lam_dt: float) -> np.ndarray:
    """Cumulative Poisson probabilities c_0..c_m with tail below 1e-18.

    A uniform u maps to the count #(c_k <= u); tail mass past the cap is
    folded into count m+1.
    """
    w = math.exp(-lam_dt)
    cum = [w]
    k = 0
    while 1.0 - cum[-1] >= _TAIL and k < _MAX_COUNT:
        k += 1
        w *= lam_dt / k
        cum.append(cum[-1] + w)
    return np.array(cum)


def euler_terminal(
    bit_generator,
    x0: float,
    variant: int,
    dt: np.ndarray,
    sqdt: np.ndarray,
    coef_a: np.ndarray,
    coef_b: np.ndarray,
    drift_c: np.ndarray,
    lam: float,
    eta: float,
    gamma: float,
    n: int,
    antithetic: bool,
) -> np.ndarray:
    """Terminal values after Euler steps; shape (2, n) antithetic else (1, n).

    Antithetic members share jump draws and flip only the Brownian increment.
    """
    gen = np.random.Generator(bit_generator)
    rows = 2 if antithetic else 1
    x = np.full((rows, n), x0)
    jump = None
    thresholds = [poisson_thresholds(lam * dt[k]) for k in range(dt.shape[0])] if lam > 0.0 else None
    for k in range(dt.shape[0]):
        z = gen.standard_normal(n)
        if lam > 0.0:
            u = gen.random(n)
            cnt = np.searchsorted(thresholds[k], u, side="right")
            jump = np.zeros(n)
            idx = np.flatnonzero(cnt)
            if idx.size:
                zj = gen.standard_normal(idx.size)
                nc = cnt[idx].astype(float)
                jump[idx] = eta * nc + gamma * np.sqrt(nc) * zj
        for row in range(rows):
            xr = x[row]
            if variant == VARIANT_EXP:
                sig = coef_a[k] * np.exp(coef_b[k] * xr)
                mu = drift_c[k] - 0.5 * sig * sig
            else:
                sig = np.maximum(coef_a[k] + coef_b[k] * (xr - x0), 0.0)
                mu = drift_c[k]
            zr = z if row == 0 else -z
            xr = xr + sig * sqdt[k] * zr + mu * dt[k]
            if lam > 0.0:
                xr = xr + jump
            x[row] = xr
    return x
