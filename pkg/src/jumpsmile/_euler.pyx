# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Euler kernel: fused per-step state update with in-kernel RNG.

Consumes the BitGenerator stream in the same order as the numpy fallback
(diffusion normals, count uniforms, then one size normal per jumping path),
so both backends agree path for path up to libm ulps.
"""

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport exp, sqrt
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (
    random_standard_normal,
    random_standard_normal_fill,
    random_standard_uniform_fill,
)

cnp.import_array()

COMPILED = True

VARIANT_EXP = 0
VARIANT_LINEAR = 1

DEF MAX_COUNT = 63
DEF TAIL = 1e-18


def euler_terminal(
    bit_generator,
    double x0,
    int variant,
    double[::1] dt,
    double[::1] sqdt,
    double[::1] coef_a,
    double[::1] coef_b,
    double[::1] drift_c,
    double lam,
    double eta,
    double gamma,
    Py_ssize_t n,
    bint antithetic,
):
    """Terminal values after Euler steps; shape (2, n) antithetic else (1, n)."""
    cdef Py_ssize_t n_steps = dt.shape[0]
    cdef Py_ssize_t rows = 2 if antithetic else 1
    out = np.full((rows, n), x0, dtype=np.float64)
    z_buf = np.empty(n, dtype=np.float64)
    u_buf = np.empty(n, dtype=np.float64)

    cdef double[:, ::1] x = out
    cdef double[::1] z = z_buf
    cdef double[::1] u = u_buf
    cdef bitgen_t *rng = <bitgen_t *> PyCapsule_GetPointer(
        bit_generator.capsule, "BitGenerator"
    )

    cdef double cum[MAX_COUNT + 1]
    cdef Py_ssize_t k, i, m, cnt
    cdef double a, b, c, step, sqstep, w
    cdef double sig, mu, jump, xi, nc
    cdef bint with_jumps = lam > 0.0

    with bit_generator.lock, nogil:
        for k in range(n_steps):
            step = dt[k]
            sqstep = sqdt[k]
            a = coef_a[k]
            b = coef_b[k]
            c = drift_c[k]
            random_standard_normal_fill(rng, n, &z[0])
            if with_jumps:
                # cumulative Poisson thresholds for this step's lam*dt
                w = exp(-lam * step)
                cum[0] = w
                m = 0
                while 1.0 - cum[m] >= TAIL and m < MAX_COUNT:
                    m += 1
                    w *= lam * step / m
                    cum[m] = cum[m - 1] + w
                random_standard_uniform_fill(rng, n, &u[0])
            for i in range(n):
                if with_jumps:
                    cnt = 0
                    while cnt <= m and u[i] >= cum[cnt]:
                        cnt += 1
                    if cnt > 0:
                        nc = <double> cnt
                        jump = eta * nc + gamma * sqrt(nc) * random_standard_normal(rng)
                    else:
                        jump = 0.0
                else:
                    jump = 0.0
                xi = x[0, i]
                if variant == 0:
                    sig = a * exp(b * xi)
                    mu = c - 0.5 * sig * sig
                else:
                    sig = a + b * (xi - x0)
                    if sig < 0.0:
                        sig = 0.0
                    mu = c
                x[0, i] = xi + sig * sqstep * z[i] + mu * step + jump
                if antithetic:
                    xi = x[1, i]
                    if variant == 0:
                        sig = a * exp(b * xi)
                        mu = c - 0.5 * sig * sig
                    else:
                        sig = a + b * (xi - x0)
                        if sig < 0.0:
                            sig = 0.0
                        mu = c
                    x[1, i] = xi + sig * sqstep * (-z[i]) + mu * step + jump
    return out
