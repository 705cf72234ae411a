"""Independent Monte Carlo reference pricer for the full jump-diffusion SDE.

Euler discretization with step endpoints aligned to the coefficient-curve
breakpoints (piecewise-constant coefficients are then exact per step) and
exact compound-Poisson increments aggregated within each step, so only the
diffusion part carries Euler bias. Antithetic variates flip the Brownian
increments only; jump draws are shared within a pair and a pair counts as one
observation in the standard error.

Determinism: paths are split into fixed-size batches; batch k draws from a
Philox stream keyed (seed, k), so estimates are bit-identical for a given
(config, model, payoff) regardless of execution order or parallelism.

The per-step kernel is the compiled extension when available, else the numpy
fallback; both consume identical draw sequences (see the backend test and
benchmarks/bench_kernels.py).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _euler_py
from .analytic import DealTerms
from .errors import BudgetExceededError
from .model import CALL, DIGITAL, LOG_AA, ModelSpec, Payoff

try:
    from . import _euler
except ImportError:
    _euler = None

_BATCH = 1 << 16  # pairs (or paths) per keyed RNG stream; fixed for determinism
_MASK64 = (1 << 64) - 1


def available_backends() -> tuple[str, ...]:
    return ("compiled", "python") if _euler is not None else ("python",)


def _kernel(backend: str | None):
    if backend is None:
        backend = "compiled" if _euler is not None else "python"
    if backend == "compiled":
        if _euler is None:
            raise ValueError("compiled kernel is not available in this install")
        return _euler
    if backend == "python":
        return _euler_py
    raise ValueError(f"unknown backend {backend!r}")


@dataclass(frozen=True)
class McConfig:
    n_paths: int = 2_000_000
    n_steps_per_year: int = 250
    seed: int = 0
    antithetic: bool = True
    scheme: str = "euler"
    max_budget: float = 1e10  # cap on n_paths * n_steps

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if self.n_steps_per_year < 1:
            raise ValueError("n_steps_per_year must be >= 1")
        if self.scheme != "euler":
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.antithetic and self.n_paths % 2:
            raise ValueError("antithetic estimation needs an even path count")


@dataclass(frozen=True)
class McEstimate:
    price: float
    stderr: float
    n_paths_used: int  # independent observations (antithetic pairs count once)


def _step_schedule(model: ModelSpec, maturity: float, cfg: McConfig):
    """Step endpoints aligned to curve breakpoints; per-step coefficient arrays."""
    n_uniform = max(1, math.ceil(maturity * cfg.n_steps_per_year))
    cuts = {maturity * k / n_uniform for k in range(n_uniform + 1)}
    cuts.update(t for t in model.vol_times() if 0.0 < t < maturity)
    grid = np.array(sorted(cuts))
    dt = np.diff(grid)
    mids = grid[1:]  # right endpoint selects the step's piecewise value
    if model.variant == LOG_AA:
        variant = _euler_py.VARIANT_EXP
        x0 = model.x0(maturity)
        nu = np.array([model.localvol.nu.value(t) for t in mids])
        slope = np.array([model.localvol.beta.value(t) - 1.0 for t in mids])
        coef_a, coef_b = nu, slope
    else:
        variant = _euler_py.VARIANT_LINEAR
        x0 = model.x0(maturity)
        coef_a = np.array([model.localvol.sigma.value(t) for t in mids])
        coef_b = np.array([model.localvol.dsigma.value(t) for t in mids])
    drift_c = np.full(dt.shape, model.drift_const())
    return x0, variant, dt, np.sqrt(dt), coef_a, coef_b, drift_c


def step_count(model: ModelSpec, maturity: float, cfg: McConfig) -> int:
    """Number of Euler steps a simulation to `maturity` would take."""
    return _step_schedule(model, maturity, cfg)[2].shape[0]


def simulate_terminal(
    model: ModelSpec,
    maturity: float,
    cfg: McConfig,
    backend: str | None = None,
) -> np.ndarray:
    """Terminal-state sample, shape (2, n_pairs) antithetic else (1, n_paths)."""
    if maturity <= 0.0:
        raise ValueError("maturity must be > 0")
    x0, variant, dt, sqdt, coef_a, coef_b, drift_c = _step_schedule(model, maturity, cfg)
    if cfg.n_paths * dt.shape[0] > cfg.max_budget:
        raise BudgetExceededError(
            f"{cfg.n_paths} paths x {dt.shape[0]} steps exceeds budget {cfg.max_budget:g}"
        )
    kern = _kernel(backend)
    j = model.jumps
    rows = 2 if cfg.antithetic else 1
    n = cfg.n_paths // rows
    out = np.empty((rows, n))
    for batch, start in enumerate(range(0, n, _BATCH)):
        size = min(_BATCH, n - start)
        bg = np.random.Philox(key=np.array([cfg.seed & _MASK64, batch], dtype=np.uint64))
        out[:, start : start + size] = kern.euler_terminal(
            bg,
            x0,
            variant,
            dt,
            sqdt,
            coef_a,
            coef_b,
            drift_c,
            j.intensity,
            j.mean,
            j.vol,
            size,
            cfg.antithetic,
        )
    return out


def discounted_payoff(x: np.ndarray, deal: DealTerms) -> np.ndarray:
    """Vectorized h(x): discounted payoff of the terminal state."""
    k = deal.payoff.strike
    if deal.variant == LOG_AA:
        level = deal.carry * np.exp(x)
    else:
        level = x
    if deal.payoff.kind == CALL:
        pay = np.maximum(level - k, 0.0)
    elif deal.payoff.kind == DIGITAL:
        pay = (level > k).astype(float)
    else:
        pay = np.maximum(k - level, 0.0)
    return deal.discount * pay


def estimate_from_sample(sample: np.ndarray, deal: DealTerms) -> McEstimate:
    """Mean/stderr of the discounted payoff over a terminal sample.

    Antithetic pairs (rows) are averaged first and counted as one observation.
    """
    obs = discounted_payoff(sample, deal).mean(axis=0)
    n = obs.shape[0]
    stderr = float(obs.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return McEstimate(float(obs.mean()), stderr, n)


def mc_price(
    model: ModelSpec,
    payoff: Payoff,
    cfg: McConfig,
    backend: str | None = None,
) -> McEstimate:
    sample = simulate_terminal(model, payoff.maturity, cfg, backend=backend)
    return estimate_from_sample(sample, DealTerms.from_model(model, payoff))
