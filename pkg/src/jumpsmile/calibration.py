"""Surface calibration: box-constrained Levenberg-Marquardt plus a sequential
per-maturity bootstrap.

The bootstrap walks the quoted maturities in order. For bucket i it fits the
local-vol pair (nu_i, beta_i) so the model implied vols match the quotes at
T_i, extending the coefficient recursion state from T_{i-1}; earlier buckets
are never revisited, which is what makes one full pass cheap. Jump parameters
(intensity, mean size, size vol) sit in an outer least-squares loop whose
objective is the full-surface residual after a complete inner bootstrap,
warm-started from the previous outer iterate's curves.

Calibration is defined for the log-asset variant (CEV-style local vol);
residuals are implied-vol differences, reported in basis points.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .analytic import DealTerms, ProxyLaw, implied_vol, mixture_price_and_greeks
from .errors import CalibrationError, EngineError
from .expansion import ExpansionState
from .model import (
    CALL,
    LOG_AA,
    CevLocalVol,
    JumpParams,
    MarketEnv,
    ModelSpec,
    Payoff,
    PiecewiseCurve,
    zero_curve,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Quote:
    maturity: float
    strike: float
    vol: float


@dataclass(frozen=True)
class VolSurface:
    """Implied-vol quotes plus the market environment they were observed in."""

    quotes: tuple[Quote, ...]
    spot: float
    rate: PiecewiseCurve = field(default_factory=zero_curve)
    dividend: PiecewiseCurve = field(default_factory=zero_curve)

    def __post_init__(self):
        if not self.quotes:
            raise ValueError("surface needs at least one quote")
        if self.spot <= 0.0:
            raise ValueError("spot must be > 0")
        for q in self.quotes:
            if q.maturity <= 0.0 or q.strike <= 0.0 or q.vol <= 0.0:
                raise ValueError(f"invalid quote {q}")

    @property
    def maturities(self) -> tuple[float, ...]:
        return tuple(sorted({q.maturity for q in self.quotes}))

    def quotes_at(self, maturity: float) -> tuple[Quote, ...]:
        return tuple(q for q in self.quotes if q.maturity == maturity)

    def env(self) -> MarketEnv:
        return MarketEnv(self.spot, self.rate, self.dividend)


@dataclass(frozen=True)
class LmConfig:
    max_iter: int = 50
    damping_init: float = 1e-3
    damping_factor: float = 10.0
    grad_tol: float = 1e-10
    step_tol: float = 1e-12


@dataclass(frozen=True)
class CalibConfig:
    jump_init: tuple[float, float, float] = (0.05, -0.10, 0.30)
    jump_bounds: tuple[tuple[float, float], ...] = ((0.0, 5.0), (-2.0, 2.0), (0.0, 3.0))
    nu_bounds: tuple[float, float] = (1e-4, 5.0)
    beta_bounds: tuple[float, float] = (-1.0, 3.0)
    lm: LmConfig = field(default_factory=LmConfig)
    outer: LmConfig = field(default_factory=lambda: LmConfig(max_iter=30, grad_tol=1e-9, step_tol=1e-10))
    restarts: int = 1
    restart_seed: int = 7


@dataclass(frozen=True)
class LmResult:
    x: np.ndarray
    cost: float
    residual: np.ndarray
    trace: tuple[float, ...]  # accepted objective values, nonincreasing
    n_iter: int
    converged: bool


def _project(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return np.minimum(np.maximum(x, lo), hi)


def _projected_gradient(g, x, lo, hi):
    out = g.copy()
    at_lo = x <= lo
    at_hi = x >= hi
    out[at_lo] = np.minimum(g[at_lo], 0.0)
    out[at_hi] = np.maximum(g[at_hi], 0.0)
    return out


# residual evaluations may fail for domain reasons (unattainable prices,
# overflowing mixtures at extreme trial parameters); all are "rejected step"
_EVAL_ERRORS = (EngineError, OverflowError, ValueError, ZeroDivisionError)


def _eval_residuals(fun, x) -> np.ndarray:
    r = np.asarray(fun(x), dtype=float)
    if not np.all(np.isfinite(r)):
        raise CalibrationError("residuals are not finite")
    return r


def _fd_jacobian(fun, x, r0, lo, hi):
    n = x.size
    jac = np.empty((r0.size, n))
    for j in range(n):
        h = 1e-6 * (1.0 + abs(x[j]))
        if x[j] + h > hi[j]:
            h = -h
        xt = x.copy()
        xt[j] += h
        try:
            rj = _eval_residuals(fun, xt)
        except _EVAL_ERRORS:
            xt[j] = x[j] - h
            rj = _eval_residuals(fun, xt)
            h = -h
        jac[:, j] = (rj - r0) / h
    return jac


def levenberg_marquardt(
    fun: Callable[[np.ndarray], Sequence[float]],
    x0: Sequence[float],
    bounds: Sequence[tuple[float, float]],
    config: LmConfig = LmConfig(),
) -> LmResult:
    """Damped Gauss-Newton with box projection; returns the best-seen point.

    The Jacobian is forward finite differences with step 1e-6*(1+|x_j|)
    (flipped when it would leave the box). Trial steps solve
    (J'J + damping*diag(J'J)) d = -J'r and are clipped to the box; rejected
    or failing trials raise the damping. Terminates on the projected-gradient
    norm, the step norm, or the iteration cap.
    """
    lo = np.array([b[0] for b in bounds], dtype=float)
    hi = np.array([b[1] for b in bounds], dtype=float)
    if np.any(lo > hi):
        raise ValueError("bounds must satisfy lo <= hi")
    x = _project(np.asarray(x0, dtype=float), lo, hi)

    try:
        r = _eval_residuals(fun, x)
    except _EVAL_ERRORS as exc:
        raise CalibrationError(f"residuals undefined at the initial point: {exc}") from exc
    cost = float(r @ r)
    trace = [cost]
    best_x, best_cost, best_r = x.copy(), cost, r.copy()
    damping = config.damping_init
    converged = False
    n_iter = 0
    zero_cost = 1e-20 * max(1.0, cost)

    while n_iter < config.max_iter:
        if cost <= zero_cost:  # residuals numerically zero
            converged = True
            break
        try:
            jac = _fd_jacobian(fun, x, r, lo, hi)
        except _EVAL_ERRORS:
            break  # cannot differentiate here; keep the best point seen
        grad = 2.0 * jac.T @ r
        if np.max(np.abs(_projected_gradient(grad, x, lo, hi))) <= config.grad_tol:
            converged = True
            break
        jtj = jac.T @ jac
        diag = np.diag(jtj).copy()
        floor = 1e-12 * (diag.max() if diag.max() > 0.0 else 1.0)
        diag[diag < floor] = floor

        accepted = False
        move = None
        for _ in range(25):
            try:
                step = np.linalg.solve(jtj + damping * np.diag(diag), -0.5 * grad)
            except np.linalg.LinAlgError:
                damping *= config.damping_factor
                continue
            x_trial = _project(x + step, lo, hi)
            try:
                r_trial = _eval_residuals(fun, x_trial)
            except _EVAL_ERRORS:
                damping *= config.damping_factor
                continue
            cost_trial = float(r_trial @ r_trial)
            if cost_trial < cost:
                move = x_trial - x
                x, r, cost = x_trial, r_trial, cost_trial
                trace.append(cost)
                if cost < best_cost:
                    best_x, best_cost, best_r = x.copy(), cost, r.copy()
                damping = max(damping / config.damping_factor, 1e-15)
                accepted = True
                break
            damping *= config.damping_factor
        if not accepted:
            break
        n_iter += 1
        if np.max(np.abs(move)) <= config.step_tol * (1.0 + np.max(np.abs(x))):
            converged = True
            break

    return LmResult(best_x, best_cost, best_r, tuple(trace), n_iter, converged)


# --- bootstrap ---------------------------------------------------------------


@dataclass(frozen=True)
class BucketFit:
    nu: float
    beta: float
    state: ExpansionState
    residuals: np.ndarray  # model IV - market IV, in vol units
    degraded: bool


def _bucket_pricer(surface: VolSurface, maturity: float, jumps: JumpParams):
    """Precompute per-maturity deal data; returns iv_fn(state) -> model IVs."""
    env = surface.env()
    quotes = surface.quotes_at(maturity)
    x0 = math.log(surface.spot)
    forward = env.forward(maturity)
    discount = env.discount(maturity)
    carry = env.growth(maturity)
    deals = tuple(
        DealTerms(discount, carry, Payoff(CALL, q.strike, maturity), LOG_AA)
        for q in quotes
    )

    def model_ivs(state: ExpansionState) -> np.ndarray:
        law = ProxyLaw(x0 + state.omega2, state.omega1, jumps, maturity)
        a1, a2, a3 = state.alpha
        b1, b2, b3 = state.beta
        out = np.empty(len(deals))
        for i, deal in enumerate(deals):
            price, g, h = mixture_price_and_greeks(law, deal)
            total = (
                price
                + a1 * g[0]
                + a2 * g[1]
                + a3 * g[2]
                + b1 * h[0]
                + b2 * h[1]
                + b3 * h[2]
            )
            out[i] = implied_vol(total, deal, forward)
        return out

    market = np.array([q.vol for q in quotes])
    return model_ivs, market


def _advance_cev(
    state: ExpansionState, dt: float, nu: float, beta: float, x0: float, jumps: JumpParams
) -> ExpansionState:
    sig = nu * math.exp((beta - 1.0) * x0)
    dsig = (beta - 1.0) * sig
    mu = jumps.intensity * (1.0 - jumps.exp_size_mean) - 0.5 * sig * sig
    return state.advance(dt, sig, dsig, mu, dmu=-sig * dsig, jumps=jumps)


def fit_bucket(
    index: int,
    state_in: ExpansionState,
    surface: VolSurface,
    jumps: JumpParams,
    config: CalibConfig,
    init: tuple[float, float] | None = None,
) -> BucketFit:
    """Fit (nu_i, beta_i) for maturity bucket `index`, extending `state_in`.

    With fewer than two strikes at the maturity, beta is frozen at its
    initialization and only nu is fitted (underdetermined guard). A failed
    local fit returns the best point seen, flagged degraded, so the bootstrap
    never aborts mid-sequence.
    """
    maturity = surface.maturities[index]
    quotes = surface.quotes_at(maturity)
    dt = maturity - state_in.t
    if dt <= 0.0:
        raise CalibrationError("maturities must extend the bootstrap state")
    x0 = math.log(surface.spot)
    model_ivs, market = _bucket_pricer(surface, maturity, jumps)

    if init is None:
        forward = surface.env().forward(maturity)
        atm = min(quotes, key=lambda q: abs(q.strike - forward))
        init = (atm.vol, 1.0)
    nu0 = min(max(init[0], config.nu_bounds[0]), config.nu_bounds[1])
    beta0 = min(max(init[1], config.beta_bounds[0]), config.beta_bounds[1])

    if len(quotes) < 2:

        def resid_nu(x):
            st = _advance_cev(state_in, dt, x[0], beta0, x0, jumps)
            return model_ivs(st) - market

        res = levenberg_marquardt(resid_nu, [nu0], [config.nu_bounds], config.lm)
        nu_fit, beta_fit = float(res.x[0]), beta0
    else:

        def resid(x):
            st = _advance_cev(state_in, dt, x[0], x[1], x0, jumps)
            return model_ivs(st) - market

        res = levenberg_marquardt(
            resid, [nu0, beta0], [config.nu_bounds, config.beta_bounds], config.lm
        )
        nu_fit, beta_fit = float(res.x[0]), float(res.x[1])

    state_out = _advance_cev(state_in, dt, nu_fit, beta_fit, x0, jumps)
    return BucketFit(nu_fit, beta_fit, state_out, res.residual, not res.converged)


@dataclass(frozen=True)
class BootstrapRun:
    nus: tuple[float, ...]
    betas: tuple[float, ...]
    residuals: tuple[np.ndarray, ...]  # vol units, per maturity
    degraded: tuple[bool, ...]

    @property
    def cost(self) -> float:
        return float(sum(float(r @ r) for r in self.residuals))

    def flat(self) -> np.ndarray:
        return np.concatenate(self.residuals)


def bootstrap_buckets(
    surface: VolSurface,
    jumps: JumpParams,
    config: CalibConfig,
    init_curves: tuple[tuple[float, ...], tuple[float, ...]] | None = None,
) -> BootstrapRun:
    """One sequential pass over all maturities with the jump parameters fixed."""
    state = ExpansionState.zero()
    nus: list[float] = []
    betas: list[float] = []
    residuals = []
    degraded = []
    for i in range(len(surface.maturities)):
        if init_curves is not None:
            init = (init_curves[0][i], init_curves[1][i])
        elif nus:
            init = (nus[-1], betas[-1])
        else:
            init = None
        fit = fit_bucket(i, state, surface, jumps, config, init)
        state = fit.state
        nus.append(fit.nu)
        betas.append(fit.beta)
        residuals.append(fit.residuals)
        degraded.append(fit.degraded)
    return BootstrapRun(tuple(nus), tuple(betas), tuple(residuals), tuple(degraded))


@dataclass(frozen=True)
class CalibrationResult:
    jumps: JumpParams
    nu: PiecewiseCurve
    beta: PiecewiseCurve
    residuals_bp: tuple[np.ndarray, ...]  # per maturity, (model - market) in bp
    objective: float  # sum of squared vol residuals
    objective_trace: tuple[float, ...]
    degraded: tuple[bool, ...]
    wall_time: float
    model: ModelSpec


def surface_residuals(model: ModelSpec, surface: VolSurface) -> tuple[np.ndarray, ...]:
    """Re-price every quote from scratch; residuals (model - market) in vol units."""
    from .expansion import approx_price  # local import to avoid a cycle

    out = []
    for maturity in surface.maturities:
        quotes = surface.quotes_at(maturity)
        forward = model.env.forward(maturity)
        row = np.empty(len(quotes))
        for i, q in enumerate(quotes):
            payoff = Payoff(CALL, q.strike, maturity)
            deal = DealTerms.from_model(model, payoff)
            row[i] = implied_vol(approx_price(model, payoff).total, deal, forward) - q.vol
        out.append(row)
    return tuple(out)


def _latin_hypercube(n: int, bounds, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    dims = len(bounds)
    u = (rng.permuted(np.tile(np.arange(n), (dims, 1)), axis=1).T + rng.random((n, dims))) / n
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    return lo + u * (hi - lo)


def bootstrap_calibrate(surface: VolSurface, config: CalibConfig = CalibConfig()) -> CalibrationResult:
    """Outer least squares on the jump parameters around full inner bootstraps.

    Each outer residual evaluation reruns the complete bootstrap (warm-started
    from the previous iterate's curves, which keeps it to a couple of LM steps
    per bucket). Optional multi-start draws additional jump initializations
    from a Latin hypercube over the jump bounds; the best run wins.
    """
    t_start = time.perf_counter()
    starts = [np.asarray(config.jump_init, dtype=float)]
    if config.restarts > 1:
        starts.extend(
            _latin_hypercube(config.restarts - 1, config.jump_bounds, config.restart_seed)
        )

    best: tuple[float, LmResult, BootstrapRun] | None = None
    first_error: CalibrationError | None = None
    for k, theta0 in enumerate(starts):
        memory: dict[str, tuple[tuple[float, ...], tuple[float, ...]] | None] = {"curves": None}

        def outer_resid(theta):
            jumps = JumpParams(float(theta[0]), float(theta[1]), float(theta[2]))
            run = bootstrap_buckets(surface, jumps, config, init_curves=memory["curves"])
            memory["curves"] = (run.nus, run.betas)
            return run.flat()

        try:
            result = levenberg_marquardt(outer_resid, theta0, config.jump_bounds, config.outer)
            jumps = JumpParams(*map(float, result.x))
            run = bootstrap_buckets(surface, jumps, config, init_curves=memory["curves"])
        except CalibrationError as exc:
            # a restart drawn in an unpriceable corner of the box is skipped
            log.info("calibration start %d failed: %s", k, exc)
            first_error = first_error or exc
            continue
        log.info(
            "calibration start %d: objective %.6e after %d outer iterations",
            k,
            run.cost,
            result.n_iter,
        )
        if best is None or run.cost < best[0]:
            best = (run.cost, result, run)

    if best is None:
        raise first_error if first_error is not None else CalibrationError("no start succeeded")
    cost, result, run = best
    jumps = JumpParams(*map(float, result.x))
    maturities = surface.maturities
    nu_curve = PiecewiseCurve(maturities, run.nus)
    beta_curve = PiecewiseCurve(maturities, run.betas)
    model = ModelSpec(LOG_AA, CevLocalVol(nu_curve, beta_curve), jumps, surface.env())

    # report residuals from a from-scratch re-price so the published curves
    # reproduce them by construction
    res_vol = surface_residuals(model, surface)
    wall = time.perf_counter() - t_start
    log.info("calibration done in %.3f s, objective %.6e", wall, cost)
    return CalibrationResult(
        jumps,
        nu_curve,
        beta_curve,
        tuple(1e4 * r for r in res_vol),
        cost,
        result.trace,
        run.degraded,
        wall,
        model,
    )
