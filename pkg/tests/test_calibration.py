import math

import numpy as np
import pytest

import jumpsmile as js
from jumpsmile import calibration as cal
from jumpsmile.analytic import DealTerms, implied_vol
from jumpsmile.errors import CalibrationError
from jumpsmile.expansion import ExpansionState


def synthetic_surface(jumps=js.JumpParams(0.3, -0.08, 0.35), rate=0.02):
    """4x4 surface generated by a known coarse CEV model; returns (surface, model)."""
    times = (0.5, 1.0, 1.5, 2.0)
    nu = (0.25, 0.239, 0.228, 0.217)
    beta = (0.9625, 0.8875, 0.8125, 0.7375)
    env = js.MarketEnv(
        100.0, js.PiecewiseCurve.constant(rate), js.PiecewiseCurve.constant(0.0)
    )
    model = js.ModelSpec(
        js.LOG_AA,
        js.CevLocalVol(js.PiecewiseCurve(times, nu), js.PiecewiseCurve(times, beta)),
        jumps,
        env,
    )
    quotes = []
    for T in times:
        fwd = env.forward(T)
        for rel in (0.92, 0.96, 1.0, 1.08):
            payoff = js.Payoff(js.CALL, rel * 100.0, T)
            deal = DealTerms.from_model(model, payoff)
            iv = implied_vol(js.approx_price(model, payoff).total, deal, fwd)
            quotes.append(cal.Quote(T, rel * 100.0, iv))
    return cal.VolSurface(tuple(quotes), 100.0, env.rate, env.dividend), model


TABLE2_SPOT = 1.54
TABLE2_RELS = (0.92, 0.96, 1.00, 1.08)
TABLE2_VOLS = {
    0.5: (0.1082, 0.1065, 0.1053, 0.1056),
    1.0: (0.1084, 0.1070, 0.1063, 0.1066),
    1.5: (0.1071, 0.1060, 0.1056, 0.1058),
    2.0: (0.1060, 0.1048, 0.1046, 0.1047),
}


def table2_surface() -> cal.VolSurface:
    quotes = tuple(
        cal.Quote(T, rel * TABLE2_SPOT, v)
        for T, vols in TABLE2_VOLS.items()
        for rel, v in zip(TABLE2_RELS, vols)
    )
    return cal.VolSurface(quotes, TABLE2_SPOT)


class TestLevenbergMarquardt:
    def test_linear_residuals_converge_immediately(self):
        target = np.array([0.3, -1.2, 4.0])
        res = cal.levenberg_marquardt(
            lambda x: x - target, [0.0, 0.0, 0.0], [(-10, 10)] * 3
        )
        assert res.converged
        assert res.n_iter <= 3
        assert np.allclose(res.x, target, atol=1e-8)

    def test_rosenbrock(self):
        fun = lambda x: np.array([1.0 - x[0], 10.0 * (x[1] - x[0] ** 2)])
        res = cal.levenberg_marquardt(fun, [-1.2, 1.0], [(-5, 5), (-5, 5)])
        assert np.allclose(res.x, [1.0, 1.0], atol=1e-8)

    def test_box_active_kkt(self):
        # unconstrained minimizer (2, 0) sits outside the box
        fun = lambda x: np.array([x[0] - 2.0, x[1]])
        res = cal.levenberg_marquardt(fun, [0.0, 0.5], [(-1.0, 1.0), (-1.0, 1.0)])
        assert res.x[0] == pytest.approx(1.0, abs=1e-12)
        # projected gradient at the active bound points outward -> treated as converged
        assert res.converged

    def test_trace_monotone(self):
        fun = lambda x: np.array([math.sin(x[0]) + 0.1 * x[0], x[1] ** 2 - 0.3])
        res = cal.levenberg_marquardt(fun, [2.0, 1.5], [(-6, 6), (-6, 6)])
        assert all(a >= b for a, b in zip(res.trace, res.trace[1:]))

    def test_failure_at_initial_point(self):
        from jumpsmile.errors import EngineError

        def bad(x):
            raise EngineError("undefined here")

        with pytest.raises(CalibrationError):
            cal.levenberg_marquardt(bad, [0.0], [(-1, 1)])

    def test_failures_elsewhere_are_rejected_steps(self):
        from jumpsmile.errors import EngineError

        def fun(x):
            if abs(x[0]) > 0.35:
                raise EngineError("outside the safe region")
            return np.array([x[0] - 0.3])

        res = cal.levenberg_marquardt(fun, [0.0], [(-1, 1)])
        assert res.x[0] == pytest.approx(0.3, abs=1e-8)


class TestFitBucket:
    def test_recovers_single_bucket(self):
        surface, truth = synthetic_surface()
        fit = cal.fit_bucket(
            0, ExpansionState.zero(), surface, truth.jumps, cal.CalibConfig()
        )
        assert np.max(np.abs(fit.residuals)) <= 0.5e-4
        assert not fit.degraded

    def test_single_quote_freezes_beta(self):
        surface, truth = synthetic_surface()
        one = cal.VolSurface((surface.quotes[2],), surface.spot, surface.rate, surface.dividend)
        fit = cal.fit_bucket(
            0, ExpansionState.zero(), one, truth.jumps, cal.CalibConfig(), init=(0.2, 1.0)
        )
        assert fit.beta == 1.0  # held at initialization
        assert abs(fit.residuals[0]) <= 1e-6

    def test_published_parameters_reproduce_published_errors(self):
        # feeding the published calibrated point back through the pricer lands
        # within (|published error| + 2) bp on every quote
        surface = table2_surface()
        times = (0.5, 1.0, 1.5, 2.0)
        model = js.ModelSpec(
            js.LOG_AA,
            js.CevLocalVol(
                js.PiecewiseCurve(times, (0.1031, 0.1027, 0.0990, 0.0943)),
                js.PiecewiseCurve(times, (0.9881, 1.0, 1.0, 1.0)),
            ),
            js.JumpParams(0.0121, -0.1907, 0.4030),
            surface.env(),
        )
        published_bp = {0.5: (-4, 3, -1, -3), 1.0: (2, 1, 0, 2), 1.5: (-1, -3, -2, 1), 2.0: (2, -1, 1, 4)}
        for T, row in zip(surface.maturities, cal.surface_residuals(model, surface)):
            for got, ref in zip(1e4 * row, published_bp[T]):
                assert abs(got) <= abs(ref) + 2.0


class TestBootstrap:
    def test_variance_stripping_reduction(self):
        # lam = 0 and beta == 1: the bootstrap reduces to stripping forward vols
        times = (0.5, 1.0, 2.0)
        nu = (0.22, 0.26, 0.19)
        env = js.MarketEnv(
            50.0, js.PiecewiseCurve.constant(0.01), js.PiecewiseCurve.constant(0.0)
        )
        truth = js.ModelSpec(
            js.LOG_AA,
            js.CevLocalVol(
                js.PiecewiseCurve(times, nu), js.PiecewiseCurve(times, (1.0, 1.0, 1.0))
            ),
            js.JumpParams(0.0, 0.0, 0.0),
            env,
        )
        quotes = []
        for T in times:
            var = js.PiecewiseCurve(times, tuple(v * v for v in nu)).integral(0.0, T)
            quotes.append(cal.Quote(T, 50.0, math.sqrt(var / T)))  # ATM BS vol
        surface = cal.VolSurface(tuple(quotes), 50.0, env.rate, env.dividend)
        run = cal.bootstrap_buckets(surface, truth.jumps, cal.CalibConfig())
        assert max(float(np.max(np.abs(r))) for r in run.residuals) <= 0.1e-4
        assert np.allclose(run.nus, nu, atol=1e-4)

    def test_bucket_locality(self):
        surface, truth = synthetic_surface()
        run_a = cal.bootstrap_buckets(surface, truth.jumps, cal.CalibConfig())
        bumped = tuple(
            cal.Quote(q.maturity, q.strike, q.vol + (0.01 if q.maturity == 2.0 else 0.0))
            for q in surface.quotes
        )
        run_b = cal.bootstrap_buckets(
            cal.VolSurface(bumped, surface.spot, surface.rate, surface.dividend),
            truth.jumps,
            cal.CalibConfig(),
        )
        assert run_a.nus[:3] == run_b.nus[:3]
        assert run_a.betas[:3] == run_b.betas[:3]
        assert run_a.nus[3] != run_b.nus[3]

    def test_round_trip_and_reprice_consistency(self):
        surface, _ = synthetic_surface()
        result = cal.bootstrap_calibrate(surface)
        assert max(float(np.max(np.abs(r))) for r in result.residuals_bp) <= 0.5
        again = cal.surface_residuals(result.model, surface)
        for row_bp, row_vol in zip(result.residuals_bp, again):
            assert np.max(np.abs(row_bp / 1e4 - row_vol)) <= 1e-10

    def test_idempotent_restart(self):
        surface, _ = synthetic_surface()
        first = cal.bootstrap_calibrate(surface)
        config = cal.CalibConfig(
            jump_init=(first.jumps.intensity, first.jumps.mean, first.jumps.vol)
        )
        second = cal.bootstrap_calibrate(surface, config)
        assert second.objective <= first.objective * (1.0 + 1e-6) + 1e-12

    def test_outer_trace_monotone(self):
        surface, _ = synthetic_surface()
        result = cal.bootstrap_calibrate(surface)
        assert all(a >= b for a, b in zip(result.objective_trace, result.objective_trace[1:]))

    def test_table2_fit_quality_and_speed(self):
        import time

        surface = table2_surface()
        t0 = time.perf_counter()
        result = cal.bootstrap_calibrate(surface)
        elapsed = time.perf_counter() - t0
        assert max(float(np.max(np.abs(r))) for r in result.residuals_bp) <= 10.0
        assert elapsed <= 5.0
        assert result.model.jumps == result.jumps

    def test_empty_surface_rejected(self):
        with pytest.raises(ValueError):
            cal.VolSurface((), 100.0)

    def test_multi_start_deterministic(self):
        surface, _ = synthetic_surface()
        config = cal.CalibConfig(restarts=2, outer=cal.LmConfig(max_iter=5))
        a = cal.bootstrap_calibrate(surface, config)
        b = cal.bootstrap_calibrate(surface, config)
        assert a.jumps == b.jumps
        assert a.objective == b.objective
