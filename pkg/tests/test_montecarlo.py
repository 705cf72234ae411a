import math

import numpy as np
import pytest

import jumpsmile as js
from jumpsmile import montecarlo as mc
from jumpsmile.analytic import DealTerms, ProxyLaw, merton_price
from jumpsmile.errors import BudgetExceededError
from jumpsmile.model import frozen_at_proxy, proxy_curves

JUMPS = js.JumpParams(0.3, -0.08, 0.35)


def flat_bs_model(nu=0.2, lam=0.0):
    jumps = js.JumpParams(lam, -0.08, 0.35) if lam > 0 else js.JumpParams(0.0, 0.0, 0.0)
    return js.ModelSpec(
        js.LOG_AA,
        js.CevLocalVol(
            js.PiecewiseCurve((0.5, 1.0), (nu, nu * 1.3)), js.PiecewiseCurve.constant(1.0)
        ),
        jumps,
        js.MarketEnv(100.0, js.PiecewiseCurve.constant(0.04), js.PiecewiseCurve.constant(0.01)),
    )


def cev_model():
    return js.ModelSpec(
        js.LOG_AA,
        js.CevLocalVol(js.PiecewiseCurve.constant(0.25), js.PiecewiseCurve.constant(0.8)),
        JUMPS,
        js.MarketEnv(100.0, js.PiecewiseCurve.constant(0.04), js.PiecewiseCurve.constant(0.0)),
    )


CFG = js.McConfig(n_paths=200_000, n_steps_per_year=100, seed=123)


class TestDeterminism:
    def test_same_seed_bitwise_identical(self):
        model = cev_model()
        a = mc.mc_price(model, js.Payoff(js.CALL, 100.0, 0.5), CFG)
        b = mc.mc_price(model, js.Payoff(js.CALL, 100.0, 0.5), CFG)
        assert a == b

    def test_seed_changes_estimate(self):
        model = cev_model()
        cfg2 = js.McConfig(n_paths=200_000, n_steps_per_year=100, seed=124)
        a = mc.mc_price(model, js.Payoff(js.CALL, 100.0, 0.5), CFG)
        b = mc.mc_price(model, js.Payoff(js.CALL, 100.0, 0.5), cfg2)
        assert a.price != b.price

    @pytest.mark.skipif(len(mc.available_backends()) < 2, reason="compiled kernel absent")
    def test_backends_agree_to_ulps(self):
        model = cev_model()
        a = mc.simulate_terminal(model, 0.5, CFG, backend="compiled")
        b = mc.simulate_terminal(model, 0.5, CFG, backend="python")
        assert np.max(np.abs(a - b)) < 1e-12


class TestExactSchemeCases:
    def test_state_free_terminal_moments(self):
        # beta == 1, piecewise nu: coefficients are state-free so Euler is exact
        model = flat_bs_model()
        sample = mc.simulate_terminal(model, 1.0, CFG)
        state = js.coefficients_recursive(*proxy_curves(model, 1.0), model.jumps, 1.0)
        mean_ref = model.x0(1.0) + state.omega2
        var_ref = state.omega1
        flat = sample.ravel()
        se_mean = flat.std() / math.sqrt(flat.size)
        assert abs(flat.mean() - mean_ref) < 4 * se_mean
        se_var = flat.var() * math.sqrt(2.0 / flat.size)
        assert abs(flat.var() - var_ref) < 4 * se_var

    def test_price_matches_mixture_closed_form(self):
        model = flat_bs_model()
        payoff = js.Payoff(js.CALL, 100.0, 1.0)
        est = mc.mc_price(model, payoff, CFG)
        state = js.coefficients_recursive(*proxy_curves(model, 1.0), model.jumps, 1.0)
        law = ProxyLaw(model.x0(1.0) + state.omega2, state.omega1, model.jumps, 1.0)
        ref = merton_price(law, DealTerms.from_model(model, payoff))
        assert abs(est.price - ref) <= 3 * est.stderr

    def test_martingale_property(self):
        model = cev_model()
        sample = mc.simulate_terminal(model, 1.0, CFG).ravel()
        growth = np.exp(sample)
        se = growth.std() / math.sqrt(growth.size)
        assert abs(growth.mean() - model.env.spot) < 4 * se

    def test_proxy_frozen_simulation_matches_mixture(self):
        model = cev_model()
        frozen = frozen_at_proxy(model)
        payoff = js.Payoff(js.CALL, 105.0, 1.0)
        est = mc.mc_price(frozen, payoff, CFG)
        state = js.coefficients_recursive(*proxy_curves(model, 1.0), model.jumps, 1.0)
        law = ProxyLaw(model.x0(1.0) + state.omega2, state.omega1, model.jumps, 1.0)
        ref = merton_price(law, DealTerms.from_model(model, payoff))
        assert abs(est.price - ref) <= 3 * est.stderr


class TestNormalVariant:
    def test_expansion_matches_mc_with_sloped_vol(self):
        # normal vols carry price units; the sloped local vol exercises the
        # correction terms (the simulator extends sigma linearly in x)
        model = js.ModelSpec(
            js.NORMAL,
            js.ExplicitLocalVol(
                js.PiecewiseCurve((0.5, 1.0), (20.0, 24.0)),
                js.PiecewiseCurve((0.5, 1.0), (-0.12, -0.10)),
            ),
            js.JumpParams(0.3, -4.0, 6.0),
            js.MarketEnv(
                100.0, js.PiecewiseCurve.constant(0.02), js.PiecewiseCurve.constant(0.0)
            ),
        )
        cfg = js.McConfig(n_paths=400_000, n_steps_per_year=200, seed=21)
        sample = mc.simulate_terminal(model, 1.0, cfg)
        for strike in (90.0, 100.0, 115.0):
            payoff = js.Payoff(js.CALL, strike, 1.0)
            bd = js.approx_price(model, payoff)
            assert bd.diffusion_correction != 0.0
            est = mc.estimate_from_sample(sample, DealTerms.from_model(model, payoff))
            assert abs(bd.total - est.price) <= 3 * est.stderr


class TestEstimator:
    def test_antithetic_toggle_unbiased(self):
        model = cev_model()
        payoff = js.Payoff(js.CALL, 100.0, 0.5)
        on = mc.mc_price(model, payoff, CFG)
        off = mc.mc_price(
            model,
            payoff,
            js.McConfig(n_paths=200_000, n_steps_per_year=100, seed=123, antithetic=False),
        )
        assert abs(on.price - off.price) < 4 * max(on.stderr, off.stderr)

    def test_pairs_counted_once(self):
        est = mc.mc_price(cev_model(), js.Payoff(js.CALL, 100.0, 0.25), CFG)
        assert est.n_paths_used == CFG.n_paths // 2

    def test_stderr_definition(self):
        model = flat_bs_model()
        payoff = js.Payoff(js.CALL, 100.0, 0.5)
        sample = mc.simulate_terminal(model, 0.5, CFG)
        obs = mc.discounted_payoff(sample, DealTerms.from_model(model, payoff)).mean(axis=0)
        est = mc.estimate_from_sample(sample, DealTerms.from_model(model, payoff))
        assert est.stderr == pytest.approx(obs.std(ddof=1) / math.sqrt(obs.size), rel=1e-12)


class TestJumpMachinery:
    def test_jump_count_moments(self):
        # zero vol and unit jump size turn the terminal value into the raw count
        from jumpsmile import _euler_py

        lam, horizon, n = 0.8, 2.0, 200_000
        steps = 100
        dt = np.full(steps, horizon / steps)
        bg = np.random.Philox(key=np.array([99, 0], dtype=np.uint64))
        kern = mc._kernel(None)
        out = kern.euler_terminal(
            bg, 0.0, _euler_py.VARIANT_EXP, dt, np.sqrt(dt), np.zeros(steps),
            np.zeros(steps), np.zeros(steps), lam, 1.0, 0.0, n, False,
        )
        counts = out.ravel()
        mean_se = counts.std() / math.sqrt(n)
        assert abs(counts.mean() - lam * horizon) < 4 * mean_se
        var_se = counts.var() * math.sqrt(2.0 / n)
        assert abs(counts.var() - lam * horizon) < 4 * var_se

    def test_self_convergence_in_steps(self):
        model = cev_model()
        payoff = js.Payoff(js.CALL, 100.0, 1.0)
        coarse = mc.mc_price(model, payoff, js.McConfig(n_paths=400_000, n_steps_per_year=50, seed=7))
        fine = mc.mc_price(model, payoff, js.McConfig(n_paths=400_000, n_steps_per_year=100, seed=7))
        assert abs(coarse.price - fine.price) < 3 * max(coarse.stderr, fine.stderr)


class TestConfigGuards:
    def test_budget_exceeded(self):
        cfg = js.McConfig(n_paths=1_000_000, n_steps_per_year=250, max_budget=1e6)
        with pytest.raises(BudgetExceededError):
            mc.simulate_terminal(cev_model(), 1.0, cfg)

    def test_odd_paths_with_antithetic_rejected(self):
        with pytest.raises(ValueError):
            js.McConfig(n_paths=101, antithetic=True)

    def test_unknown_scheme_rejected(self):
        with pytest.raises(ValueError):
            js.McConfig(scheme="milstein")

    def test_unknown_backend_rejected(self):
        with pytest.raises(ValueError):
            mc.simulate_terminal(cev_model(), 0.5, CFG, backend="fortran")
