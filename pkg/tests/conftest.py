import numpy as np
import pytest

import jumpsmile as js


def make_table1_model(buckets: int = 100) -> js.ModelSpec:
    """Piecewise CEV model of the accuracy experiment: 1/20-year buckets with
    nu = 25% - i*0.11%, beta = 100% - i*0.75%; jumps (30%, -8%, 35%);
    spot 100, r 4%, q 0."""
    times = tuple((k + 1) / 20 for k in range(buckets))
    nu = tuple(0.25 - k * 0.0011 for k in range(buckets))
    beta = tuple(1.0 - k * 0.0075 for k in range(buckets))
    return js.ModelSpec(
        js.LOG_AA,
        js.CevLocalVol(js.PiecewiseCurve(times, nu), js.PiecewiseCurve(times, beta)),
        js.JumpParams(0.3, -0.08, 0.35),
        js.MarketEnv(
            100.0, js.PiecewiseCurve.constant(0.04), js.PiecewiseCurve.constant(0.0)
        ),
    )


def random_piecewise_curve(rng: np.random.Generator, lo: float, hi: float, horizon: float = 3.0):
    n = int(rng.integers(1, 7))
    times = np.sort(rng.uniform(0.05, horizon, size=n))
    times[0] = max(times[0], 0.05)
    # enforce strict increase
    for i in range(1, n):
        times[i] = max(times[i], times[i - 1] + 1e-3)
    values = rng.uniform(lo, hi, size=n)
    return js.PiecewiseCurve(tuple(times), tuple(values))


def random_jumps(rng: np.random.Generator, allow_zero: bool = True) -> js.JumpParams:
    if allow_zero and rng.random() < 0.25:
        return js.JumpParams(0.0, 0.0, 0.0)
    return js.JumpParams(
        float(rng.uniform(0.01, 1.5)),
        float(rng.uniform(-0.4, 0.25)),
        float(rng.uniform(0.0, 0.5)),
    )


def random_aa_model(rng: np.random.Generator, flat_beta: bool = False) -> js.ModelSpec:
    nu = random_piecewise_curve(rng, 0.08, 0.5)
    if flat_beta:
        beta = js.PiecewiseCurve(nu.times, tuple(1.0 for _ in nu.times))
    else:
        beta = random_piecewise_curve(rng, 0.3, 1.4)
    spot = float(rng.uniform(0.5, 250.0))
    rate = js.PiecewiseCurve.constant(float(rng.uniform(-0.01, 0.08)))
    div = js.PiecewiseCurve.constant(float(rng.uniform(0.0, 0.04)))
    return js.ModelSpec(
        js.LOG_AA, js.CevLocalVol(nu, beta), random_jumps(rng), js.MarketEnv(spot, rate, div)
    )


@pytest.fixture(scope="session")
def table1_model() -> js.ModelSpec:
    return make_table1_model()


@pytest.fixture(scope="session")
def mc_sample_cache():
    """Terminal-sample cache shared across MC-heavy tests (key: model id, maturity)."""
    return {}
