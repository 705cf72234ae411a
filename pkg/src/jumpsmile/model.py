"""Domain types: piecewise curves, jump parameters, local volatility, market data.

The engine prices one-dimensional jump diffusions

    dX_t = sigma(t, X_t-) dW_t + mu(t, X_t-) dt + dJ_t,   X_0 = x0,

where J is compound Poisson with intensity ``lam`` and N(mean, vol^2) jump
sizes. Two variants are supported:

* ``log_aa`` -- X is the log asset. The local volatility is CEV-style,
  sigma(t, x) = nu(t) * exp((beta(t) - 1) * x), and the drift is derived so
  that exp(X) is a martingale:
  mu(t, x) = lam * (1 - E[e^Y]) - sigma(t, x)^2 / 2.
* ``normal`` -- X is the forward itself; sigma is supplied directly as a
  curve pair (level and x-derivative at the proxy point) and
  mu(t, x) = -lam * mean is state-free.

All values are decimals (0.25, not 25) and times are in years.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass

from .errors import SchemaError

LOG_AA = "log_aa"
NORMAL = "normal"

CALL = "call"
PUT = "put"
DIGITAL = "digital"
_PAYOFF_KINDS = (CALL, PUT, DIGITAL)


@dataclass(frozen=True)
class PiecewiseCurve:
    """Right-continuous step function of time.

    ``values[i]`` applies on the left-open interval (times[i-1], times[i]]
    with an implied leading breakpoint at 0; beyond the last breakpoint the
    final value extends flat. Evaluation at 0 returns ``values[0]``.
    """

    times: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if len(times) < 1:
            raise ValueError("curve needs at least one breakpoint")
        if len(times) != len(values):
            raise ValueError("times and values must have equal length")
        if times[0] <= 0.0:
            raise ValueError("first breakpoint must be > 0 (t=0 is implied)")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if any(not math.isfinite(v) for v in values + times):
            raise ValueError("curve entries must be finite")

    @classmethod
    def constant(cls, value: float, horizon: float = 1.0) -> "PiecewiseCurve":
        return cls((horizon,), (value,))

    def value(self, t: float) -> float:
        """Value on the interval containing t (flat beyond the last breakpoint)."""
        if t < 0.0:
            raise ValueError("curve evaluated at negative time")
        i = bisect_left(self.times, t)
        if i >= len(self.times):
            return self.values[-1]
        return self.values[i]

    def integral(self, a: float, b: float) -> float:
        """Exact integral of the step function over [a, b], 0 <= a <= b."""
        if a < 0.0 or b < a:
            raise ValueError("integration bounds must satisfy 0 <= a <= b")
        total = 0.0
        lo = a
        for t, v in zip(self.times, self.values):
            if t <= lo:
                continue
            hi = min(t, b)
            if hi > lo:
                total += v * (hi - lo)
                lo = hi
            if lo >= b:
                return total
        if lo < b:
            total += self.values[-1] * (b - lo)
        return total

def merged_times(*curves: PiecewiseCurve) -> tuple[float, ...]:
    """Union of the curves' breakpoints, sorted."""
    cut: set[float] = set()
    for c in curves:
        cut.update(c.times)
    return tuple(sorted(cut))


def zero_curve() -> PiecewiseCurve:
    return PiecewiseCurve.constant(0.0)


@dataclass(frozen=True)
class JumpParams:
    """Compound Poisson jump component: intensity and N(mean, vol^2) sizes."""

    intensity: float
    mean: float
    vol: float

    def __post_init__(self):
        if self.intensity < 0.0:
            raise ValueError("jump intensity must be >= 0")
        if self.vol < 0.0:
            raise ValueError("jump size volatility must be >= 0")

    @property
    def exp_size_mean(self) -> float:
        """E[e^Y] for one jump."""
        return math.exp(self.mean + 0.5 * self.vol * self.vol)

    @property
    def size_scale(self) -> float:
        """|mean| + vol, the jump-size magnitude diagnostic."""
        return abs(self.mean) + self.vol


@dataclass(frozen=True)
class CevLocalVol:
    """sigma(t, x) = nu(t) * exp((beta(t) - 1) * x); log-asset variant only."""

    nu: PiecewiseCurve
    beta: PiecewiseCurve

    def __post_init__(self):
        if any(v <= 0.0 for v in self.nu.values):
            raise ValueError("nu(t) must be > 0 everywhere")


@dataclass(frozen=True)
class ExplicitLocalVol:
    """Level and x-derivative of sigma at the proxy point, as curves (normal variant)."""

    sigma: PiecewiseCurve
    dsigma: PiecewiseCurve

    def __post_init__(self):
        if any(v <= 0.0 for v in self.sigma.values):
            raise ValueError("sigma(t) must be > 0 everywhere")


@dataclass(frozen=True)
class MarketEnv:
    spot: float
    rate: PiecewiseCurve
    dividend: PiecewiseCurve

    def __post_init__(self):
        if self.spot <= 0.0:
            raise ValueError("spot must be > 0")

    def discount(self, maturity: float) -> float:
        return math.exp(-self.rate.integral(0.0, maturity))

    def growth(self, maturity: float) -> float:
        """exp(integral of r - q), the spot-to-forward growth factor."""
        return math.exp(
            self.rate.integral(0.0, maturity) - self.dividend.integral(0.0, maturity)
        )

    def forward(self, maturity: float) -> float:
        return self.spot * self.growth(maturity)


@dataclass(frozen=True)
class Payoff:
    """European payoff: call / put / digital (cash-or-nothing call).

    maturity 0 is accepted; the expansion prices it as intrinsic value.
    """

    kind: str
    strike: float
    maturity: float

    def __post_init__(self):
        if self.kind not in _PAYOFF_KINDS:
            raise ValueError(f"unknown payoff kind {self.kind!r}")
        if self.strike <= 0.0:
            raise ValueError("strike must be > 0")
        if self.maturity < 0.0:
            raise ValueError("maturity must be >= 0")


@dataclass(frozen=True)
class ModelSpec:
    """Full model: variant, local volatility, jumps, market environment."""

    variant: str
    localvol: CevLocalVol | ExplicitLocalVol
    jumps: JumpParams
    env: MarketEnv

    def __post_init__(self):
        if self.variant == LOG_AA:
            if not isinstance(self.localvol, CevLocalVol):
                raise ValueError("log_aa variant requires CevLocalVol")
        elif self.variant == NORMAL:
            if not isinstance(self.localvol, ExplicitLocalVol):
                raise ValueError("normal variant requires ExplicitLocalVol")
        else:
            raise ValueError(f"unknown variant {self.variant!r}")

    def x0(self, maturity: float) -> float:
        """Proxy expansion point: ln(spot) for log_aa, the forward for normal."""
        if self.variant == LOG_AA:
            return math.log(self.env.spot)
        return self.env.forward(maturity)

    def drift_const(self) -> float:
        """State-free part of the drift: lam*(1 - E[e^Y]) for log_aa, -lam*mean for normal."""
        j = self.jumps
        if self.variant == LOG_AA:
            return j.intensity * (1.0 - j.exp_size_mean)
        return -j.intensity * j.mean

    def vol_times(self) -> tuple[float, ...]:
        if self.variant == LOG_AA:
            return merged_times(self.localvol.nu, self.localvol.beta)
        return merged_times(self.localvol.sigma, self.localvol.dsigma)


def eval_vol_at_proxy(model: ModelSpec, t: float) -> tuple[float, float]:
    """(sigma_t, dsigma_t): level and x-derivative of sigma(t, .) at the proxy point."""
    if model.variant == LOG_AA:
        lv = model.localvol
        s = lv.nu.value(t) * math.exp((lv.beta.value(t) - 1.0) * model.x0(0.0))
        return s, (lv.beta.value(t) - 1.0) * s
    lv = model.localvol
    return lv.sigma.value(t), lv.dsigma.value(t)


def eval_drift_at_proxy(model: ModelSpec, t: float) -> tuple[float, float]:
    """(mu_t, dmu_t): level and x-derivative of mu(t, .) at the proxy point."""
    c = model.drift_const()
    if model.variant == LOG_AA:
        s, ds = eval_vol_at_proxy(model, t)
        return c - 0.5 * s * s, -s * ds
    return c, 0.0


def proxy_curves(
    model: ModelSpec, maturity: float
) -> tuple[PiecewiseCurve, PiecewiseCurve, PiecewiseCurve, PiecewiseCurve]:
    """(sigma, dsigma, mu, dmu) step curves at the proxy point, on one shared grid.

    The grid is the union of the volatility curves' breakpoints; a breakpoint at
    ``maturity`` is appended if it lies beyond the last one so the curves cover
    [0, maturity].
    """
    times = model.vol_times()
    if maturity > times[-1]:
        times = times + (maturity,)
    sig, dsig, mu, dmu = [], [], [], []
    for t in times:
        s, ds = eval_vol_at_proxy(model, t)
        m, dm = eval_drift_at_proxy(model, t)
        sig.append(s)
        dsig.append(ds)
        mu.append(m)
        dmu.append(dm)
    return (
        PiecewiseCurve(times, tuple(sig)),
        PiecewiseCurve(times, tuple(dsig)),
        PiecewiseCurve(times, tuple(mu)),
        PiecewiseCurve(times, tuple(dmu)),
    )


def frozen_at_proxy(model: ModelSpec) -> ModelSpec:
    """Model with sigma and mu frozen at the proxy point (state dependence removed).

    For log_aa this maps (nu, beta) to (sigma(., x0), 1); for normal it zeroes
    dsigma. Simulating the frozen model samples the closed-form mixture law.
    """
    times = model.vol_times()
    levels = tuple(eval_vol_at_proxy(model, t)[0] for t in times)
    if model.variant == LOG_AA:
        lv = CevLocalVol(
            PiecewiseCurve(times, levels),
            PiecewiseCurve(times, tuple(1.0 for _ in times)),
        )
    else:
        lv = ExplicitLocalVol(
            PiecewiseCurve(times, levels),
            PiecewiseCurve(times, tuple(0.0 for _ in times)),
        )
    return ModelSpec(model.variant, lv, model.jumps, model.env)


# --- JSON model schema -------------------------------------------------------
#
# {"variant": "log_aa"|"normal", "spot": num,
#  "rate": curve, "dividend": curve,            (optional, default 0)
#  "nu": curve, "beta": curve,                  (log_aa)
#  "sigma": curve, "dsigma": curve,             (normal)
#  "jumps": {"lambda": num, "eta": num, "gamma": num}}
# curve = {"times": [t1..tn], "values": [v1..vn]}, implied leading breakpoint 0.
# Unknown top-level keys are ignored so calibration output is reusable as input.


def _num(obj, path: str) -> float:
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise SchemaError(path, "expected a number")
    return float(obj)


def _curve_from_dict(obj, path: str) -> PiecewiseCurve:
    if not isinstance(obj, dict):
        raise SchemaError(path, "expected an object with 'times' and 'values'")
    for key in ("times", "values"):
        if key not in obj:
            raise SchemaError(f"{path}.{key}", "missing")
        if not isinstance(obj[key], list) or not obj[key]:
            raise SchemaError(f"{path}.{key}", "expected a non-empty array")
    times = [_num(t, f"{path}.times[{i}]") for i, t in enumerate(obj["times"])]
    values = [_num(v, f"{path}.values[{i}]") for i, v in enumerate(obj["values"])]
    try:
        return PiecewiseCurve(tuple(times), tuple(values))
    except ValueError as exc:
        raise SchemaError(path, str(exc)) from exc


def _curve_to_dict(curve: PiecewiseCurve) -> dict:
    return {"times": list(curve.times), "values": list(curve.values)}


def model_from_dict(obj) -> ModelSpec:
    if not isinstance(obj, dict):
        raise SchemaError("$", "model file must contain a JSON object")
    variant = obj.get("variant")
    if variant not in (LOG_AA, NORMAL):
        raise SchemaError("variant", f"expected 'log_aa' or 'normal', got {variant!r}")
    if "spot" not in obj:
        raise SchemaError("spot", "missing")
    spot = _num(obj["spot"], "spot")

    rate = _curve_from_dict(obj["rate"], "rate") if "rate" in obj else zero_curve()
    dividend = (
        _curve_from_dict(obj["dividend"], "dividend") if "dividend" in obj else zero_curve()
    )

    jobj = obj.get("jumps")
    if not isinstance(jobj, dict):
        raise SchemaError("jumps", "missing or not an object")
    for key in ("lambda", "eta", "gamma"):
        if key not in jobj:
            raise SchemaError(f"jumps.{key}", "missing")
    try:
        jumps = JumpParams(
            _num(jobj["lambda"], "jumps.lambda"),
            _num(jobj["eta"], "jumps.eta"),
            _num(jobj["gamma"], "jumps.gamma"),
        )
    except ValueError as exc:
        raise SchemaError("jumps", str(exc)) from exc

    try:
        if variant == LOG_AA:
            for key in ("nu", "beta"):
                if key not in obj:
                    raise SchemaError(key, "missing (required for log_aa)")
            lv = CevLocalVol(
                _curve_from_dict(obj["nu"], "nu"), _curve_from_dict(obj["beta"], "beta")
            )
        else:
            for key in ("sigma", "dsigma"):
                if key not in obj:
                    raise SchemaError(key, "missing (required for normal)")
            lv = ExplicitLocalVol(
                _curve_from_dict(obj["sigma"], "sigma"),
                _curve_from_dict(obj["dsigma"], "dsigma"),
            )
        env = MarketEnv(spot, rate, dividend)
        return ModelSpec(variant, lv, jumps, env)
    except ValueError as exc:
        raise SchemaError("$", str(exc)) from exc


def model_to_dict(model: ModelSpec) -> dict:
    out = {
        "variant": model.variant,
        "spot": model.env.spot,
        "rate": _curve_to_dict(model.env.rate),
        "dividend": _curve_to_dict(model.env.dividend),
        "jumps": {
            "lambda": model.jumps.intensity,
            "eta": model.jumps.mean,
            "gamma": model.jumps.vol,
        },
    }
    if model.variant == LOG_AA:
        out["nu"] = _curve_to_dict(model.localvol.nu)
        out["beta"] = _curve_to_dict(model.localvol.beta)
    else:
        out["sigma"] = _curve_to_dict(model.localvol.sigma)
        out["dsigma"] = _curve_to_dict(model.localvol.dsigma)
    return out
