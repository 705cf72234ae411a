"""Command-line surface: price, smile, validate, calibrate, diagnostics.

Conventions: all numeric I/O uses decimals (0.25, not 25) except residual and
error outputs explicitly labeled "bp"; CSV is comma-separated with a '.'
decimal point, a mandatory header row, UTF-8 and LF line endings. Commands are
deterministic for fixed inputs and seeds, never mutate their inputs, and write
output files only after the full computation succeeds.

Exit codes: 0 success, 1 domain error (machine-readable JSON on stderr),
2 usage/schema error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys

from . import calibration, expansion, montecarlo
from .analytic import DealTerms, implied_vol
from .errors import BudgetExceededError, EngineError, ImpliedVolError, SchemaError
from .model import CALL, Payoff, model_from_dict, model_to_dict

log = logging.getLogger("jumpsmile")


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _load_json(path: str, what: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise SchemaError(what, f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(what, f"{path} is not valid JSON: {exc}") from exc


def _load_model(path: str):
    return model_from_dict(_load_json(path, "model"))


def _parse_list(text: str, flag: str) -> list[float]:
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise SchemaError(flag, f"expected a comma-separated number list, got {text!r}") from exc
    if not values:
        raise SchemaError(flag, "empty list")
    return values


def _relative_strike(value: float) -> float:
    # accepts 0.85 or table-style 85; anything above 5 is a percentage
    return value / 100.0 if value > 5.0 else value


def _write_text(path: str, text: str):
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


# --- commands -----------------------------------------------------------------


def cmd_price(args) -> int:
    model = _load_model(args.model)
    payoff = Payoff(args.payoff, args.strike, args.maturity)
    bd = expansion.approx_price(model, payoff)
    record = {"price": bd.total}
    if args.breakdown:
        record.update(
            merton_term=bd.merton_term,
            diffusion_correction=bd.diffusion_correction,
            jump_correction=bd.jump_correction,
        )
    print(json.dumps(record, sort_keys=True))
    return 0


def _smile_rows(model, maturities, rel_strikes):
    rows = []
    for t in maturities:
        forward = model.env.forward(t)
        row = []
        for rel in rel_strikes:
            payoff = Payoff(CALL, rel * model.env.spot, t)
            deal = DealTerms.from_model(model, payoff)
            price = expansion.approx_price(model, payoff).total
            try:
                row.append(_fmt(implied_vol(price, deal, forward)))
            except ImpliedVolError as exc:
                log.warning("no implied vol at T=%g, strike=%g: %s", t, rel, exc)
                row.append("NA")
        rows.append(row)
    return rows


def cmd_smile(args) -> int:
    model = _load_model(args.model)
    maturities = _parse_list(args.maturities, "--maturities")
    rel_strikes = [_relative_strike(v) for v in _parse_list(args.strikes, "--strikes")]
    rows = _smile_rows(model, maturities, rel_strikes)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["maturity"] + [_fmt(k) for k in rel_strikes])
    for t, row in zip(maturities, rows):
        writer.writerow([_fmt(t)] + row)
    _write_text(args.out, buf.getvalue())
    return 0


def _read_grid(path: str) -> list[tuple[float, float]]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"maturity", "strike"} <= set(reader.fieldnames):
                raise SchemaError("grid", "CSV needs columns: maturity,strike")
            out = []
            for i, rec in enumerate(reader):
                try:
                    out.append(
                        (float(rec["maturity"]), _relative_strike(float(rec["strike"])))
                    )
                except (TypeError, ValueError) as exc:
                    raise SchemaError(f"grid[{i}]", f"bad row {rec}") from exc
    except OSError as exc:
        raise SchemaError("grid", f"cannot read {path}: {exc.strerror}") from exc
    if not out:
        raise SchemaError("grid", "no rows")
    return out


def cmd_validate(args) -> int:
    model = _load_model(args.model)
    grid = _read_grid(args.grid)
    maturities = sorted({t for t, _ in grid})
    cfg = montecarlo.McConfig(
        n_paths=args.paths,
        n_steps_per_year=args.steps,
        seed=args.seed,
        max_budget=args.budget,
    )
    # enforce the budget across the whole request before simulating anything
    for t in maturities:
        n_steps = montecarlo.step_count(model, t, cfg)
        if cfg.n_paths * n_steps > cfg.max_budget:
            raise BudgetExceededError(
                f"maturity {t:g}: {cfg.n_paths} paths x {n_steps} steps "
                f"exceeds budget {cfg.max_budget:g}"
            )

    lines = [["maturity", "rel_strike", "iv_expansion", "iv_mc", "error_bp", "mc_stderr_bp"]]
    for t in maturities:
        sample = montecarlo.simulate_terminal(model, t, cfg)
        forward = model.env.forward(t)
        for tq, rel in grid:
            if tq != t:
                continue
            payoff = Payoff(CALL, rel * model.env.spot, t)
            deal = DealTerms.from_model(model, payoff)
            est = montecarlo.estimate_from_sample(sample, deal)
            price = expansion.approx_price(model, payoff).total
            try:
                iv_exp = implied_vol(price, deal, forward)
                iv_mc = implied_vol(est.price, deal, forward)
                vega = (
                    implied_vol(est.price + est.stderr, deal, forward) - iv_mc
                    if est.stderr > 0.0
                    else 0.0
                )
                lines.append(
                    [
                        _fmt(t),
                        _fmt(rel),
                        _fmt(iv_exp),
                        _fmt(iv_mc),
                        _fmt(1e4 * (iv_exp - iv_mc)),
                        _fmt(1e4 * abs(vega)),
                    ]
                )
            except ImpliedVolError as exc:
                log.warning("no implied vol at T=%g, strike=%g: %s", t, rel, exc)
                lines.append([_fmt(t), _fmt(rel), "NA", "NA", "NA", "NA"])
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(lines)
    _write_text(args.out, buf.getvalue())
    return 0


def _read_quotes(path: str) -> list[calibration.Quote]:
    cols = {"maturity_years", "strike", "implied_vol"}
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not cols <= set(reader.fieldnames):
                raise SchemaError("quotes", "CSV needs columns: maturity_years,strike,implied_vol")
            out = []
            for i, rec in enumerate(reader):
                try:
                    out.append(
                        calibration.Quote(
                            float(rec["maturity_years"]),
                            float(rec["strike"]),
                            float(rec["implied_vol"]),
                        )
                    )
                except (TypeError, ValueError) as exc:
                    raise SchemaError(f"quotes[{i}]", f"bad row {rec}") from exc
    except OSError as exc:
        raise SchemaError("quotes", f"cannot read {path}: {exc.strerror}") from exc
    if not out:
        raise SchemaError("quotes", "no rows")
    return out


def _calib_config(path: str | None) -> calibration.CalibConfig:
    if path is None:
        return calibration.CalibConfig()
    obj = _load_json(path, "config")
    if not isinstance(obj, dict):
        raise SchemaError("config", "expected a JSON object")
    try:
        kwargs = {}
        if "jump_init" in obj:
            kwargs["jump_init"] = tuple(obj["jump_init"])
        if "jump_bounds" in obj:
            kwargs["jump_bounds"] = tuple(tuple(b) for b in obj["jump_bounds"])
        if "nu_bounds" in obj:
            kwargs["nu_bounds"] = tuple(obj["nu_bounds"])
        if "beta_bounds" in obj:
            kwargs["beta_bounds"] = tuple(obj["beta_bounds"])
        if "restarts" in obj:
            kwargs["restarts"] = int(obj["restarts"])
        if "restart_seed" in obj:
            kwargs["restart_seed"] = int(obj["restart_seed"])
        for key in ("lm", "outer"):
            if key in obj:
                kwargs[key] = calibration.LmConfig(**obj[key])
        return calibration.CalibConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise SchemaError("config", str(exc)) from exc


def cmd_calibrate(args) -> int:
    quotes = _read_quotes(args.quotes)
    rate = (
        calibration.zero_curve()
        if args.rate is None
        else _curve_from_file(args.rate, "rate")
    )
    dividend = (
        calibration.zero_curve()
        if args.dividend is None
        else _curve_from_file(args.dividend, "dividend")
    )
    surface = calibration.VolSurface(tuple(quotes), args.spot, rate, dividend)
    config = _calib_config(args.config)
    result = calibration.bootstrap_calibrate(surface, config)
    log.info("objective trace: %s", ", ".join(f"{c:.3e}" for c in result.objective_trace))

    out = model_to_dict(result.model)
    out["calibration"] = {
        "objective": result.objective,
        "objective_trace": list(result.objective_trace),
        "degraded_buckets": list(result.degraded),
        "residuals_bp": [list(map(float, row)) for row in result.residuals_bp],
    }
    _write_text(args.out, json.dumps(out, indent=2, sort_keys=True) + "\n")

    residuals_path = args.residuals or (args.out + ".residuals.csv")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["maturity", "strike", "market_iv", "model_iv", "residual_bp"])
    for t, row in zip(surface.maturities, result.residuals_bp):
        for q, res in zip(surface.quotes_at(t), row):
            writer.writerow(
                [_fmt(t), _fmt(q.strike), _fmt(q.vol), _fmt(q.vol + res / 1e4), _fmt(res)]
            )
    _write_text(residuals_path, buf.getvalue())
    return 0


def _curve_from_file(path: str, what: str):
    from .model import _curve_from_dict

    return _curve_from_dict(_load_json(path, what), what)


def cmd_diagnostics(args) -> int:
    model = _load_model(args.model)
    d = expansion.diagnostics(model, args.maturity)
    print(
        json.dumps(
            {
                "m0": d.m0,
                "m1": d.m1,
                "mj": d.mj,
                "sigma_inf": d.sigma_inf,
                "envelope_smooth": d.envelope_smooth,
                "envelope_vanilla": d.envelope_vanilla,
                "envelope_binary": d.envelope_binary,
            },
            sort_keys=True,
        )
    )
    return 0


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jumpsmile",
        description="Price and calibrate local-volatility models with Poisson jumps.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log INFO to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price", help="price one option with the expansion")
    p.add_argument("--model", required=True, help="model JSON file")
    p.add_argument("--payoff", required=True, choices=["call", "put", "digital"])
    p.add_argument("--strike", required=True, type=float)
    p.add_argument("--maturity", required=True, type=float, help="years")
    p.add_argument("--breakdown", action="store_true", help="print the three-term split")
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("smile", help="implied-vol grid as CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--maturities", required=True, help="comma list, years")
    p.add_argument(
        "--strikes",
        required=True,
        help="comma list of strikes relative to spot (0.85, or 85 for 85%%)",
    )
    p.add_argument("--out", default="-", help="output CSV path, '-' for stdout")
    p.set_defaults(func=cmd_smile)

    p = sub.add_parser("validate", help="expansion vs Monte Carlo error table (bp)")
    p.add_argument("--model", required=True)
    p.add_argument("--grid", required=True, help="CSV with columns maturity,strike (relative)")
    p.add_argument("--paths", type=int, default=2_000_000)
    p.add_argument("--steps", type=int, default=250, help="steps per year")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=float, default=1e10, help="max paths*steps per maturity")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("calibrate", help="bootstrap-calibrate a quote surface")
    p.add_argument("--quotes", required=True, help="CSV: maturity_years,strike,implied_vol")
    p.add_argument("--spot", required=True, type=float)
    p.add_argument("--rate", help="rate curve JSON {times, values}")
    p.add_argument("--dividend", help="dividend curve JSON {times, values}")
    p.add_argument("--config", help="calibration config JSON")
    p.add_argument("--out", required=True, help="result JSON (reusable as --model)")
    p.add_argument("--residuals", help="residuals CSV (default: <out>.residuals.csv)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("diagnostics", help="coefficient constants and error envelopes")
    p.add_argument("--model", required=True)
    p.add_argument("--maturity", required=True, type=float)
    p.set_defaults(func=cmd_diagnostics)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr
    )
    try:
        return args.func(args)
    except SchemaError as exc:
        print(json.dumps({"error": "schema", "detail": str(exc)}), file=sys.stderr)
        return 2
    except EngineError as exc:
        payload = {"error": type(exc).__name__, "detail": str(exc)}
        if isinstance(exc, ImpliedVolError):
            payload["band"] = [exc.lower, exc.upper]
        print(json.dumps(payload), file=sys.stderr)
        return 1
    except ValueError as exc:
        print(json.dumps({"error": "ValueError", "detail": str(exc)}), file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
