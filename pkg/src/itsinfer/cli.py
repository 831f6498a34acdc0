"""Command-line interface: ``itsinfer <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 no model
converged.
"""

from __future__ import annotations

import argparse
import datetime as dt
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from .config import (ConfigError, ScenarioConfig, enumerate_universe, load_analysis_config,
                     load_scenario_config)
from .diagnostics import DiagnosticsConfig, UndefinedAcfError, acf, adf_test, pacf, qq_data, \
    white_noise_verdict
from .io import DataError, ingest_csv, read_csv, write_csv, write_json, write_series_csv
from .multiplicity import PreconditionError
from .pipeline import TotalConvergenceError, analyze, run_pipeline, write_report
from .sarimax import InterventionSpec, SarimaOrder, SarimaParams, fit
from .series import SeriesLengthError
from .simulation import (GeneratorSpec, InterventionEffect, gen_sarima, large_daily_spec,
                         mc_error_rate_study)

logger = logging.getLogger("itsinfer")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_CONVERGENCE = 0, 2, 3, 4


def _analysis_config(args, **overrides):
    kw = {}
    if getattr(args, "out", None):
        kw["output_dir"] = args.out
    if getattr(args, "seed", None) is not None:
        kw["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        kw["workers"] = args.workers
    kw.update(overrides)
    cfg = load_analysis_config(args.config, overrides=kw)
    if "seed" in kw:
        cfg = replace(cfg, bootstrap=replace(cfg.bootstrap, seed=cfg.seed))
    if getattr(args, "replications", None):
        cfg = replace(cfg, bootstrap=replace(cfg.bootstrap, replications=args.replications))
    return cfg


def cmd_fit(args) -> int:
    cfg = _analysis_config(args)
    order = SarimaOrder.parse(args.order, cfg.fit.parameter_max_order)
    series, X = ingest_csv(cfg.data_path, cfg)
    res = fit(series, X, order, cfg.fit)
    print(f"model {order.label}  converged={res.converged}  css={res.css:.6g}  "
          f"sigma2={res.sigma2:.6g}  n_effective={res.n_effective}  se={res.se_method}")
    width = max(len(n) for n in res.names)
    for n, e, s, t in zip(res.names, res.estimates, res.std_errors, res.t_stats):
        print(f"  {n:<{width}}  {e:14.6g}  {s:12.6g}  {t:9.3f}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_csv(os.path.join(args.out, "coefficients.csv"), ["name", "estimate", "se", "t"],
                  zip(res.names, res.estimates, res.std_errors, res.t_stats))
        write_csv(os.path.join(args.out, "residuals.csv"), ["date", "residual", "fitted"],
                  zip(series.dates[order.span:], res.residuals, res.fitted))
    return EXIT_OK if res.converged else EXIT_CONVERGENCE


def cmd_universe(args, corrections=None) -> int:
    overrides = {"correction": corrections} if corrections else {}
    cfg = _analysis_config(args, **overrides)
    universe = enumerate_universe(cfg)
    print(f"universe: {len(universe)} models "
          f"({len(cfg.universe.p)} x {len(cfg.universe.d)} x {len(cfg.universe.q)})",
          file=sys.stderr)
    series, X = ingest_csv(cfg.data_path, cfg)
    report = analyze(series, X, cfg, universe)
    paths = write_report(report, series, cfg.output_dir)
    for row in report.decision_table():
        dec = " ".join(f"{k}={'R' if v else '-'}" for k, v in sorted(row["decisions"].items()))
        print(f"{row['model']:<22} {row['coefficient']:12.5g} {row['t']:8.3f}  {dec}")
    if report.maxt is not None:
        print(f"max-t threshold {report.maxt.threshold:.4f} "
              f"(Bonferroni {report.bonferroni_t:.4f}); "
              f"negative signs {report.signs.fraction_negative:.3f}")
    print(f"wrote {len(paths)} files to {cfg.output_dir}", file=sys.stderr)
    return EXIT_OK


def cmd_maxt(args) -> int:
    return cmd_universe(args, corrections="maxt")


def scenario_generator(sc: ScenarioConfig, seed: int | None = None) -> GeneratorSpec:
    seed = sc.seed if seed is None else seed
    if sc.large_daily:
        omega = sc.interventions[0].omega if sc.interventions else -634.0
        return large_daily_spec(omega=omega, n=sc.n, seed=seed, start_date=sc.start_date,
                                burn_in=sc.burn_in)
    effects = []
    for iv in sc.interventions:
        spec = InterventionSpec(iv.name, iv.kind, sc.start_date + dt.timedelta(days=iv.onset))
        effects.append(InterventionEffect(spec, iv.omega, iv.delta))
    params = SarimaParams([sc.level], sc.phi, sc.theta, sc.seasonal_phi, sc.seasonal_theta,
                          sc.sigma ** 2)
    return GeneratorSpec(sc.order, params, sc.n, sc.burn_in, tuple(effects), seed, sc.start_date)


def cmd_simulate(args) -> int:
    sc = load_scenario_config(args.scenario)
    try:
        gen = scenario_generator(sc, args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    y = gen_sarima(gen)
    X = gen.regressors(y)
    write_series_csv(args.out, y, {n: X.column(n) for n in X.names} if args.regressors else None)
    print(f"wrote {len(y)} observations to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_mc_validate(args) -> int:
    sc = load_scenario_config(args.scenario)
    if args.replications:
        sc = replace(sc, replications=args.replications)
    try:
        gen = scenario_generator(sc, args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    universe = enumerate_universe(sc.universe, sc.fit.parameter_max_order)

    def progress(i, n):
        if i % max(1, n // 20) == 0:
            print(f"  replication {i}/{n}", file=sys.stderr)

    rep = mc_error_rate_study(universe, gen, sc.corrections, sc.replications, sc.alpha,
                              dwb=sc.bootstrap, fit_config=sc.fit, workers=sc.workers,
                              progress=progress)
    os.makedirs(args.out, exist_ok=True)
    write_csv(os.path.join(args.out, "error_rates.csv"),
              ["correction", "fwer", "fwer_se", "fdr", "fdr_se", "rejection_rate"],
              rep.summary_rows())
    labels = [o.label for o in universe]
    rows = []
    for r in rep.replicates:
        for j, lab in enumerate(labels):
            rows.append([r.index, lab, r.tstats[j], r.converged[j]]
                        + [r.decisions[c][j] for c in rep.corrections])
    write_csv(os.path.join(args.out, "replicates.csv"),
              ["replicate", "model", "t", "converged"] + list(rep.corrections), rows)
    kind = "FWER/FDR" if rep.null_true else "rejection rate"
    for c, fwer, fse, fdr, _, rr in rep.summary_rows():
        val = f"{fwer:.3f} (se {fse:.3f}) FDR {fdr:.3f}" if rep.null_true else f"{rr:.3f}"
        print(f"{c:<11} {kind}: {val}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    header, rows = read_csv(args.residuals)
    col = args.column
    if col not in header:
        raise DataError(f"column {col!r} not in header {header}")
    i = header.index(col)
    try:
        x = np.array([float(r[i]) for r in rows])
    except ValueError as exc:
        raise DataError(f"non-numeric residual: {exc}") from None
    x = x[np.isfinite(x)]
    cfg = DiagnosticsConfig(max_lag=args.max_lag, ljung_box_lag=args.max_lag)
    a = acf(x, args.max_lag)
    pa = pacf(x, args.max_lag)
    v = white_noise_verdict(x, args.fitted_params, cfg)
    adf = adf_test(x, args.adf_lags, args.adf_trend)
    print(f"n={x.size}  max|acf|={v.max_abs_acf:.4f}  band=+/-{a.band:.4f}  "
          f"Ljung-Box Q={v.ljung_box_stat:.3f} p={v.ljung_box_pvalue:.4f}  "
          f"white noise: {'yes' if v.passes else 'no'}")
    print(f"ADF ({adf.trend}, {adf.lag_order} lags): {adf.statistic:.3f}  "
          + "  ".join(f"{int(k * 100)}%: {'reject' if r else 'keep'}" for k, r in adf.reject.items()))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_csv(os.path.join(args.out, "acf.csv"), ["lag", "acf", "pacf", "band"],
                  ((k, r, p, a.band) for k, r, p in zip(a.lags, a.autocorrelations, pa)))
        write_csv(os.path.join(args.out, "qq.csv"), ["theoretical", "sample"], qq_data(x))
        write_json(os.path.join(args.out, "verdict.json"), {
            "n": x.size, "max_abs_acf": v.max_abs_acf, "threshold": v.threshold,
            "ljung_box_q": v.ljung_box_stat, "ljung_box_p": v.ljung_box_pvalue,
            "white_noise": v.passes, "adf_statistic": adf.statistic,
            "adf_reject": {str(k): r for k, r in adf.reject.items()}})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="itsinfer", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def analysis(name, help_):
        s = sub.add_parser(name, help=help_)
        s.add_argument("config", help="analysis configuration file")
        s.add_argument("--out", help="output directory (overrides [run] output_dir)")
        s.add_argument("--seed", type=int)
        s.add_argument("--workers", type=int)
        return s

    s = analysis("fit", "fit one model")
    s.add_argument("--order", required=True, help='e.g. "(0,1,1)x(0,1,1)_7"')
    s.set_defaults(func=cmd_fit)
    s = analysis("universe", "fit the model universe and apply corrections")
    s.add_argument("--replications", type=int, help="bootstrap replications")
    s.set_defaults(func=cmd_universe)
    s = analysis("maxt", "max-t bootstrap calibration only")
    s.add_argument("--replications", type=int, help="bootstrap replications")
    s.set_defaults(func=cmd_maxt)

    s = sub.add_parser("simulate", help="generate a synthetic series")
    s.add_argument("scenario")
    s.add_argument("--out", required=True, help="output CSV")
    s.add_argument("--seed", type=int)
    s.add_argument("--regressors", action="store_true", help="also write regressor columns")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("mc-validate", help="Monte Carlo error-rate study")
    s.add_argument("scenario")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--seed", type=int)
    s.add_argument("--replications", type=int)
    s.set_defaults(func=cmd_mc_validate)

    s = sub.add_parser("diagnose", help="diagnostics on a residual file")
    s.add_argument("residuals", help="CSV with a residual column")
    s.add_argument("--column", default="residual")
    s.add_argument("--fitted-params", type=int, default=0)
    s.add_argument("--max-lag", type=int, default=28)
    s.add_argument("--adf-lags", type=int, default=0)
    s.add_argument("--adf-trend", default="constant",
                   choices=["none", "constant", "constant_and_trend"])
    s.add_argument("--out", help="output directory for plot data")
    s.set_defaults(func=cmd_diagnose)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, SeriesLengthError, UndefinedAcfError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TotalConvergenceError, PreconditionError) as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
