"""End-to-end universe analysis: fit, diagnose, correct, calibrate, report."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import numpy as np

from .config import AnalysisConfig, enumerate_universe
from .diagnostics import WhiteNoiseVerdict, acf, qq_data, white_noise_verdict
from .io import ingest_csv, write_csv, write_json
from .multiplicity import (CorrectionResult, MaxTResult, SignStability, TestFamily,
                           benjamini_hochberg, bonferroni, bonferroni_t_threshold, fit_universe,
                           holm, max_t, select_reference, sign_stability)
from .sarimax import FitResult, RegressorMatrix, SarimaOrder
from .series import TimeSeries

logger = logging.getLogger(__name__)


class TotalConvergenceError(RuntimeError):
    """No model in the universe converged."""


@dataclass(frozen=True)
class UniverseReport:
    """Per-model fits plus corrected inference for the target coefficient."""

    universe: tuple
    fits: tuple
    verdicts: tuple
    target: str
    alpha: float
    family: TestFamily
    corrections: dict
    bonferroni_t: float
    reference: int
    maxt: MaxTResult | None
    signs: SignStability | None

    @property
    def labels(self) -> tuple:
        return tuple(o.label for o in self.universe)

    def decision_table(self) -> list[dict]:
        rows = []
        for j, (o, f) in enumerate(zip(self.universe, self.fits)):
            row = {
                "model": o.label,
                "converged": f.converged,
                "coefficient": f.coef(self.target),
                "se": f.se(self.target),
                "t": f.tstat(self.target),
                "p": float(self.family.pvalues[j]),
                "bonferroni_t_threshold": self.bonferroni_t,
                "decisions": {c: bool(r.reject[j]) for c, r in self.corrections.items()},
            }
            if self.maxt is not None:
                row["maxt_threshold"] = self.maxt.threshold
                row["maxt_ci"] = [float(self.maxt.ci_lower[j]), float(self.maxt.ci_upper[j])]
                row["decisions"]["maxt"] = bool(self.maxt.reject[j])
            rows.append(row)
        return rows


def analyze(series: TimeSeries, regressors: RegressorMatrix, config: AnalysisConfig,
            universe: list[SarimaOrder] | None = None) -> UniverseReport:
    """Fit the universe and apply the configured corrections (no file output)."""
    universe = universe or enumerate_universe(config)
    target = config.target_name
    logger.info("fitting %d models", len(universe))
    fits = fit_universe(series, regressors, universe, config.fit)
    if not any(f.converged for f in fits):
        raise TotalConvergenceError("no model in the universe converged")
    for f in fits:
        if not f.converged:
            logger.warning("%s did not converge (%s)", f.order.label, f.message)
    verdicts = []
    for f in fits:
        try:
            verdicts.append(white_noise_verdict(f.residuals, f.order.n_arma, config.diagnostics))
        except ValueError:
            verdicts.append(None)
    t = np.array([f.tstat(target) if f.converged else np.nan for f in fits])
    dof = None
    if config.t_convention.endswith("-t"):
        dof = min(f.n_effective - len(f.names) for f in fits if f.converged)
    family = TestFamily.from_tstats(t, labels=[o.label for o in universe], dof=dof)
    corrections: dict[str, CorrectionResult] = {}
    for c in config.corrections:
        if c == "bonferroni":
            corrections[c] = bonferroni(family, config.alpha)
        elif c == "holm":
            corrections[c] = holm(family, config.alpha)
        elif c == "bh":
            corrections[c] = benjamini_hochberg(family, config.alpha)
    bonf_t = bonferroni_t_threshold(len(universe), config.alpha, config.t_convention, dof)
    ref = select_reference(fits)
    mt = signs = None
    if "maxt" in config.corrections:
        mt = max_t(series, regressors, universe, target, config.alpha, config.bootstrap,
                   config.fit, base_fits=fits, reference=ref, workers=config.workers)
        signs = sign_stability(mt.grid)
    return UniverseReport(tuple(universe), tuple(fits), tuple(verdicts), target, config.alpha,
                          family, corrections, bonf_t, ref, mt, signs)


def write_report(report: UniverseReport, series: TimeSeries, out_dir: str) -> list[str]:
    """Write the report files; returns their paths in write order."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []

    def out(name):
        p = os.path.join(out_dir, name)
        paths.append(p)
        return p

    rows = []
    for o, f, v in zip(report.universe, report.fits, report.verdicts):
        rows.append([o.label, f.converged, f.se_method, f.css, f.sigma2, f.n_effective, f.aic,
                     f.gradient_norm, f.coef(report.target), f.se(report.target),
                     f.tstat(report.target),
                     v.max_abs_acf if v else np.nan, v.ljung_box_stat if v else np.nan,
                     v.ljung_box_pvalue if v else np.nan, v.passes if v else False])
    write_csv(out("models.csv"),
              ["model", "converged", "se_method", "css", "sigma2", "n_effective", "aic",
               "gradient_norm", "coefficient", "se", "t", "max_abs_acf", "ljung_box_q",
               "ljung_box_p", "white_noise"], rows)

    write_csv(out("coefficients.csv"), ["model", "name", "estimate", "se", "t"],
              ([o.label, n, e, s, t] for o, f in zip(report.universe, report.fits)
               for n, e, s, t in zip(f.names, f.estimates, f.std_errors, f.t_stats)))

    decisions = {
        "target": report.target,
        "alpha": report.alpha,
        "m": len(report.universe),
        "reference_model": report.universe[report.reference].label,
        "bonferroni_t_threshold": report.bonferroni_t,
        "corrections": sorted(list(report.corrections) + (["maxt"] if report.maxt else [])),
        "models": report.decision_table(),
    }
    if report.maxt is not None:
        mt = report.maxt
        decisions["maxt"] = {
            "threshold": mt.threshold,
            "replications": int(mt.max_stats.size),
            "signed_quantiles": list(mt.signed_quantiles),
            "convergence_failure_rate": mt.failure_rate,
        }
        decisions["sign_stability"] = {
            "fraction_negative": report.signs.fraction_negative,
            "fraction_positive": report.signs.fraction_positive,
            "zero": report.signs.n_zero,
            "missing": report.signs.n_missing,
        }
    write_json(out("decisions.json"), decisions)

    if report.maxt is not None:
        mt = report.maxt
        write_csv(out("maxt_dist.csv"), ["replicate", "max_abs_t"], enumerate(mt.max_stats))
        counts, edges = np.histogram(mt.max_stats, bins="auto")
        write_csv(out("maxt_hist.csv"), ["bin_left", "bin_right", "count"],
                  zip(edges[:-1], edges[1:], counts))
        write_csv(out("coef_grid.csv"), ["model"] + [f"r{b}" for b in range(mt.grid.shape[1])],
                  ([lab] + list(row) for lab, row in zip(mt.labels, mt.grid)))
        signs_rows = []
        for lab, row in zip(mt.labels, mt.grid):
            fin = row[np.isfinite(row)]
            signs_rows.append([lab, int(np.sum(fin < 0)), int(np.sum(fin > 0)),
                               int(np.sum(fin == 0)), int(row.size - fin.size)])
        s = report.signs
        signs_rows.append(["all", int(round(s.fraction_negative * s.n)),
                           int(round(s.fraction_positive * s.n)), s.n_zero, s.n_missing])
        write_csv(out("signs.csv"), ["model", "negative", "positive", "zero", "missing"], signs_rows)
        write_csv(out("coef_hist.csv"), ["bin_left", "bin_right", "count"],
                  zip(s.bin_edges[:-1], s.bin_edges[1:], s.counts))

    ref = report.fits[report.reference]
    span = ref.order.span
    write_csv(out("fitted.csv"), ["date", "observed", "fitted"],
              zip(series.dates[span:], series.values[span:], ref.fitted))
    acf_rows = []
    for o, f in zip(report.universe, report.fits):
        if not f.converged:
            continue
        try:
            a = acf(f.residuals, min(28, f.residuals.size - 1))
        except ValueError:
            continue
        acf_rows.extend([o.label, k, r, b] for k, r, b in a.to_rows())
    write_csv(out("acf.csv"), ["model", "lag", "acf", "band"], acf_rows)
    write_csv(out("qq.csv"), ["theoretical", "sample"], qq_data(ref.residuals))
    return paths


def run_pipeline(config: AnalysisConfig) -> UniverseReport:
    """Ingest, analyze and write every report file under ``config.output_dir``."""
    series, X = ingest_csv(config.data_path, config)
    report = analyze(series, X, config)
    write_report(report, series, config.output_dir)
    return report
