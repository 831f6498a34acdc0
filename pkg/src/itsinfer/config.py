"""Typed key-value configuration files with sections.

Grammar (an INI dialect read with :mod:`configparser`)::

    # comment
    [section]
    key = value

Values are typed by key: integers, floats, booleans (true/false), dates
(YYYY-MM-DD), comma-separated lists, and seasonal tuples ``(P,D,Q)``.
Intervention and covariate sections are named ``[intervention NAME]`` and
``[covariate NAME]``; generator interventions are
``[generator.intervention NAME]``. Unknown sections or keys are errors.
See the README for the full key reference.
"""

from __future__ import annotations

import configparser
import datetime as dt
import os
import re
from dataclasses import dataclass, field, fields, replace

from .diagnostics import DiagnosticsConfig
from .multiplicity import DwbConfig
from .sarimax import CalendarCovariate, FitConfig, InterventionSpec, SarimaOrder


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


CORRECTION_CHOICES = ("bonferroni", "holm", "bh", "maxt", "all")
T_CONVENTIONS = ("two-sided-normal", "one-sided-normal", "two-sided-t", "one-sided-t")


def parse_int_list(text: str) -> tuple:
    items = [s.strip() for s in text.split(",") if s.strip()]
    try:
        return tuple(int(s) for s in items)
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


def parse_float_list(text: str) -> tuple:
    items = [s.strip() for s in text.split(",") if s.strip()]
    try:
        return tuple(float(s) for s in items)
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def parse_date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise ConfigError(f"expected an ISO date YYYY-MM-DD, got {text!r}") from None


def parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"expected true/false, got {text!r}")


def parse_seasonal(text: str) -> tuple:
    m = re.fullmatch(r"\(?\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*\)?", text.strip())
    if not m:
        raise ConfigError(f"expected a seasonal order (P,D,Q), got {text!r}")
    return tuple(int(g) for g in m.groups())


def read_holidays(path) -> frozenset:
    """One ISO date per line; blank lines and ``#`` comments are skipped."""
    out = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                out.add(dt.date.fromisoformat(line))
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: not an ISO date: {line!r}") from None
    return frozenset(out)


WEEKDAYS = {"mon": 0, "tue": 1, "wed": 2, "thu": 3, "fri": 4, "sat": 5, "sun": 6}


def parse_weekdays(text: str) -> tuple:
    out = []
    for tok in text.split(","):
        tok = tok.strip().lower()
        if not tok:
            continue
        if tok[:3] in WEEKDAYS:
            out.append(WEEKDAYS[tok[:3]])
        else:
            try:
                v = int(tok)
            except ValueError:
                raise ConfigError(f"unknown weekday {tok!r}") from None
            if not 0 <= v <= 6:
                raise ConfigError(f"weekday {v} outside 0..6 (Monday=0)")
            out.append(v)
    return tuple(sorted(set(out)))


@dataclass(frozen=True)
class UniverseConfig:
    p: tuple = (0, 1, 2)
    d: tuple = (0, 1, 2)
    q: tuple = (0, 1, 2)
    seasonal: tuple = (0, 1, 1)
    k: int = 7

    @property
    def size(self) -> int:
        return len(self.p) * len(self.d) * len(self.q)


@dataclass(frozen=True)
class AnalysisConfig:
    """Everything a ``universe`` run needs."""

    data_path: str = ""
    date_column: str = "date"
    value_column: str = "value"
    interventions: tuple = ()
    covariates: tuple = ()
    universe: UniverseConfig = field(default_factory=UniverseConfig)
    alpha: float = 0.05
    correction: str = "all"
    target: str = ""
    t_convention: str = "two-sided-normal"
    bootstrap: DwbConfig = field(default_factory=DwbConfig)
    fit: FitConfig = field(default_factory=FitConfig)
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    seed: int = 0
    workers: int = 1
    output_dir: str = "out"

    @property
    def corrections(self) -> tuple:
        if self.correction == "all":
            return ("bonferroni", "holm", "bh", "maxt")
        return (self.correction,)

    def validate(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.correction not in CORRECTION_CHOICES:
            raise ConfigError(f"correction must be one of {CORRECTION_CHOICES}")
        if self.t_convention not in T_CONVENTIONS:
            raise ConfigError(f"t_convention must be one of {T_CONVENTIONS}")
        names = [i.name for i in self.interventions] + [c.name for c in self.covariates]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate regressor names in {names}")
        if self.target and self.target not in names:
            raise ConfigError(f"target {self.target!r} is not an intervention or covariate")
        if not self.target and not self.interventions:
            raise ConfigError("no intervention to test; add an [intervention NAME] section")
        for name in ("p", "d", "q"):
            vals = getattr(self.universe, name)
            if not vals:
                raise ConfigError(f"universe range {name} is empty")
            if min(vals) < 0 or max(vals) > self.fit.parameter_max_order:
                raise ConfigError(f"universe range {name}={vals} outside 0..{self.fit.parameter_max_order}")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        return self

    @property
    def target_name(self) -> str:
        return self.target or self.interventions[0].name


def _typed(dc_type, section: configparser.SectionProxy, casts: dict, where: str):
    kwargs = {}
    allowed = {f.name for f in fields(dc_type)}
    for key, raw in section.items():
        if key not in allowed or key not in casts:
            raise ConfigError(f"[{where}]: unknown key {key!r}")
        try:
            kwargs[key] = casts[key](raw)
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"[{where}] {key}: {exc}") from None
    try:
        return dc_type(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[{where}]: {exc}") from None


FIT_KEYS = {"max_iterations": int, "tolerance": float, "finite_difference_step": float,
            "parameter_max_order": int, "min_obs_per_param": int, "simplex_step": float,
            "hessian_step": float, "gradient_tolerance": float}
BOOT_KEYS = {"bandwidth": int, "replications": int, "seed": int, "kernel": str}
DIAG_KEYS = {"max_lag": int, "acf_threshold": float, "ljung_box_lag": int}


def _reader(text: str | None = None, path=None) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        if path is not None:
            with open(path, encoding="utf-8") as fh:
                cp.read_file(fh, source=str(path))
        else:
            cp.read_string(text or "")
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    return cp


def _intervention(name: str, sec) -> InterventionSpec:
    allowed = {"kind", "onset", "end", "expected_sign"}
    for k in sec:
        if k not in allowed:
            raise ConfigError(f"[intervention {name}]: unknown key {k!r}")
    if "onset" not in sec:
        raise ConfigError(f"[intervention {name}]: onset is required")
    sign = sec.get("expected_sign", "").strip()
    try:
        return InterventionSpec(
            name, sec.get("kind", "step").strip(), parse_date(sec["onset"]),
            int(sign) if sign else None, parse_date(sec["end"]) if "end" in sec else None)
    except ValueError as exc:
        raise ConfigError(f"[intervention {name}]: {exc}") from None


def _covariate(name: str, sec, base_dir: str) -> CalendarCovariate:
    allowed = {"rule", "weekdays", "holidays", "holidays_file"}
    for k in sec:
        if k not in allowed:
            raise ConfigError(f"[covariate {name}]: unknown key {k!r}")
    rule = sec.get("rule", "calendar").strip()
    if rule == "sunday_or_holiday":
        weekdays = (6,)
    elif rule == "calendar":
        weekdays = parse_weekdays(sec.get("weekdays", ""))
    else:
        raise ConfigError(f"[covariate {name}]: unknown rule {rule!r}")
    if "weekdays" in sec and rule == "sunday_or_holiday":
        raise ConfigError(f"[covariate {name}]: sunday_or_holiday fixes the weekdays")
    hol = set()
    if "holidays" in sec:
        hol |= {parse_date(s) for s in sec["holidays"].split(",") if s.strip()}
    if "holidays_file" in sec:
        hol |= read_holidays(os.path.join(base_dir, sec["holidays_file"].strip()))
    return CalendarCovariate(name, weekdays, frozenset(hol))


def load_analysis_config(path=None, text: str | None = None, overrides: dict | None = None) -> AnalysisConfig:
    """Parse an analysis configuration file (or string)."""
    cp = _reader(text, path)
    base_dir = os.path.dirname(os.path.abspath(path)) if path is not None else os.getcwd()
    kw: dict = {}
    interventions, covariates = [], []
    for sec_name in cp.sections():
        sec = cp[sec_name]
        head, _, name = sec_name.partition(" ")
        if head == "intervention" and name:
            interventions.append(_intervention(name.strip(), sec))
        elif head == "covariate" and name:
            covariates.append(_covariate(name.strip(), sec, base_dir))
        elif sec_name == "data":
            for k, v in sec.items():
                if k == "path":
                    kw["data_path"] = os.path.join(base_dir, v.strip())
                elif k in ("date_column", "value_column"):
                    kw[k] = v.strip()
                else:
                    raise ConfigError(f"[data]: unknown key {k!r}")
        elif sec_name == "universe":
            ukw = {}
            for k, v in sec.items():
                if k in ("p", "d", "q"):
                    ukw[k] = parse_int_list(v)
                elif k == "seasonal":
                    ukw[k] = parse_seasonal(v)
                elif k == "k":
                    ukw[k] = int(v)
                else:
                    raise ConfigError(f"[universe]: unknown key {k!r}")
            kw["universe"] = UniverseConfig(**ukw)
        elif sec_name == "inference":
            for k, v in sec.items():
                if k == "alpha":
                    kw[k] = float(v)
                elif k in ("correction", "target", "t_convention"):
                    kw[k] = v.strip()
                else:
                    raise ConfigError(f"[inference]: unknown key {k!r}")
        elif sec_name == "bootstrap":
            kw["bootstrap"] = _typed(DwbConfig, sec, BOOT_KEYS, "bootstrap")
        elif sec_name == "fit":
            kw["fit"] = _typed(FitConfig, sec, FIT_KEYS, "fit")
        elif sec_name == "diagnostics":
            kw["diagnostics"] = _typed(DiagnosticsConfig, sec, DIAG_KEYS, "diagnostics")
        elif sec_name == "run":
            for k, v in sec.items():
                if k in ("seed", "workers"):
                    kw[k] = int(v)
                elif k == "output_dir":
                    kw[k] = os.path.join(base_dir, v.strip())
                else:
                    raise ConfigError(f"[run]: unknown key {k!r}")
        else:
            raise ConfigError(f"unknown section [{sec_name}]")
    kw["interventions"] = tuple(interventions)
    kw["covariates"] = tuple(covariates)
    cfg = AnalysisConfig(**kw)
    if not (cp.has_section("bootstrap") and "seed" in cp["bootstrap"]):
        # all randomness flows from the single run seed unless overridden
        cfg = replace(cfg, bootstrap=replace(cfg.bootstrap, seed=cfg.seed))
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg.validate()


def enumerate_universe(config: AnalysisConfig | UniverseConfig, max_order: int | None = None) -> list:
    """Universe members in lexicographic (p, d, q) order."""
    if isinstance(config, AnalysisConfig):
        max_order = config.fit.parameter_max_order if max_order is None else max_order
        config = config.universe
    max_order = 3 if max_order is None else max_order
    for name in ("p", "d", "q"):
        if not getattr(config, name):
            raise ConfigError(f"universe range {name} is empty")
    P, D, Q = config.seasonal
    try:
        return [SarimaOrder(p, d, q, P, D, Q, config.k, max_order=max_order)
                for p in sorted(set(config.p)) for d in sorted(set(config.d))
                for q in sorted(set(config.q))]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class ScenarioIntervention:
    name: str
    kind: str
    onset: int
    omega: float
    delta: float = 0.0


@dataclass(frozen=True)
class ScenarioConfig:
    """Generator and Monte Carlo study settings for ``simulate`` and ``mc-validate``."""

    order: SarimaOrder = SarimaOrder(0, 0, 0, 0, 1, 1, 7)
    phi: tuple = ()
    theta: tuple = ()
    seasonal_phi: tuple = ()
    seasonal_theta: tuple = (0.6,)
    sigma: float = 1.0
    level: float = 0.0
    n: int = 400
    burn_in: int = 500
    start_date: dt.date = dt.date(2000, 1, 1)
    interventions: tuple = ()
    large_daily: bool = False
    seed: int = 0
    replications: int = 100
    alpha: float = 0.05
    corrections: tuple = ("naive", "bonferroni", "holm", "bh", "maxt")
    universe: UniverseConfig = field(default_factory=UniverseConfig)
    bootstrap: DwbConfig = field(default_factory=DwbConfig)
    fit: FitConfig = field(default_factory=FitConfig)
    workers: int = 1


GEN_KEYS = {"order": lambda v: SarimaOrder.parse(v), "phi": parse_float_list,
            "theta": parse_float_list, "seasonal_phi": parse_float_list,
            "seasonal_theta": parse_float_list, "sigma": float, "level": float, "n": int,
            "burn_in": int, "start_date": parse_date, "large_daily": parse_bool, "seed": int}
STUDY_KEYS = {"replications": int, "alpha": float, "workers": int,
              "corrections": lambda v: tuple(s.strip() for s in v.split(",") if s.strip())}


def load_scenario_config(path=None, text: str | None = None) -> ScenarioConfig:
    """Parse a scenario file: ``[generator]``, ``[generator.intervention NAME]``,
    ``[study]``, ``[universe]``, ``[bootstrap]``, ``[fit]``."""
    cp = _reader(text, path)
    kw: dict = {}
    ivs = []
    for sec_name in cp.sections():
        sec = cp[sec_name]
        head, _, name = sec_name.partition(" ")
        if head == "generator.intervention" and name:
            allowed = {"kind", "onset", "omega", "delta"}
            bad = set(sec) - allowed
            if bad:
                raise ConfigError(f"[{sec_name}]: unknown keys {sorted(bad)}")
            try:
                ivs.append(ScenarioIntervention(name.strip(), sec.get("kind", "step").strip(),
                                                int(sec["onset"]), float(sec.get("omega", "0")),
                                                float(sec.get("delta", "0"))))
            except (KeyError, ValueError) as exc:
                raise ConfigError(f"[{sec_name}]: {exc}") from None
        elif sec_name in ("generator", "study"):
            casts = GEN_KEYS if sec_name == "generator" else STUDY_KEYS
            for k, v in sec.items():
                if k not in casts:
                    raise ConfigError(f"[{sec_name}]: unknown key {k!r}")
                try:
                    kw[k] = casts[k](v)
                except ValueError as exc:
                    raise ConfigError(f"[{sec_name}] {k}: {exc}") from None
        elif sec_name == "universe":
            ukw = {}
            for k, v in sec.items():
                if k in ("p", "d", "q"):
                    ukw[k] = parse_int_list(v)
                elif k == "seasonal":
                    ukw[k] = parse_seasonal(v)
                elif k == "k":
                    ukw[k] = int(v)
                else:
                    raise ConfigError(f"[universe]: unknown key {k!r}")
            kw["universe"] = UniverseConfig(**ukw)
        elif sec_name == "bootstrap":
            kw["bootstrap"] = _typed(DwbConfig, sec, BOOT_KEYS, "bootstrap")
        elif sec_name == "fit":
            kw["fit"] = _typed(FitConfig, sec, FIT_KEYS, "fit")
        else:
            raise ConfigError(f"unknown section [{sec_name}]")
    kw["interventions"] = tuple(ivs)
    try:
        return ScenarioConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
