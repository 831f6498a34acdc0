import datetime as dt

import numpy as np
import pytest
from hypothesis import given, strategies as st

from itsinfer.config import (ConfigError, enumerate_universe, load_analysis_config,
                             load_scenario_config, parse_seasonal, parse_weekdays)
from itsinfer.io import (DataError, format_float, read_csv, read_series_csv, write_csv,
                         write_json)
from itsinfer.series import TimeSeries
from itsinfer.io import write_series_csv

BASIC = """
[data]
path = y.csv
[intervention ban]
kind = step
onset = 2000-03-01
expected_sign = -1
[covariate sunday]
rule = sunday_or_holiday
holidays = 2000-01-03, 2000-05-29
[universe]
p = 0, 1
d = 1
q = 0, 1, 2
seasonal = (0,1,1)
[inference]
alpha = 0.1
correction = holm
[run]
seed = 42
"""


def test_analysis_config_parses():
    cfg = load_analysis_config(text=BASIC)
    assert cfg.interventions[0].name == "ban" and cfg.interventions[0].expected_sign == -1
    assert cfg.covariates[0].weekdays == (6,) and len(cfg.covariates[0].holidays) == 2
    assert cfg.alpha == 0.1 and cfg.corrections == ("holm",)
    assert cfg.bootstrap.seed == 42 and cfg.seed == 42
    assert cfg.target_name == "ban"
    u = enumerate_universe(cfg)
    assert [o.label for o in u] == ["(0,1,0)x(0,1,1)_7", "(0,1,1)x(0,1,1)_7", "(0,1,2)x(0,1,1)_7",
                                    "(1,1,0)x(0,1,1)_7", "(1,1,1)x(0,1,1)_7", "(1,1,2)x(0,1,1)_7"]


def test_defaults_give_27_model_universe():
    cfg = load_analysis_config(text="[intervention x]\nonset = 2000-01-05\n")
    assert len(enumerate_universe(cfg)) == 27
    assert cfg.corrections == ("bonferroni", "holm", "bh", "maxt")


def test_explicit_bootstrap_seed_wins():
    cfg = load_analysis_config(text=BASIC + "[bootstrap]\nseed = 7\n")
    assert cfg.bootstrap.seed == 7 and cfg.seed == 42


@pytest.mark.parametrize("bad,msg", [
    ("[mystery]\na = 1\n", "unknown section"),
    ("[inference]\nalpha = 2\n", "alpha"),
    ("[inference]\ncorrection = sidak\n", "correction"),
    ("[universe]\np = 0, 4\n", "outside"),
    ("[universe]\np =\n", "empty"),
    ("[intervention y]\nonset = 2000-13-01\n", "ISO date"),
    ("[intervention y]\nkind = ramp\nonset = 2000-01-01\n", "kind"),
    ("[fit]\nsmoothness = 3\n", "unknown key"),
    ("[bootstrap]\nbandwidth = 0\n", "bandwidth"),
    ("[inference]\ntarget = nothing\n", "target"),
    ("[covariate s]\nrule = lunar\n", "rule"),
])
def test_config_errors(bad, msg):
    text = "[intervention x]\nonset = 2000-01-05\n" + bad
    with pytest.raises(ConfigError, match=msg):
        load_analysis_config(text=text)


def test_config_requires_intervention():
    with pytest.raises(ConfigError, match="intervention"):
        load_analysis_config(text="[universe]\np = 0\n")


def test_parsers():
    assert parse_seasonal("(1, 1, 0)") == (1, 1, 0)
    assert parse_weekdays("sat, Sunday, 2") == (2, 5, 6)
    with pytest.raises(ConfigError):
        parse_weekdays("funday")


def test_holidays_file(tmp_path):
    (tmp_path / "hol.txt").write_text("# holidays\n2000-01-03\n\n2000-12-25\n")
    (tmp_path / "a.ini").write_text(
        "[intervention x]\nonset = 2000-01-05\n[covariate h]\nrule = calendar\n"
        "weekdays = sun\nholidays_file = hol.txt\n")
    cfg = load_analysis_config(tmp_path / "a.ini")
    assert cfg.covariates[0].holidays == frozenset({dt.date(2000, 1, 3), dt.date(2000, 12, 25)})


def test_scenario_config():
    sc = load_scenario_config(text="""
[generator]
order = (1,0,0)x(0,1,1)_7
phi = 0.5
seasonal_theta = 0.6
n = 300
[generator.intervention iv]
onset = 50
omega = -1.5
[study]
replications = 20
corrections = naive, bonferroni
[universe]
p = 0, 1
""")
    assert sc.order.p == 1 and sc.phi == (0.5,) and sc.n == 300
    assert sc.interventions[0].omega == -1.5 and sc.replications == 20
    assert sc.corrections == ("naive", "bonferroni") and sc.universe.p == (0, 1)
    with pytest.raises(ConfigError):
        load_scenario_config(text="[generator]\nwobble = 1\n")


@given(st.floats(allow_nan=False))
def test_format_float_round_trips(x):
    assert float(format_float(x)) == x


def test_csv_round_trip(tmp_path, rng):
    vals = rng.normal(size=(50, 3)) * 10.0 ** rng.integers(-8, 8, size=(50, 3))
    p = tmp_path / "x.csv"
    write_csv(p, ["a", "b", "c"], vals)
    header, rows = read_csv(p)
    assert header == ["a", "b", "c"]
    np.testing.assert_array_equal(np.array(rows, dtype=float), vals)
    assert b"\r" not in p.read_bytes()


def test_write_json_nan_is_null(tmp_path):
    p = tmp_path / "x.json"
    write_json(p, {"b": float("nan"), "a": np.float64(1.5), "c": np.array([1, 2])})
    assert p.read_text() == '{\n  "a": 1.5,\n  "b": null,\n  "c": [\n    1,\n    2\n  ]\n}\n'


def test_read_series_round_trip(tmp_path):
    s = TimeSeries(np.array([1.25, -3.0, 1e-17]), dt.date(2020, 2, 28))
    p = tmp_path / "s.csv"
    write_series_csv(p, s)
    back = read_series_csv(p)
    assert back.start_date == s.start_date
    np.testing.assert_array_equal(back.values, s.values)


@pytest.mark.parametrize("body,msg", [
    ("2000-01-01,1\n2000-01-03,2\n", "missing dates: 2000-01-02"),
    ("2000-01-01,1\n2000-01-01,2\n", "duplicate date"),
    ("2000-01-02,1\n2000-01-01,2\n", "out of order"),
    ("2000-01-01,1\n2000-01-02,abc\n", "row 3"),
    ("2000-01-01,1\n01/02/2000,2\n", "cannot parse date"),
    ("2000-01-01,nan\n", "non-finite"),
])
def test_read_series_errors(tmp_path, body, msg):
    p = tmp_path / "bad.csv"
    p.write_text("date,value\n" + body)
    with pytest.raises(DataError, match=msg):
        read_series_csv(p)


def test_read_series_missing_column(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("day,value\n2000-01-01,1\n")
    with pytest.raises(DataError, match="column"):
        read_series_csv(p)
