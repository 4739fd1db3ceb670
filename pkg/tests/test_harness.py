import csv
import json
import math

import pytest

from paneitzlab.harness import cli
from paneitzlab.harness.anchors import ANCHORS, check_anchor
from paneitzlab.harness.config import DEFAULT_TOLERANCES, ConfigError, SuiteConfig, load_config
from paneitzlab.harness.report import SCHEMA, Report, ReportEntry, emit_report, failed_entry
from paneitzlab.harness.suites import SUITE_ANCHORS, SUITES, Collector, run_suite


def write(tmp_path, text, name="suite.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


# ---------------------------------------------------------------------------
# configuration


def test_default_config():
    cfg = load_config(None)
    assert cfg == SuiteConfig()
    assert cfg.tol("symbol_identity") == 1e-12
    assert cfg.replace(tol_scale=10.0).tol("symbol_identity") == pytest.approx(1e-11)


def test_config_file(tmp_path):
    path = write(tmp_path, "[suite]\ngrid_points = 64\nt_grid = 0.1, 0.05 0.025\ncatalog = minimal ; small\n"
                           "assemble = no\nseed = 42\n[tolerances]\nenergy = 1e-7\n")
    cfg = load_config(path)
    assert cfg.grid_points == 64 and cfg.t_grid == (0.1, 0.05, 0.025)
    assert cfg.catalog == "minimal" and not cfg.assemble and cfg.seed == 42
    assert cfg.tolerances["energy"] == 1e-7
    assert cfg.tolerances["gauge_solve"] == DEFAULT_TOLERANCES["gauge_solve"]


@pytest.mark.parametrize("text", [
    "[suite]\ngrid_points = 4\n",
    "[suite]\ngrid_radius = -1\n",
    "[suite]\ntruncation = 1\n",
    "[suite]\ncatalog = huge\n",
    "[suite]\nt_grid = 0.1\n",
    "[suite]\nt_grid = 0.1 -0.05\n",
    "[suite]\nseed = -3\n",
    "[suite]\ngrid_points = many\n",
    "[suite]\nwidth = 3\n",
    "[tolerances]\nenergy = 0\n",
    "[tolerances]\nnot_a_check = 1e-3\n",
    "no section header\n",
])
def test_config_errors(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, text))


def test_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "absent.ini"))


def test_config_as_dict_roundtrips_through_json():
    d = SuiteConfig().as_dict()
    assert json.loads(json.dumps(d)) == d
    assert list(d["tolerances"]) == sorted(d["tolerances"])


# ---------------------------------------------------------------------------
# anchors and entries


def test_anchor_registry_covered_by_suites():
    emitted = set().union(*SUITE_ANCHORS.values())
    assert emitted == set(ANCHORS)
    assert set(SUITE_ANCHORS) == set(SUITES)
    with pytest.raises(KeyError):
        check_anchor("nowhere")


def test_entry_relations():
    assert ReportEntry("a", "plumbing", 1.0, 1.1, 0.2).passed
    assert not ReportEntry("a", "plumbing", 1.0, 1.5, 0.2).passed
    assert ReportEntry("a", "plumbing", -5.0, 0.0, 0.0, relation="le").passed
    assert not ReportEntry("a", "plumbing", 0.1, 0.0, 0.05, relation="le").passed
    assert ReportEntry("a", "plumbing", 0.999, 1.0, 1e-3, relation="ge").passed
    assert not ReportEntry("a", "plumbing", math.nan, 0.0, 1.0).passed


def test_entry_validation():
    with pytest.raises(KeyError):
        ReportEntry("a", "unknown-anchor", 0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        ReportEntry("a", "plumbing", 0.0, 0.0, 0.0, relation="lt")
    with pytest.raises(ValueError):
        ReportEntry("a", "plumbing", 0.0, 0.0, 0.0, source="folklore")


def test_collector_guard_records_failure():
    col = Collector(SuiteConfig())
    col.guard("boom", "plumbing", lambda: 1 / 0)
    (e,) = col.entries
    assert not e.passed and "ZeroDivisionError" in e.message and e.anchor == "plumbing"


# ---------------------------------------------------------------------------
# reports


def sample_report():
    entries = [ReportEntry("ok", "round-curvature", 6.0, 6.0, 1e-8, "reference", budget={"quadrature": 1e-12}),
               ReportEntry("bad", "green-l2-norm", 0.3, 0.25, 1e-8, "reference"),
               failed_entry("crash", "plumbing", RuntimeError("no"))]
    return Report("demo", 5, SuiteConfig().as_dict(), entries, {"series": [{"t": 0.1, "r": 1e-3}]})


def test_report_schema(tmp_path):
    paths = emit_report(sample_report(), tmp_path)
    assert sorted(p.name for p in paths) == ["entries.csv", "report.json", "series.csv"]
    d = json.loads((tmp_path / "report.json").read_text())
    assert d["schema"] == SCHEMA and d["suite"] == "demo" and d["seed"] == 5
    assert d["summary"] == {"entries": 3, "passed": 1, "failed": 2}
    assert [f["check"] for f in d["failures"]] == ["bad", "crash"]
    assert d["failures"][0]["anchor"] == "green-l2-norm"
    assert d["entries"][2]["value"] == "nan"
    for e in d["entries"]:
        assert set(e) == {"check", "anchor", "value", "expected", "tolerance", "source", "relation", "passed",
                          "budget", "message"}


def test_report_csv(tmp_path):
    emit_report(sample_report(), tmp_path)
    lines = (tmp_path / "entries.csv").read_text().splitlines()
    assert lines[0].startswith("# schema=")
    rows = list(csv.DictReader(lines[1:]))
    assert [r["check"] for r in rows] == ["ok", "bad", "crash"]
    assert rows[0]["passed"] == "True" and float(rows[0]["quadrature"]) == 1e-12


def test_report_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError):
        emit_report(sample_report(), blocker / "sub")


def test_run_suite_unknown():
    with pytest.raises(KeyError):
        run_suite(SuiteConfig(), "everything")


# ---------------------------------------------------------------------------
# command line


@pytest.mark.parametrize("argv", [
    ["nu-solve", "--seed", "-1"],
    ["nu-solve", "--tol-scale", "0"],
    ["report", "--suite", "nonexistent"],
    ["nu-solve", "--suite", "symbol-check"],
    ["symbol-check", "--pole", "N"],
    ["nu-solve", "--pole", "1,2"],
    ["frobnicate"],
    [],
])
def test_cli_configuration_errors(tmp_path, argv):
    assert cli.main(argv + ["--out", str(tmp_path)] if argv else argv) == cli.EXIT_CONFIG


def test_cli_bad_config_file(tmp_path):
    path = write(tmp_path, "[suite]\ncatalog = galaxy\n")
    assert cli.main(["nu-solve", "--config", path, "--out", str(tmp_path / "r")]) == cli.EXIT_CONFIG


def test_cli_parse_pole():
    assert cli.parse_pole(" n ") == "N"
    assert cli.parse_pole("1, 2 3") == [1.0, 2.0, 3.0]
    with pytest.raises(ConfigError):
        cli.parse_pole("x,y,z")


def test_cli_empty_catalog(tmp_path, capsys):
    path = write(tmp_path, "[suite]\ncatalog = none\n")
    out = tmp_path / "rep"
    assert cli.main(["first-variation", "--config", path, "--out", str(out)]) == cli.EXIT_OK
    d = json.loads((out / "report.json").read_text())
    assert d["summary"]["entries"] == 0
    assert "0/0 passed" in capsys.readouterr().out


def test_cli_nu_solve_deterministic_and_serialized(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert cli.main(["nu-solve", "--seed", "11", "--out", str(out), "--pole", "0.5,0,1"]) == cli.EXIT_OK
    names = sorted(p.name for p in a.iterdir())
    assert "nu_solution.json" in names and "nu_coefficients.bin" in names and "report.json" in names
    assert names == sorted(p.name for p in b.iterdir())
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes()


def test_cli_failure_block(tmp_path, capsys):
    code = cli.main(["nu-solve", "--tol-scale", "1e-30", "--out", str(tmp_path)])
    assert code == cli.EXIT_FAIL
    err = capsys.readouterr().err
    assert "failures:" in err
    assert "anchor nu-definition; budget truncation=" in err
    d = json.loads((tmp_path / "report.json").read_text())
    assert d["summary"]["failed"] == len(d["failures"]) > 0
