"""Report entries and their serialization (JSON with sorted keys plus CSV companions)."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .anchors import check_anchor

SCHEMA = "paneitzlab-report/1"
RELATIONS = ("eq", "le", "ge")
SOURCES = ("reference", "oracle", "exact")


@dataclass(frozen=True)
class ReportEntry:
    """pass iff |value - expected| <= tolerance (relation "eq"), or the one-sided analogue."""

    check: str
    anchor: str
    value: float
    expected: float
    tolerance: float
    source: str = "oracle"  # reference value, independent oracle, or exact identity
    relation: str = "eq"
    budget: dict[str, float] = field(default_factory=dict)  # quadrature / truncation / stencil
    message: str = ""

    def __post_init__(self):
        check_anchor(self.anchor)
        if self.relation not in RELATIONS:
            raise ValueError(f"relation must be one of {RELATIONS}")
        if self.source not in SOURCES:
            raise ValueError(f"source must be one of {SOURCES}")

    @property
    def passed(self) -> bool:
        v, e, t = self.value, self.expected, self.tolerance
        if not (math.isfinite(v) and math.isfinite(e)):
            return False
        if self.relation == "eq":
            return abs(v - e) <= t
        if self.relation == "le":
            return v <= e + t
        return v >= e - t

    def as_dict(self) -> dict:
        return {"check": self.check, "anchor": self.anchor, "value": _num(self.value),
                "expected": _num(self.expected), "tolerance": _num(self.tolerance), "source": self.source,
                "relation": self.relation, "passed": self.passed,
                "budget": {k: _num(v) for k, v in sorted(self.budget.items())}, "message": self.message}


def failed_entry(check: str, anchor: str, exc: BaseException) -> ReportEntry:
    return ReportEntry(check, anchor, math.nan, math.nan, 0.0, "exact", "eq", {}, f"{type(exc).__name__}: {exc}")


def _num(v: float):
    v = float(v)
    return v if math.isfinite(v) else repr(v)


@dataclass
class Report:
    suite: str
    seed: int
    config: dict
    entries: list[ReportEntry] = field(default_factory=list)
    plots: dict[str, list[dict]] = field(default_factory=dict)

    @property
    def failures(self) -> list[ReportEntry]:
        return [e for e in self.entries if not e.passed]

    @property
    def ok(self) -> bool:
        return not self.failures

    def as_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "suite": self.suite,
            "seed": self.seed,
            "config": self.config,
            "entries": [e.as_dict() for e in self.entries],
            "summary": {"entries": len(self.entries), "passed": len(self.entries) - len(self.failures),
                        "failed": len(self.failures)},
            "failures": [{"check": e.check, "anchor": e.anchor, "budget": e.as_dict()["budget"],
                          "message": e.message} for e in self.failures],
        }


ENTRY_COLUMNS = ("check", "anchor", "value", "expected", "tolerance", "relation", "passed", "source",
                 "quadrature", "truncation", "stencil")


def _csv_text(rows: list[dict], columns) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def emit_report(report: Report, out_dir: str | Path) -> list[Path]:
    """Write report.json, entries.csv and one CSV per plot series; returns the paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create report directory {out}: {exc}") from exc
    files: dict[str, str] = {}
    files["report.json"] = json.dumps(report.as_dict(), sort_keys=True, indent=2) + "\n"
    rows = []
    for e in report.entries:
        rows.append({"check": e.check, "anchor": e.anchor, "value": e.value, "expected": e.expected,
                     "tolerance": e.tolerance, "relation": e.relation, "passed": e.passed, "source": e.source,
                     **{k: e.budget.get(k, 0.0) for k in ("quadrature", "truncation", "stencil")}})
    files["entries.csv"] = f"# schema={SCHEMA} suite={report.suite} seed={report.seed}\n" + _csv_text(rows, ENTRY_COLUMNS)
    for name, series in sorted(report.plots.items()):
        cols = list(series[0]) if series else ["empty"]
        files[f"{name}.csv"] = f"# seed={report.seed}\n" + _csv_text(series, cols)
    paths = []
    for name, text in files.items():
        p = out / name
        try:
            p.write_text(text)
        except OSError as exc:
            raise OSError(f"cannot write report file {p}: {exc}") from exc
        paths.append(p)
    return paths
