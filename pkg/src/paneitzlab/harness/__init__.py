from .anchors import ANCHORS
from .config import ConfigError, SuiteConfig, load_config
from .report import Report, ReportEntry, emit_report
from .suites import SUITES, run_suite

__all__ = ["ANCHORS", "ConfigError", "Report", "ReportEntry", "SUITES", "SuiteConfig", "emit_report", "load_config",
           "run_suite"]
