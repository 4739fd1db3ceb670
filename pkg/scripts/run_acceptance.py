"""Run the acceptance criteria and print one PASS/FAIL line per criterion.

usage: python3 scripts/run_acceptance.py [-k EXPR]
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("-k", dest="select", help="pytest -k expression, e.g. 'criterion_01 or criterion_06'")
    args = parser.parse_args(argv)
    pytest_args = [str(ROOT / "tests" / "test_acceptance.py"), "-q", "-p", "no:cacheprovider"]
    if args.select:
        pytest_args += ["-k", args.select]
    return int(pytest.main(pytest_args))


if __name__ == "__main__":
    sys.exit(main())
