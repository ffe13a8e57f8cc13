import sys
from pathlib import Path

import pytest

from privcalc.core import Dataset, DatasetDomain, Schema

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def xschema():
    return Schema.of(("x", "float64"))


@pytest.fixture
def xdomain(xschema):
    return DatasetDomain(xschema)


@pytest.fixture
def people_schema():
    return Schema.of(("age", "int64"), ("income", "float64"), ("member", "bool"), ("city", "string"))


@pytest.fixture
def people(people_schema):
    rows = [
        (34, 52000.0, True, "Lyon"),
        (19, 12000.0, False, "Paris"),
        (61, 71000.0, True, "Paris"),
        (45, 0.0, False, "Nice"),
        (27, 38000.5, True, "Lyon"),
    ]
    return Dataset(people_schema, rows)


def ds(values, name="x", kind="float64"):
    return Dataset.from_values(values, name, kind)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    lines = getattr(acceptance, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
