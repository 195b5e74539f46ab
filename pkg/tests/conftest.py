from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rulemesh.ir import FactType

PERSON_ADULT_DRL = (
    "declare Person\n name: string\n age: integer\nend\n"
    "\n"
    "declare Adult\n name: string\nend\n"
)

PERSON_ADULT_CLIPS = (
    "(deftemplate Person (slot name (type STRING)) (slot age (type INTEGER)))\n"
    "(deftemplate Adult (slot name (type STRING)))\n"
)

ADULT_RULE_DRL = (
    'rule "adult"\n'
    "when\n"
    "  Person(age >= 18, name : $n)\n"
    "then\n"
    "  insert Adult(name: $n);\n"
    "end"
)

ADULT_RULE_CLIPS = (
    "(defrule adult"
    " (Person (age ?g0) (name ?n))"
    " (test (>= ?g0 18))"
    " =>"
    " (assert (Adult (name ?n))))"
)

NOT_RULE_CLIPS = '(defrule shy (not (Person (age 1))) => (assert (Adult (name "x"))))'


@pytest.fixture
def person_adult_types() -> list[FactType]:
    return [
        FactType("Person", (("name", "string"), ("age", "integer"))),
        FactType("Adult", (("name", "string"),)),
    ]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = []
    for outcome, label in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL")):
        for report in terminalreporter.stats.get(outcome, []):
            if "test_acceptance" in report.nodeid and report.when in (None, "call"):
                lines.append(f"{label}: {report.nodeid.split('::')[-1]}")
    if lines:
        terminalreporter.write_line("")
        terminalreporter.write_line("acceptance criteria:")
        for line in sorted(lines, key=lambda s: s.split(": ")[1]):
            terminalreporter.write_line(line)
