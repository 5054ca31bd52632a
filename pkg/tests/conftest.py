import pytest
from hypothesis import settings

from stellarcup.graph_core import KnowledgeGraph
from stellarcup.scenario import FIG1_PD, FIG2_PD

settings.register_profile("default", max_examples=80, deadline=None)
settings.load_profile("default")


@pytest.fixture
def fig1_graph():
    return KnowledgeGraph(FIG1_PD)


@pytest.fixture
def fig2_graph():
    return KnowledgeGraph(FIG2_PD)


# one summary line per acceptance criterion, whatever the verbosity
_criteria: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = "test_acceptance.py::test_criterion_"
    if marker not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    number = int(name.split("_")[2])
    outcome = "PASS" if report.passed else "FAIL"
    if hasattr(report, "wasxfail"):
        outcome = "FAIL"
    _criteria[number] = (outcome, name)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        outcome, name = _criteria[number]
        terminalreporter.write_line(f"criterion {number}: {outcome}  ({name})")
