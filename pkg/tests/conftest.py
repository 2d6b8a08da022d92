from pathlib import Path

import pytest

from osmoracle.ingest import load_fixture
from osmoracle.service import OracleService
from osmoracle.spatial import build_index

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"
SAMPLES = Path(__file__).parent.parent / "samples"


def fixture_path(name: str) -> Path:
    return FIXTURES / f"{name}.txt"


@pytest.fixture(scope="session")
def index_of():
    cache = {}

    def get(name: str):
        if name not in cache:
            cache[name] = build_index(load_fixture(fixture_path(name)))
        return cache[name]

    return get


@pytest.fixture(scope="session")
def service_of(index_of):
    cache = {}

    def get(name: str) -> OracleService:
        if name not in cache:
            cache[name] = OracleService(index_of(name))
        return cache[name]

    return get


# -- acceptance report: one PASS/FAIL line per criterion --

_criteria: dict[int, tuple[str, bool]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or not (rep.when == "call" or rep.failed):
        return
    number, title = marker.args
    passed = rep.passed and _criteria.get(number, (title, True))[1]
    _criteria[number] = (title, passed)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, passed = _criteria[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {title}")
