import os

import pytest

from heegner_index.curve_store import CACHE_ENV, bundled_curve_file, parse_curve_file

ACCEPTANCE = {}


@pytest.fixture(scope="session", autouse=True)
def _cache_dir(tmp_path_factory):
    """One coefficient cache per test session, shared with CLI subprocesses."""
    path = tmp_path_factory.mktemp("an-cache")
    old = os.environ.get(CACHE_ENV)
    os.environ[CACHE_ENV] = str(path)
    yield path
    if old is None:
        os.environ.pop(CACHE_ENV, None)
    else:
        os.environ[CACHE_ENV] = old


@pytest.fixture(scope="session")
def curves():
    return {r.label: r for r in parse_curve_file(bundled_curve_file())}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
