import os

import pytest


@pytest.fixture(scope="session", autouse=True)
def _isolated_calibration_cache(tmp_path_factory):
    # keep the user's cache out of the test run; one cache for the whole session
    path = tmp_path_factory.mktemp("calibration-cache")
    old = os.environ.get("CBNORM_CACHE_DIR")
    os.environ["CBNORM_CACHE_DIR"] = str(path)
    yield path
    if old is None:
        os.environ.pop("CBNORM_CACHE_DIR", None)
    else:
        os.environ["CBNORM_CACHE_DIR"] = old


def pytest_terminal_summary(terminalreporter):
    from tests import acceptance_log

    lines = acceptance_log.lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
