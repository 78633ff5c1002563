import numpy as np
import pytest


def pytest_addoption(parser):
    parser.addoption("--with-timit", metavar="PATH", default=None,
                     help="TIMIT root for the optional full-corpus integration test")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def timit_root(request):
    path = request.config.getoption("--with-timit")
    if not path:
        pytest.skip("needs --with-timit <path>")
    return path


def pytest_terminal_summary(terminalreporter):
    from _report import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(LINES):
            terminalreporter.write_line(line)
