import pytest

from ioncavity.config import make_config

DOPPLER_T = 535e-6


def ca_config(n=1, **overrides):
    return make_config(40.0, {"num_ions": n, **overrides})


@pytest.fixture
def ca():
    """40Ca+ config factory keyed by ion number."""
    return ca_config


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
