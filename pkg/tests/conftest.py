"""Shared fixtures and the acceptance-verdict terminal summary."""

import numpy as np
import pytest

# One human-readable line per acceptance criterion, appended by
# tests/test_acceptance.py as each criterion is evaluated and echoed
# after the run so the verdicts survive output capturing.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20260826)
