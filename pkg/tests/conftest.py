import os

import pytest

from stochcurrents import watanabe


@pytest.fixture(autouse=True)
def _single_worker(monkeypatch):
    """Tests set the worker count explicitly where it matters."""
    monkeypatch.delenv("CURRENTS_WORKERS", raising=False)


@pytest.fixture(scope="session")
def fbm_terms_075():
    """(n+1)! A(n), (n+1)! B(n) at H = 0.75, x = 1, T = 1 up to n = 200 (cached)."""
    return watanabe.fbm_scaled_terms(0.75, 1.0, 1.0, 200)


def pytest_configure(config):
    os.environ.setdefault("PYTHONHASHSEED", "0")


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance lines recorded by tests/test_acceptance.py as one block."""
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            lines.extend(v for k, v in getattr(rep, "user_properties", []) if k == "acceptance")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
