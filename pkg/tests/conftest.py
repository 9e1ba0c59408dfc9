from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from anonkit.core import PolicyConfig, RunContext  # noqa: E402
from anonkit.processors import Engine  # noqa: E402
from anonkit.vault import open_vault  # noqa: E402

TEST_KEY = b"test-key"

_acceptance_lines: list[str] = []


@pytest.fixture
def vault_path(tmp_path):
    return tmp_path / "entities.ndjson"


@pytest.fixture
def ctx(vault_path):
    return RunContext(TEST_KEY, PolicyConfig(), vault_path, "tester")


@pytest.fixture
def vault(vault_path):
    return open_vault(vault_path)


@pytest.fixture
def engine(ctx, vault):
    return Engine(ctx, vault)


@pytest.fixture
def make_engine(vault_path):
    def factory(**policy):
        c = RunContext(TEST_KEY, PolicyConfig(**policy), vault_path, "tester")
        return Engine(c, open_vault(vault_path))
    return factory


@pytest.fixture
def secret_env(monkeypatch):
    monkeypatch.setenv("SECRET_KEY", TEST_KEY.decode())
    monkeypatch.setenv("USER", "tester")


def pytest_runtest_logreport(report):
    if report.when != "call" or "acceptance" not in report.keywords:
        return
    doc = getattr(report, "criterion", None) or report.nodeid.split("::")[-1]
    status = "PASS" if report.passed else "FAIL"
    _acceptance_lines.append(f"[{status}] {doc} ({report.duration:.2f}s)")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker and marker.args:
        rep.criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
