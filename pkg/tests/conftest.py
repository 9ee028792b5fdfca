import os

import pytest

ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def tmp_cache(tmp_path, monkeypatch):
    """Isolated reference cache directory."""
    d = tmp_path / "cache"
    monkeypatch.setenv("ELASTICQMC_CACHE", str(d))
    return d


@pytest.fixture
def acceptance(request):
    """Record one acceptance criterion: ``acceptance(number, name, ok, detail)``."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def record(number: int, name: str, ok: bool, detail: str) -> bool:
        lines.append((number, f"criterion {number} {'PASS' if ok else 'FAIL'}: {name} ({detail})"))
        return ok

    return record


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance runs")
    os.environ.setdefault("PYTHONHASHSEED", "0")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
