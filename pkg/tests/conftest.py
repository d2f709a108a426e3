import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "dcbandit" / "data"
FIXTURE = DATA_DIR / "mushroom-sample.data"
GOLDEN_DIR = Path(__file__).resolve().parent / "golden"


def mushroom_path():
    from dcbandit.envs import MUSHROOM_FILENAME, default_data_dir

    return default_data_dir() / MUSHROOM_FILENAME


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def fixture_path():
    return FIXTURE


@pytest.fixture
def uci_path():
    path = mushroom_path()
    if not path.is_file():
        pytest.skip(f"UCI mushroom file not present at {path} (run `dcbandit fetch-data`)")
    return path


def run_cli(*args, cwd=None):
    return subprocess.run([sys.executable, "-m", "dcbandit.cli", *map(str, args)],
                          capture_output=True, text=True, cwd=cwd)


@pytest.fixture(scope="session")
def casino_quick_runs(tmp_path_factory):
    """Two separate invocations of the bundled quick casino spec."""
    outs = []
    for name in ("first", "second"):
        out = tmp_path_factory.mktemp("casino-quick") / name
        proc = run_cli("run", "--spec", "casino-quick", "--out", out)
        assert proc.returncode == 0, proc.stderr
        outs.append(out)
    return outs


# -- acceptance reporting -----------------------------------------------------
# Tests marked ``criterion(n, title)`` get one PASS/FAIL line each in the
# terminal summary; ``record_property("detail", ...)`` adds the measured values.

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")
    config.addinivalue_line("markers", "slow: long-running simulation")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and not report.passed):
        status = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        details = [str(v) for k, v in item.user_properties if k == "detail"]
        if report.skipped and isinstance(report.longrepr, tuple):
            details.append(report.longrepr[2])
        _RESULTS[number] = (status, title, "; ".join(details))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        status, title, detail = _RESULTS[number]
        line = f"{status}  criterion {number:2d}: {title}"
        if detail:
            line += f" | {detail}"
        terminalreporter.write_line(line)


def pytest_collection_modifyitems(config, items):
    if os.environ.get("DCBANDIT_SKIP_SLOW"):
        skip = pytest.mark.skip(reason="DCBANDIT_SKIP_SLOW is set")
        for item in items:
            if "slow" in item.keywords:
                item.add_marker(skip)
