import json
from pathlib import Path

import pytest

from strainflow import pipeline
from strainflow.field_io import GridSpec

GOLDEN = Path(__file__).parent / "golden"

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion, shown in the terminal summary."""

    def _report(number: int, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def two_blobs(tmp_path_factory):
    """The 120x80, 60-frame two-blobs-merge dataset and its truth record."""
    out = tmp_path_factory.mktemp("two_blobs")
    manifest = pipeline.run_generate("two-blobs-merge", GridSpec(120, 80), 60, out)
    truth = json.loads((out / "truth.json").read_text())
    return manifest, truth


@pytest.fixture(scope="session")
def uniaxial_small(tmp_path_factory):
    out = tmp_path_factory.mktemp("uniaxial")
    return pipeline.run_generate("uniaxial", GridSpec(24, 16), 8, out)
