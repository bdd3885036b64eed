from pathlib import Path

import pytest

from staticgeom.manifest import load_manifest

MANIFESTS = Path(__file__).resolve().parents[1] / "manifests"

# the five curvature fixtures shared by the identity checks
CURVATURE_FIXTURES = ("minkowski", "sphere", "hyperbolic", "paraboloid", "cosh")


def spacetime(name: str):
    return load_manifest(MANIFESTS / f"{name}.ini").spacetime


@pytest.fixture(params=CURVATURE_FIXTURES)
def fixture_spacetime(request):
    return spacetime(request.param)


@pytest.fixture
def manifests_dir():
    return MANIFESTS


# one line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
