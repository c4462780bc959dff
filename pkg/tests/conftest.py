import json
import pathlib

import pytest

from dunkkit import geometry as geo
from dunkkit.assembly import assemble
from dunkkit.mesh import refine_times, triangulate
from dunkkit.sensitivity import solve_sensitivity

ORACLES = json.loads((pathlib.Path(__file__).parent / "oracles" / "frozen.json").read_text())

# criterion number -> (passed, message), filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def oracle():
    return ORACLES


@pytest.fixture(scope="session")
def sart1_mesh():
    return refine_times(triangulate(geo.right_triangle(0.25)), 3)


@pytest.fixture(scope="session")
def sart1_forms(sart1_mesh):
    return assemble(sart1_mesh)


@pytest.fixture(scope="session")
def sart1_sens(sart1_forms):
    return solve_sensitivity(sart1_forms)


@pytest.fixture(scope="session")
def coarse_sart1():
    return assemble(refine_times(triangulate(geo.right_triangle(0.25)), 1))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, msg = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {msg}")
