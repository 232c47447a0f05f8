import functools

import pytest

from cavity_modes.assembly import assemble_system
from cavity_modes.materials import PRESETS
from cavity_modes.mesh import generate_ball_mesh, generate_box_mesh, generate_cylinder_mesh

VERDICTS = []


@functools.lru_cache(maxsize=None)
def mesh_for(kind, *args):
    if kind == "box":
        return generate_box_mesh(*args)
    if kind == "ball":
        return generate_ball_mesh(*args)
    return generate_cylinder_mesh(*args)


@functools.lru_cache(maxsize=None)
def system_for(material, kind, *args):
    return assemble_system(mesh_for(kind, *args), mat=PRESETS[material])


@pytest.fixture(scope="session")
def systems():
    """system_for(material, kind, *geometry args), cached for the session."""
    return system_for


@pytest.fixture
def verdict():
    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        VERDICTS.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
