import pytest
from hypothesis import settings

from frontiernav.world import InstructionCase, WorldGenConfig, build_world, generate_world

# fixed example sequence so every run checks the same cases
settings.register_profile("repro", derandomize=True, print_blob=True)
settings.load_profile("repro")


@pytest.fixture
def line_world():
    """A-B-C-D-E along the x axis with a side room F off C (1 m edges)."""
    pos = {"A": (0, 0), "B": (1, 0), "C": (2, 0), "D": (3, 0), "E": (4, 0), "F": (2, 1)}
    objects = {"A": ("door",), "B": ("sofa",), "C": ("chair", "table"), "D": ("bed",), "E": ("toilet",), "F": ("fridge",)}
    instr = InstructionCase("i0", "walk past the sofa, and stop by the toilet.", ("sofa", "toilet"), ("A", "B", "C", "D", "E"))
    return build_world(pos, [("A", "B"), ("B", "C"), ("C", "D"), ("D", "E"), ("C", "F")], objects, [instr], "line")


@pytest.fixture(scope="session")
def small_worlds():
    return [generate_world(WorldGenConfig(), s) for s in range(8)]


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_line(request):
    """Record one PASS/FAIL line for the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def record(name: str, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        lines.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
