import pytest

from forcedflow import flow as fl
from forcedflow import forcing as fo
from forcedflow import generators as gen


# steps between recorded snapshots; the fine-mesh grim reaper takes many more steps than the rest
RECORD_EVERY = {"reaper": 50}


def suite_cases():
    """The analytic suite: circle, triod, line and grim reaper under the catalog forcings."""
    swirl = fo.gaussian_swirl(1.0, 0.5, center=(0.5, 0.0))
    patch = fo.constant_patch((0.5, 0.2), 0.5)
    return {
        "circle0": (gen.circle(1.0, 128), fo.zero_field(), 0.3),
        "circle_swirl": (gen.circle(1.0, 128), swirl, 0.3),
        "triod": (gen.triod(1.0, 0.05), fo.zero_field(), 0.1),
        "triod_patch": (gen.triod(1.0, 0.05), patch, 0.1),
        "line_patch": (gen.line(4.0, 0.05), fo.constant_patch((0.0, 1.0), 0.6), 0.2),
        "reaper": (gen.grim_reaper(0.1, 0.02), fo.zero_field(), 0.2),
    }


@pytest.fixture(scope="session")
def suite_traces():
    out = {}
    for name, (net, u, T) in suite_cases().items():
        opts = fl.FlowOptions(record_every=RECORD_EVERY.get(name, 20), record_density=False)
        out[name] = fl.run(net, u, T, opts)
    return out


_CRITERIA: list[str] = []


@pytest.fixture(scope="session")
def criterion():
    """Record one PASS/FAIL line per acceptance criterion; returns the verdict for asserting."""
    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {detail}"
        _CRITERIA.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
