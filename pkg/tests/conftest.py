import copy
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"

MINIMAL = {
    "duration_s": 10.0,
    "fog_areas": [{"id": "A", "center": [0.0, 0.0]}],
    "rsus": [{"id": "r1", "rat": "dsrc", "position": [0.0, 0.0]}],
    "vehicles": [{"id": "v1", "start": [100.0, 0.0], "speed_mps": 10.0, "heading_rad": 0.0}],
}


def full_coverage(duration=2.0, n=3, services=("emergency_routing",), **extra):
    """Parked vehicles within 20 m of a co-located RSU of every RAT."""
    spots = [(10.0, 5.0), (12.0, -6.0), (-9.0, 8.0), (-5.0, -15.0), (15.0, 12.0)]
    raw = {
        "duration_s": duration,
        "seed": 11,
        "fog_areas": [{"id": "A", "center": [0.0, 0.0]}],
        "rsus": [
            {"id": f"{rat}-0", "rat": rat, "position": [0.0, 0.0]}
            for rat in ("dsrc", "dsrc_px", "cv2x", "mmwave")
        ],
        "vehicles": [
            {"id": f"c{i}", "start": list(spots[i]), "speed_mps": 0.0, "services": list(services)}
            for i in range(n)
        ],
    }
    raw.update(extra)
    return raw


@pytest.fixture
def minimal_raw():
    return copy.deepcopy(MINIMAL)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
