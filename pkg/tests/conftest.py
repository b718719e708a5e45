import math
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from reifflow import harness
from reifflow.fractal_gen import KochSpec, circle_curve, koch_variant

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def koch4():
    return koch_variant(KochSpec(math.pi / 4, 4))


@pytest.fixture(scope="session")
def koch5():
    return koch_variant(KochSpec(math.pi / 4, 5))


@pytest.fixture(scope="session")
def unit_circle():
    return circle_curve(1.0, 1024)


CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture(scope="session")
def default_cfg():
    return harness.ExperimentConfig.from_dict({})


@pytest.fixture(scope="session")
def default_runs(default_cfg):
    """X^r flows of the default Koch sweep, shared by the uniform and separation checks."""
    return harness.evolve_scales(default_cfg)


@pytest.fixture(scope="session")
def nonfatten_report():
    return harness.run_nonfattening(harness.ExperimentConfig.load(CONFIGS / "nonfatten.json"))


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture(scope="session")
def acceptance_log():
    """Record one line per acceptance criterion; printed in the terminal summary."""

    def record(n: int, ok: bool, detail: str) -> bool:
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE[n] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])
