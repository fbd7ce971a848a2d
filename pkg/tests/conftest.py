"""Shared fixtures: shipped scenarios loaded and enumerated once per session."""

from pathlib import Path

import pytest

from epimc.runs import enumerate_runs
from epimc.scenario import load_scenario

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"

_cache: dict = {}


def load_case(name: str):
    """(LoadedScenario, System) for a shipped scenario, cached per session."""
    if name not in _cache:
        loaded = load_scenario(str(SCENARIO_DIR / f"{name}.yaml"))
        _cache[name] = (loaded, enumerate_runs(loaded.spec))
    return _cache[name]


@pytest.fixture(scope="session")
def case():
    return load_case


@pytest.fixture(scope="session")
def tiny_system():
    return load_case("tiny")[1]


@pytest.fixture(scope="session")
def pair_system():
    return load_case("pair")[1]


@pytest.fixture(scope="session")
def fig3_system():
    return load_case("fig3_centipede")[1]


@pytest.fixture(scope="session")
def fig4_system():
    return load_case("fig4_broom")[1]


@pytest.fixture(scope="session")
def wtr_case():
    loaded, system = load_case("wtr_chain")
    return system, loaded.instance


@pytest.fixture(scope="session")
def ttr_case():
    loaded, system = load_case("ttr_broom")
    return system, loaded.instance
