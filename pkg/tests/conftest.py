import json
import pathlib

import pytest

from ceforge import Scenario

DATA = pathlib.Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> pathlib.Path:
    return DATA


@pytest.fixture(scope="session")
def single_scripted() -> Scenario:
    return Scenario.from_json((DATA / "single_scripted.json").read_text())


@pytest.fixture(scope="session")
def dual_scripted() -> Scenario:
    return Scenario.from_json((DATA / "dual_scripted.json").read_text())


@pytest.fixture(scope="session")
def demo_scenario() -> Scenario:
    return Scenario.from_json((DATA / "demo_scenario.json").read_text())


def load_jsonl(path: pathlib.Path) -> list[dict]:
    return [json.loads(line) for line in path.read_text().splitlines() if line]
