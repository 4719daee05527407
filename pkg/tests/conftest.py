from __future__ import annotations

import pytest

from crowdforge import fixtures, parse_pipeline_spec
from crowdforge.connector import MockConnector
from crowdforge.gateway import GatewayConfig, create_app
from crowdforge.storage import AnnotationStore, KVStore

API_TOKEN = "test-token"
AUTH = {"Authorization": f"Bearer {API_TOKEN}"}


class FakeClock:
    """Deterministic, monotonically advancing clock for store tests."""

    def __init__(self, start: float = 1_600_000_000.0):
        self.now = start

    def __call__(self) -> float:
        return self.now

    def advance(self, seconds: float) -> None:
        self.now += seconds


@pytest.fixture
def clock() -> FakeClock:
    return FakeClock()


@pytest.fixture
def store(clock) -> AnnotationStore:
    return AnnotationStore(KVStore(), secret=b"test-secret", clock=clock)


def load_task_set(name: str):
    result = parse_pipeline_spec(fixtures.load_text(name), "task_set")
    assert result.ok, [d.to_dict() for d in result.diagnostics if d.is_error]
    return result.spec


@pytest.fixture(scope="session")
def covid_task_set():
    return load_task_set("covid_taskset")


@pytest.fixture(scope="session")
def drop_task_set():
    return load_task_set("drop_taskset")


@pytest.fixture
def covid_task(covid_task_set):
    return covid_task_set.tasks[0]


def make_app(store, connector=None, external_url="http://test"):
    connector = connector or MockConnector(seed=11)
    app = create_app(
        GatewayConfig(tokens=(API_TOKEN,), external_url=external_url),
        store=store,
        connector=connector,
    )
    return app, connector


@pytest.fixture
def app_client(store):
    from fastapi.testclient import TestClient

    app, connector = make_app(store)
    with TestClient(app) as client:
        yield client, connector, store
