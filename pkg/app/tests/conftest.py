import numpy as np
import pytest
from fastapi.testclient import TestClient

from app.api.main import app, session_manager
from app.harness.config import ExperimentConfig

@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))

@pytest.fixture(scope="function")
def client():
    """Create a test client with no sessions."""
    session_manager.sessions.clear()
    with TestClient(app) as test_client:
        yield test_client
    session_manager.sessions.clear()

@pytest.fixture
def squint_session(client):
    response = client.post("/sessions/", json={"algorithm": "squint+l", "size": 3})
    return response.json()["session_id"]

@pytest.fixture
def metagrad_session(client):
    response = client.post(
        "/sessions/", json={"algorithm": "metagrad+c", "size": 2, "diameter": 2.0, "initial_scale": 1.0}
    )
    return response.json()["session_id"]

def make_config(algorithm: str, kind: str, size: int, horizon: int, **overrides) -> ExperimentConfig:
    environment = {"kind": kind, "size": size, "horizon": horizon, "seed": overrides.pop("seed", 0)}
    environment.update(overrides.pop("environment", {}))
    return ExperimentConfig.model_validate(
        {"name": f"{algorithm}-{kind}", "algorithm": algorithm, "environment": environment, **overrides}
    )

@pytest.fixture
def config_factory():
    return make_config
