import socket
import threading
import time

import pytest
import uvicorn
from fastapi.testclient import TestClient

from maskserve import MaskedLMBackend, build_tiny_model, create_app


@pytest.fixture(scope="session")
def tiny_backend(tmp_path_factory):
    directory = build_tiny_model(tmp_path_factory.mktemp("tiny-model"))
    return MaskedLMBackend("tiny-test", model_path=str(directory), local_files_only=True)


@pytest.fixture(scope="session")
def app(tiny_backend):
    return create_app(tiny_backend, max_batch=16)


@pytest.fixture()
def client(app):
    return TestClient(app)


@pytest.fixture(scope="session")
def live_endpoint(app):
    """The app served by a real uvicorn worker, for wire-level round-trips."""
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("uvicorn did not start")
        time.sleep(0.05)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)
