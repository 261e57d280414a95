import threading

import pytest

from _helpers import png_bytes
from vlmbench.mockserver import make_server


@pytest.fixture
def image_factory(tmp_path):
    """Write tiny PNGs under tmp_path and hand back relative names."""

    def make(name: str, color=(10, 20, 30), size=(8, 8)) -> str:
        path = tmp_path / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(png_bytes(color, size))
        return name

    return make


@pytest.fixture
def write_manifest(tmp_path):
    def make(name: str, lines: list[str]) -> str:
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return str(path)

    return make


@pytest.fixture
def served():
    """Start mock servers on ephemeral ports; shut them down afterwards."""
    servers = []

    def start(fixture_path):
        server = make_server(fixture_path)
        thread = threading.Thread(
            target=lambda: server.serve_forever(poll_interval=0.05), daemon=True
        )
        thread.start()
        servers.append(server)
        return f"http://127.0.0.1:{server.server_port}"

    yield start
    for server in servers:
        server.shutdown()
        server.server_close()
