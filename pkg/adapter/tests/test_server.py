import base64

import pytest
from fastapi.testclient import TestClient

from vlm_adapter.config import AdapterConfig, load_config
from vlm_adapter.selftest import probe_image_bytes
from vlm_adapter.server import create_app

IMAGE_B64 = base64.b64encode(probe_image_bytes()).decode("ascii")


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app(AdapterConfig()), raise_server_exceptions=False)


class TestEndpoints:
    def test_health(self, client):
        response = client.get("/health")
        assert response.status_code == 200
        assert response.json() == {"status": "ok"}

    def test_classify_two_labels_two_scores_summing_to_one(self, client):
        response = client.post(
            "/v1/classify", json={"image_b64": IMAGE_B64, "labels": ["a", "b"]}
        )
        assert response.status_code == 200
        scores = response.json()["scores"]
        assert len(scores) == 2
        assert sum(scores) == pytest.approx(1.0)

    def test_generate_returns_text(self, client):
        response = client.post(
            "/v1/generate", json={"image_b64": IMAGE_B64, "prompt": "Describe."}
        )
        assert response.status_code == 200
        assert response.json()["text"]

    def test_detect_boxes_within_bounds(self, client):
        response = client.post(
            "/v1/detect",
            json={"image_b64": IMAGE_B64, "queries": ["a", "b"], "score_threshold": 0.1},
        )
        assert response.status_code == 200
        for det in response.json()["detections"]:
            xmin, ymin, xmax, ymax = det["box"]
            assert 0 <= xmin < xmax <= 32
            assert 0 <= ymin < ymax <= 24

    def test_empty_labels_rejected(self, client):
        response = client.post(
            "/v1/classify", json={"image_b64": IMAGE_B64, "labels": []}
        )
        assert response.status_code == 400

    def test_bad_base64_rejected(self, client):
        response = client.post(
            "/v1/classify", json={"image_b64": "!!!", "labels": ["a"]}
        )
        assert response.status_code == 400

    def test_non_image_bytes_rejected(self, client):
        junk = base64.b64encode(b"not an image").decode()
        response = client.post(
            "/v1/classify", json={"image_b64": junk, "labels": ["a"]}
        )
        assert response.status_code == 400

    def test_oversized_image_rejected(self):
        config = AdapterConfig(max_image_bytes=10)
        tiny_limit = TestClient(create_app(config), raise_server_exceptions=False)
        response = tiny_limit.post(
            "/v1/classify", json={"image_b64": IMAGE_B64, "labels": ["a"]}
        )
        assert response.status_code == 400

    def test_disabled_endpoint_is_404(self):
        config = AdapterConfig(chat="none")
        client = TestClient(create_app(config), raise_server_exceptions=False)
        response = client.post(
            "/v1/generate", json={"image_b64": IMAGE_B64, "prompt": "x"}
        )
        assert response.status_code == 404
        assert client.get("/health").status_code == 200

    def test_model_failure_is_5xx_json(self, monkeypatch):
        class Boom:
            name = "boom"

            def classify(self, image, labels):
                raise RuntimeError("kaput")

        monkeypatch.setattr(
            "vlm_adapter.server.build_model", lambda kind, spec, device="cpu": Boom()
        )
        broken = TestClient(create_app(AdapterConfig()), raise_server_exceptions=False)
        response = broken.post(
            "/v1/classify", json={"image_b64": IMAGE_B64, "labels": ["a"]}
        )
        assert response.status_code == 500
        assert "error" in response.json()


class TestConfig:
    def test_all_disabled_rejected(self):
        with pytest.raises(ValueError, match="at least one"):
            AdapterConfig(similarity="none", chat="none", detector="none")

    def test_file_env_and_flag_precedence(self, tmp_path):
        config_file = tmp_path / "adapter.json"
        config_file.write_text('{"port": 9000, "chat": "none"}')
        config = load_config(
            config_file,
            env={"VLM_ADAPTER_PORT": "9100"},
            detector="builtin",
        )
        assert config.port == 9100  # env beats file
        assert config.chat == "none"  # file beats default
        assert config.detector == "builtin"

    def test_unknown_config_keys_rejected(self, tmp_path):
        config_file = tmp_path / "adapter.json"
        config_file.write_text('{"modle": "typo"}')
        with pytest.raises(ValueError, match="unknown keys"):
            load_config(config_file, env={})
