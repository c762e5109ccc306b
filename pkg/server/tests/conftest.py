import json
import threading
from pathlib import Path

import pytest

from vischeck_server import ModelAdapters, ServerConfig, create_server, prompt_hash

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def stub_env(tmp_path_factory):
    """Annotation dir + transcript file for stub servers."""
    base = tmp_path_factory.mktemp("stub")
    ann_dir = base / "annotations"
    ann_dir.mkdir()
    (ann_dir / "scene0001.json").write_text(
        (DATA_DIR / "scene0001.json").read_text("utf-8"), "utf-8")
    transcript = {prompt_hash("hello"): "world"}
    transcript_path = base / "transcript.json"
    transcript_path.write_text(json.dumps(transcript), "utf-8")
    return {"annotations": ann_dir, "transcript": transcript_path}


def start_server(config, adapters=None):
    """Run a server on a free port in a daemon thread; caller must stop it."""
    server = create_server(config, adapters)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    host, port = server.server_address[:2]
    return server, f"http://{host}:{port}"


@pytest.fixture(scope="session")
def stub_url(stub_env):
    config = ServerConfig(mode="stub", annotations_dir=str(stub_env["annotations"]),
                          port=0, transcript=str(stub_env["transcript"]))
    server, url = start_server(config)
    yield url
    server.shutdown()
    server.server_close()


@pytest.fixture(scope="session")
def model_url():
    def detect(image_id, entity):
        if image_id != "img9":
            raise KeyError(image_id)
        if entity == "crash":
            raise RuntimeError("detector fell over")
        # the fake model reports top-left-origin boxes
        from vischeck_server import convert_coords
        boxes = convert_coords([(10, 20, 30, 60)], 100)
        return 200, 100, [(boxes[0], 0.9)]

    adapters = ModelAdapters(
        detect=detect,
        vqa=lambda image_id, question, structured: question.endswith("dog?"),
        fluency=lambda text: 0.5,
        generate=lambda prompt: prompt.upper(),
        # no ocr adapter on purpose
    )
    server, url = start_server(ServerConfig(mode="model", port=0), adapters)
    yield url
    server.shutdown()
    server.server_close()
