import json
import shutil
from pathlib import Path

import pytest

import vischeck as v

DATA_DIR = Path(__file__).resolve().parent / "data"


def load_e2e_rows():
    rows = []
    with open(DATA_DIR / "e2e_responses.jsonl", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def load_e2e_answers():
    with open(DATA_DIR / "e2e_answers.json", encoding="utf-8") as fh:
        return json.load(fh)


def load_e2e_expected():
    with open(DATA_DIR / "e2e_expected.json", encoding="utf-8") as fh:
        return json.load(fh)


def build_transcript(rows=None, answers=None):
    """Map prompt hashes to the canned generator answer for every row/aspect."""
    rows = load_e2e_rows() if rows is None else rows
    answers = load_e2e_answers() if answers is None else answers
    transcript = {}
    for row in rows:
        per_aspect = answers[row["response_id"]]
        for aspect in v.ASPECT_ORDER:
            prompt = v.render_prompt(aspect, row["text"])
            transcript[v.prompt_key(prompt)] = per_aspect[aspect.value]
    return transcript


@pytest.fixture(scope="session")
def scene_store():
    return v.AnnotationStore([v.load_scene_annotation(DATA_DIR / "scene0001.json")])


@pytest.fixture(scope="session")
def scene(scene_store):
    return scene_store.get("scene0001")


@pytest.fixture(scope="session")
def scene_image(scene):
    return scene.image


@pytest.fixture(scope="session")
def oracle_experts(scene_store):
    return v.ExpertSet(
        detector=v.OracleDetector(scene_store),
        vqa=v.OracleVqa(scene_store),
        ocr=v.OracleOcr(scene_store),
        fluency=v.ConstantFluency(1.0),
    )


@pytest.fixture(scope="session")
def e2e_rows():
    return load_e2e_rows()


@pytest.fixture(scope="session")
def e2e_answers():
    return load_e2e_answers()


@pytest.fixture(scope="session")
def e2e_expected():
    return load_e2e_expected()


@pytest.fixture(scope="session")
def e2e_transcript(e2e_rows, e2e_answers):
    return build_transcript(e2e_rows, e2e_answers)


def run_cli(argv):
    from vischeck.cli import main
    return main([str(a) for a in argv])


def setup_pipeline_dir(base, extra_config=None):
    """Create annotations/, the replay transcript, and a config file under base."""
    base.mkdir(parents=True, exist_ok=True)
    ann_dir = base / "annotations"
    ann_dir.mkdir(exist_ok=True)
    shutil.copy(DATA_DIR / "scene0001.json", ann_dir / "scene0001.json")
    transcript = base / "transcript.json"
    transcript.write_text(json.dumps(build_transcript()), encoding="utf-8")
    config = base / "config.json"
    payload = {"annotations_dir": str(ann_dir), "transcript": str(transcript)}
    payload.update(extra_config or {})
    config.write_text(json.dumps(payload), encoding="utf-8")
    return config


def run_pipeline(base, workers=1, extra_config=None):
    """extract -> verify -> build-pref over the committed e2e corpus."""
    config = setup_pipeline_dir(base, extra_config)
    parts = base / "parts.jsonl"
    assessed = base / "assessed.jsonl"
    pairs = base / "pairs.jsonl"
    common = ["--config", config, "--workers", workers]
    assert run_cli(common + ["extract", "--input", DATA_DIR / "e2e_responses.jsonl",
                             "--output", parts]) == 0
    assert run_cli(common + ["verify", "--input", parts, "--output", assessed]) == 0
    assert run_cli(common + ["build-pref", "--input", assessed, "--output", pairs]) == 0
    return {"config": config, "parts": parts, "assessed": assessed, "pairs": pairs}


class StaticDetector:
    """Test double returning a fixed detection list per normalized entity."""

    def __init__(self, table):
        self.table = {v.normalize(k): list(dets) for k, dets in table.items()}

    def detect_raw(self, entity, image):
        return list(self.table.get(v.normalize(entity), []))


class StaticVqa:
    """Test double answering from an explicit question table (default no)."""

    def __init__(self, answers=None, default=False):
        self.answers = dict(answers or {})
        self.default = default
        self.seen = []

    def ask(self, question, image, structured=None):
        self.seen.append(question)
        return self.answers.get(question, self.default)


class StaticOcr:
    def __init__(self, texts):
        self.texts = list(texts)

    def read_texts(self, image):
        return list(self.texts)


class StaticFluency:
    def __init__(self, value):
        self.value = value

    def score(self, text):
        return self.value
