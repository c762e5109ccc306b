"""Pluggable expert backends and the thin ops the verification engine calls.

Backends return raw results (all detections, raw answers); policy such as
confidence thresholding lives here in the ops, not in the backends. Oracle
backends answer from scene annotations and are fully deterministic; remote
backends speak a small JSON-over-HTTP protocol (see README for the wire
format).
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from typing import List, Mapping, Optional, Protocol

import requests

from .core import (
    AnnotationStore,
    AttributePart,
    BBox,
    CheckWorthyPart,
    Detection,
    ImageRef,
    RelationPart,
    SceneAnnotation,
    normalize,
    part_to_dict,
    validate_bbox,
)
from .errors import AnnotationMissing, ExpertUnavailable

DEFAULT_DETECTION_THRESHOLD = 0.25
DEFAULT_FLUENCY_THRESHOLD = 0.75


@dataclass(frozen=True)
class ExpertConfig:
    detection_threshold: float = DEFAULT_DETECTION_THRESHOLD
    fluency_threshold: float = DEFAULT_FLUENCY_THRESHOLD
    existence_weight_multiplier: float = 1.0
    ocr_case_insensitive: bool = False

    def __post_init__(self):
        if not (0.0 <= self.detection_threshold <= 1.0):
            raise ValueError("detection_threshold must be in [0, 1]")
        if not (0.0 <= self.fluency_threshold <= 1.0):
            raise ValueError("fluency_threshold must be in [0, 1]")
        if self.existence_weight_multiplier < 0:
            raise ValueError("existence_weight_multiplier must be >= 0")


class Detector(Protocol):
    def detect_raw(self, entity: str, image: ImageRef) -> List[Detection]: ...


class BinaryVqa(Protocol):
    def ask(self, question: str, image: ImageRef,
            structured: Optional[CheckWorthyPart] = None) -> bool: ...


class OcrReader(Protocol):
    def read_texts(self, image: ImageRef) -> List[str]: ...


class FluencyScorer(Protocol):
    def score(self, text: str) -> float: ...


class TextGenerator(Protocol):
    def generate(self, prompt: str) -> str: ...


@dataclass(frozen=True)
class ExpertSet:
    detector: Detector
    vqa: BinaryVqa
    ocr: OcrReader
    fluency: FluencyScorer


# ---------------------------------------------------------------- ops

def detect(detector: Detector, entity: str, image: ImageRef, threshold: float) -> List[BBox]:
    """Boxes for the entity with confidence >= threshold (inclusive)."""
    if not (0.0 <= threshold <= 1.0):
        raise ValueError("threshold must be in [0, 1]")
    return [d.bbox for d in detector.detect_raw(entity, image) if d.confidence >= threshold]


def ask_yes_no(vqa: BinaryVqa, question: str, image: ImageRef,
               structured: Optional[CheckWorthyPart] = None) -> bool:
    return vqa.ask(question, image, structured)


def read_texts(ocr: OcrReader, image: ImageRef) -> List[str]:
    return list(ocr.read_texts(image))


def fluency(scorer: FluencyScorer, text: str) -> float:
    value = float(scorer.score(text))
    if not (0.0 <= value <= 1.0):
        raise ExpertUnavailable(f"fluency backend returned out-of-range score {value}")
    return value


def prompt_key(prompt: str) -> str:
    """Stable transcript key for a generator prompt (also used on the wire)."""
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------- oracle backends

def resolve_entity(entity: str, ann: SceneAnnotation) -> Optional[str]:
    """Match a normalized entity to an annotated object name.

    Synonyms apply first, then exact lookup, then a singular fallback that
    strips a trailing 'es' or 's'.
    """
    candidates = [entity]
    if entity.endswith("es"):
        candidates.append(entity[:-2])
    if entity.endswith("s"):
        candidates.append(entity[:-1])
    for cand in candidates:
        cand = ann.synonyms.get(cand, cand)
        if cand in ann.objects:
            return cand
    return None


class OracleDetector:
    """Answers from ground-truth boxes with confidence 1.0."""

    def __init__(self, store: AnnotationStore):
        self._store = store

    def detect_raw(self, entity: str, image: ImageRef) -> List[Detection]:
        ann = self._store.get(image.image_id)
        key = resolve_entity(normalize(entity), ann)
        if key is None:
            return []
        return [Detection(b, 1.0) for b in ann.objects[key]]


class OracleVqa:
    """Answers from the annotated relation/attribute sets via the structured hint."""

    def __init__(self, store: AnnotationStore):
        self._store = store

    def ask(self, question: str, image: ImageRef,
            structured: Optional[CheckWorthyPart] = None) -> bool:
        ann = self._store.get(image.image_id)
        if isinstance(structured, RelationPart):
            return (structured.subject, structured.relation, structured.obj) in ann.relations
        if isinstance(structured, AttributePart):
            return (structured.attribute, structured.obj) in ann.attributes
        raise ValueError("oracle VQA needs a relation or attribute part as the structured hint")


class OracleOcr:
    def __init__(self, store: AnnotationStore):
        self._store = store

    def read_texts(self, image: ImageRef) -> List[str]:
        return list(self._store.get(image.image_id).scene_texts)


class ConstantFluency:
    """Fixed score for every input; the default scores everything fluent."""

    def __init__(self, value: float = 1.0):
        self.value = float(value)

    def score(self, text: str) -> float:
        return self.value


class ReplayGenerator:
    """Deterministic generator replaying a transcript keyed by prompt hash."""

    def __init__(self, transcript: Mapping[str, str]):
        self._transcript = dict(transcript)

    @classmethod
    def from_file(cls, path: str) -> "ReplayGenerator":
        with open(path, "r", encoding="utf-8") as f:
            return cls(json.load(f))

    def generate(self, prompt: str) -> str:
        key = prompt_key(prompt)
        try:
            return self._transcript[key]
        except KeyError:
            raise ExpertUnavailable(f"no transcript entry for prompt hash {key}") from None


# ---------------------------------------------------------------- remote backends

def _post(base_url: str, endpoint: str, payload: dict, timeout: float) -> dict:
    url = base_url.rstrip("/") + endpoint
    try:
        resp = requests.post(url, json=payload, timeout=timeout)
    except requests.RequestException as exc:
        raise ExpertUnavailable(f"POST {url} failed: {exc}") from exc
    if resp.status_code == 404:
        try:
            err = resp.json().get("error")
        except ValueError:
            err = None
        if err == "unknown_image":
            raise AnnotationMissing(f"server has no annotation for request {payload!r}")
    if resp.status_code != 200:
        raise ExpertUnavailable(f"POST {url} returned status {resp.status_code}")
    try:
        return resp.json()
    except ValueError as exc:
        raise ExpertUnavailable(f"POST {url} returned non-JSON body") from exc


class _Remote:
    def __init__(self, base_url: str, timeout: float = 30.0):
        self.base_url = base_url
        self.timeout = timeout

    def _call(self, endpoint: str, payload: dict) -> dict:
        return _post(self.base_url, endpoint, payload, self.timeout)


class RemoteDetector(_Remote):
    def detect_raw(self, entity: str, image: ImageRef) -> List[Detection]:
        data = self._call("/v1/detect", {"image_id": image.image_id, "entity": entity})
        try:
            if int(data["image_width"]) != image.width or int(data["image_height"]) != image.height:
                raise ExpertUnavailable(
                    f"detector reports {data['image_width']}x{data['image_height']} "
                    f"for {image.image_id}, expected {image.width}x{image.height}"
                )
            detections = []
            for item in data["detections"]:
                box = BBox(*(float(v) for v in item["bbox"]))
                det = Detection(box, float(item["confidence"]))
                if not validate_bbox(box, image):
                    raise ExpertUnavailable(f"detector returned invalid bbox {item['bbox']}")
                detections.append(det)
            return detections
        except ExpertUnavailable:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ExpertUnavailable(f"malformed /v1/detect reply: {exc}") from exc


class RemoteVqa(_Remote):
    def ask(self, question: str, image: ImageRef,
            structured: Optional[CheckWorthyPart] = None) -> bool:
        payload = {"image_id": image.image_id, "question": question}
        if structured is not None:
            payload["structured"] = part_to_dict(structured)
        data = self._call("/v1/vqa", payload)
        answer = data.get("answer")
        if not isinstance(answer, str):
            raise ExpertUnavailable(f"malformed /v1/vqa reply: {data!r}")
        # Tolerate verbose answers: the leading token decides.
        return re.match(r"\s*yes\b", answer, re.IGNORECASE) is not None


class RemoteOcr(_Remote):
    def read_texts(self, image: ImageRef) -> List[str]:
        data = self._call("/v1/ocr", {"image_id": image.image_id})
        texts = data.get("texts")
        if not isinstance(texts, list) or not all(isinstance(t, str) for t in texts):
            raise ExpertUnavailable(f"malformed /v1/ocr reply: {data!r}")
        return texts


class RemoteFluency(_Remote):
    def score(self, text: str) -> float:
        data = self._call("/v1/fluency", {"text": text})
        try:
            return float(data["score"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ExpertUnavailable(f"malformed /v1/fluency reply: {data!r}") from exc


class RemoteGenerator(_Remote):
    def generate(self, prompt: str) -> str:
        data = self._call("/v1/generate", {"prompt": prompt})
        text = data.get("text")
        if not isinstance(text, str):
            raise ExpertUnavailable(f"malformed /v1/generate reply: {data!r}")
        return text
