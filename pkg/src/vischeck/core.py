"""Core value types: images, boxes, check-worthy parts, verdicts, scene annotations.

All coordinates use a bottom-left origin with y growing upward. Anything
arriving in top-left/y-down form must be converted exactly once at the
ingestion boundary (see bbox_from_y_down).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import ClassVar, Iterable, Mapping, Sequence, Union

from .errors import AnnotationMissing

_ARTICLES = ("a", "an", "the")


def normalize(text: str) -> str:
    """Lowercase, trim, collapse inner whitespace, drop leading articles.

    Idempotent: articles are stripped repeatedly, so a second application is
    a no-op.
    """
    tokens = text.lower().split()
    while tokens and tokens[0] in _ARTICLES:
        tokens.pop(0)
    return " ".join(tokens)


def collapse_ws(text: str) -> str:
    """Trim and collapse whitespace runs, preserving case (used for scene text)."""
    return " ".join(text.split())


class AspectKind(Enum):
    EXISTENCE = "existence"
    RELATION = "relation"
    ATTRIBUTE = "attribute"
    COUNT = "count"
    IMAGE_TEXT = "image_text"


# Fixed processing order for the five aspects.
ASPECT_ORDER = (
    AspectKind.EXISTENCE,
    AspectKind.RELATION,
    AspectKind.ATTRIBUTE,
    AspectKind.COUNT,
    AspectKind.IMAGE_TEXT,
)


@dataclass(frozen=True)
class ImageRef:
    image_id: str
    width: int
    height: int

    def __post_init__(self):
        if not self.image_id:
            raise ValueError("image_id must be nonempty")
        if not (isinstance(self.width, int) and isinstance(self.height, int)):
            raise ValueError("image dimensions must be integers")
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be >= 1")


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box, bottom-left origin, y-up.

    The constructor only rejects non-finite coordinates so that
    validate_bbox stays a total predicate; ordering and image bounds are
    enforced at ingestion boundaries via validate_bbox.
    """

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        for v in (self.x1, self.y1, self.x2, self.y2):
            if not math.isfinite(v):
                raise ValueError("bbox coordinates must be finite")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1


def validate_bbox(box: BBox, image: ImageRef) -> bool:
    """True iff the box is well-ordered and inside the image bounds."""
    return (
        box.x1 < box.x2
        and box.y1 < box.y2
        and 0 <= box.x1
        and box.x2 <= image.width
        and 0 <= box.y1
        and box.y2 <= image.height
    )


def bbox_from_y_down(coords: Sequence[float], height: float) -> BBox:
    """Convert a top-left-origin box [x1, y1, x2, y2] (y grows downward) to y-up.

    Applies y' = height - y to both y values and swaps them to restore y1 < y2.
    """
    x1, y1, x2, y2 = coords
    return BBox(float(x1), float(height) - float(y2), float(x2), float(height) - float(y1))


@dataclass(frozen=True)
class Detection:
    bbox: BBox
    confidence: float

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence out of range: {self.confidence}")


@dataclass(frozen=True)
class Response:
    """A model-written image description under assessment."""

    response_id: str
    image: ImageRef
    instruction_id: int
    text: str

    def __post_init__(self):
        if not self.response_id:
            raise ValueError("response_id must be nonempty")
        if not (0 <= self.instruction_id <= 7):
            raise ValueError("instruction_id must be in [0, 7]")
        if not self.text:
            raise ValueError("response text must be nonempty")


def _norm_field(obj, name: str):
    value = normalize(getattr(obj, name))
    if not value:
        raise ValueError(f"{type(obj).__name__}.{name} empty after normalization")
    object.__setattr__(obj, name, value)


@dataclass(frozen=True)
class ExistencePart:
    entity: str
    aspect: ClassVar[AspectKind] = AspectKind.EXISTENCE

    def __post_init__(self):
        _norm_field(self, "entity")


@dataclass(frozen=True)
class RelationPart:
    subject: str
    relation: str
    obj: str
    aspect: ClassVar[AspectKind] = AspectKind.RELATION

    def __post_init__(self):
        _norm_field(self, "subject")
        _norm_field(self, "relation")
        _norm_field(self, "obj")


@dataclass(frozen=True)
class AttributePart:
    attribute: str
    obj: str
    aspect: ClassVar[AspectKind] = AspectKind.ATTRIBUTE

    def __post_init__(self):
        _norm_field(self, "attribute")
        _norm_field(self, "obj")


@dataclass(frozen=True)
class CountPart:
    number: int
    obj: str
    aspect: ClassVar[AspectKind] = AspectKind.COUNT

    def __post_init__(self):
        if not (isinstance(self.number, int) and self.number >= 1):
            raise ValueError(f"count must be an integer >= 1, got {self.number!r}")
        _norm_field(self, "obj")


@dataclass(frozen=True)
class ImageTextPart:
    """A claimed piece of scene text. Case is preserved: the OCR check is
    case-sensitive by default, so lowercasing here would corrupt it."""

    text: str
    aspect: ClassVar[AspectKind] = AspectKind.IMAGE_TEXT

    def __post_init__(self):
        value = collapse_ws(self.text)
        if not value:
            raise ValueError("ImageTextPart.text empty after trimming")
        object.__setattr__(self, "text", value)


CheckWorthyPart = Union[ExistencePart, RelationPart, AttributePart, CountPart, ImageTextPart]


def part_to_dict(part: CheckWorthyPart) -> dict:
    if isinstance(part, ExistencePart):
        return {"aspect": part.aspect.value, "entity": part.entity}
    if isinstance(part, RelationPart):
        return {
            "aspect": part.aspect.value,
            "subject": part.subject,
            "relation": part.relation,
            "object": part.obj,
        }
    if isinstance(part, AttributePart):
        return {"aspect": part.aspect.value, "attribute": part.attribute, "object": part.obj}
    if isinstance(part, CountPart):
        return {"aspect": part.aspect.value, "number": part.number, "object": part.obj}
    if isinstance(part, ImageTextPart):
        return {"aspect": part.aspect.value, "text": part.text}
    raise TypeError(f"not a check-worthy part: {part!r}")


def part_from_dict(d: Mapping) -> CheckWorthyPart:
    aspect = AspectKind(d["aspect"])
    if aspect is AspectKind.EXISTENCE:
        return ExistencePart(d["entity"])
    if aspect is AspectKind.RELATION:
        return RelationPart(d["subject"], d["relation"], d["object"])
    if aspect is AspectKind.ATTRIBUTE:
        return AttributePart(d["attribute"], d["object"])
    if aspect is AspectKind.COUNT:
        return CountPart(int(d["number"]), d["object"])
    return ImageTextPart(d["text"])


class Verdict(Enum):
    PASS = "pass"
    FAIL = "fail"
    SKIPPED = "skipped"

    @property
    def score(self):
        """0 for Pass, -1 for Fail, None (no score) for Skipped."""
        if self is Verdict.PASS:
            return 0.0
        if self is Verdict.FAIL:
            return -1.0
        return None


class TaskKind(Enum):
    DET = "det"
    RELA_GENERAL = "rela_general"
    RELA_SPATIAL = "rela_spatial"
    ATTR_GENERAL = "attr_general"
    ATTR_SIZE = "attr_size"
    COUNT = "count"
    OCR = "ocr"


class SpatialCategory(Enum):
    LEFT = "left"
    RIGHT = "right"
    TOP = "top"
    BOTTOM = "bottom"
    NEAR = "near"


class SizeCategory(Enum):
    LARGE = "large"
    SMALL = "small"
    LONG = "long"
    SHORT = "short"
    TALL = "tall"


@dataclass(frozen=True)
class TraceEntry:
    """One executed (or skipped) atomic task in a part assessment."""

    kind: TaskKind
    category: Union[SpatialCategory, SizeCategory, None]
    summary: str
    outcome: Union[bool, None]  # None means the task was skipped

    def to_dict(self) -> dict:
        return {
            "task": self.kind.value,
            "category": self.category.value if self.category else None,
            "summary": self.summary,
            "outcome": "skipped" if self.outcome is None else self.outcome,
        }


@dataclass(frozen=True)
class PartAssessment:
    part: CheckWorthyPart
    verdict: Verdict
    trace: tuple = ()

    def to_dict(self) -> dict:
        return {
            "part": part_to_dict(self.part),
            "verdict": self.verdict.value,
            "trace": [t.to_dict() for t in self.trace],
        }


@dataclass(frozen=True)
class ResponseAssessment:
    response_id: str
    parts: tuple = ()
    overall: float = 0.0
    flags: tuple = ()

    def __post_init__(self):
        if not (-1.0 <= self.overall <= 0.0):
            raise ValueError(f"overall score out of [-1, 0]: {self.overall}")


@dataclass(frozen=True)
class PreferencePair:
    image: ImageRef
    instruction_id_pref: int
    instruction_id_rej: int
    pref_text: str
    rej_text: str
    score_pref: float
    score_rej: float

    def __post_init__(self):
        if not self.score_pref > self.score_rej:
            raise ValueError("preferred score must be strictly greater than rejected score")


@dataclass(frozen=True)
class SceneAnnotation:
    """Ground truth for one image: object boxes, relation/attribute sets,
    scene texts, and an idempotent synonym map."""

    image: ImageRef
    objects: Mapping[str, tuple] = field(default_factory=dict)
    relations: frozenset = frozenset()
    attributes: frozenset = frozenset()
    scene_texts: tuple = ()
    synonyms: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for name, boxes in self.objects.items():
            for b in boxes:
                if not validate_bbox(b, self.image):
                    raise ValueError(f"invalid bbox for object {name!r}: {b}")
        for value in self.synonyms.values():
            if self.synonyms.get(value, value) != value:
                raise ValueError(f"synonym map is not idempotent at {value!r}")


def load_scene_annotation(path: str) -> SceneAnnotation:
    """Load one annotation JSON file (y-up coordinates). Unknown keys ignored."""
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    image = ImageRef(data["image_id"], int(data["width"]), int(data["height"]))
    objects = {}
    for name, boxes in data.get("objects", {}).items():
        key = normalize(name)
        if not key:
            raise ValueError(f"object name {name!r} empty after normalization in {path}")
        objects[key] = tuple(BBox(*(float(v) for v in b)) for b in boxes)
    relations = frozenset(
        (normalize(s), normalize(r), normalize(o)) for s, r, o in data.get("relations", [])
    )
    attributes = frozenset((normalize(a), normalize(o)) for a, o in data.get("attributes", []))
    scene_texts = tuple(data.get("scene_texts", []))
    synonyms = {normalize(k): normalize(v) for k, v in data.get("synonyms", {}).items()}
    return SceneAnnotation(image, objects, relations, attributes, scene_texts, synonyms)


class AnnotationStore:
    """Immutable image_id -> SceneAnnotation lookup, loaded eagerly."""

    def __init__(self, annotations: Iterable[SceneAnnotation] = ()):
        self._by_id = {}
        for ann in annotations:
            self._by_id[ann.image.image_id] = ann

    @classmethod
    def from_dir(cls, directory: str) -> "AnnotationStore":
        anns = []
        for name in sorted(os.listdir(directory)):
            if name.endswith(".json"):
                anns.append(load_scene_annotation(os.path.join(directory, name)))
        return cls(anns)

    def get(self, image_id: str) -> SceneAnnotation:
        try:
            return self._by_id[image_id]
        except KeyError:
            raise AnnotationMissing(f"no annotation for image {image_id!r}") from None

    def image_ids(self):
        return sorted(self._by_id)

    def __contains__(self, image_id: str) -> bool:
        return image_id in self._by_id
