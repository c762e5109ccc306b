"""Scene annotation loading for stub mode.

File format (one JSON object per image):

    {
      "image_id": "scene0001",
      "width": 640, "height": 480,
      "objects": {"dog": [[x1, y1, x2, y2], ...], ...},
      "relations": [["dog", "chasing", "ball"], ...],
      "attributes": [["brown", "dog"], ...],
      "scene_texts": ["STOP"],
      "synonyms": {"puppy": "dog"}
    }

Boxes use a bottom-left pixel origin (y grows upward) and must satisfy
x1 < x2, y1 < y2 inside the image. Object, relation and attribute names are
normalized on load; scene_texts are kept verbatim.
"""

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Tuple

_ARTICLES = ("a", "an", "the")

Box = Tuple[float, float, float, float]


def normalize(text: str) -> str:
    """Lowercase, trim, collapse whitespace, drop leading articles."""
    tokens = text.lower().split()
    while tokens and tokens[0] in _ARTICLES:
        tokens.pop(0)
    return " ".join(tokens)


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Scene:
    image_id: str
    width: int
    height: int
    objects: Dict[str, Tuple[Box, ...]]
    relations: FrozenSet[Tuple[str, str, str]]
    attributes: FrozenSet[Tuple[str, str]]
    scene_texts: Tuple[str, ...] = ()
    synonyms: Dict[str, str] = field(default_factory=dict)


def _check_box(box, width, height) -> Box:
    if len(box) != 4:
        raise ValueError(f"box needs 4 coordinates, got {box!r}")
    x1, y1, x2, y2 = (float(v) for v in box)
    if not all(map(math.isfinite, (x1, y1, x2, y2))):
        raise ValueError(f"non-finite box {box!r}")
    if not (x1 < x2 and y1 < y2):
        raise ValueError(f"box {box!r} is not bottom-left/top-right ordered")
    if x1 < 0 or y1 < 0 or x2 > width or y2 > height:
        raise ValueError(f"box {box!r} exceeds {width}x{height}")
    return (x1, y1, x2, y2)


def load_scene_file(path: str) -> Scene:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    image_id = data["image_id"]
    width, height = int(data["width"]), int(data["height"])
    if width <= 0 or height <= 0:
        raise ValueError(f"{image_id}: bad dimensions {width}x{height}")

    objects: Dict[str, List[Box]] = {}
    for name, boxes in data.get("objects", {}).items():
        key = normalize(name)
        if not key:
            raise ValueError(f"{image_id}: empty object name {name!r}")
        objects.setdefault(key, []).extend(
            _check_box(b, width, height) for b in boxes)

    relations = frozenset(
        (normalize(s), normalize(r), normalize(o))
        for s, r, o in data.get("relations", []))
    attributes = frozenset(
        (normalize(a), normalize(o)) for a, o in data.get("attributes", []))
    synonyms = {normalize(k): normalize(v)
                for k, v in data.get("synonyms", {}).items()}
    for key, value in synonyms.items():
        if synonyms.get(value, value) != value:
            raise ValueError(f"{image_id}: synonym chain {key} -> {value}")

    return Scene(
        image_id=image_id,
        width=width,
        height=height,
        objects={k: tuple(v) for k, v in objects.items()},
        relations=relations,
        attributes=attributes,
        scene_texts=tuple(data.get("scene_texts", [])),
        synonyms=synonyms,
    )


def load_scenes(directory: str) -> Dict[str, Scene]:
    """Load every *.json file in a directory, keyed by image_id."""
    scenes = {}
    for entry in sorted(os.listdir(directory)):
        if not entry.endswith(".json"):
            continue
        scene = load_scene_file(os.path.join(directory, entry))
        scenes[scene.image_id] = scene
    return scenes


def resolve_name(entity: str, scene: Scene):
    """Map a queried entity to an annotated object name, or None.

    Synonyms apply first, then exact lookup, then a singular fallback that
    strips a trailing 'es' or 's'.
    """
    entity = normalize(entity)
    candidates = [entity]
    if entity.endswith("es"):
        candidates.append(entity[:-2])
    if entity.endswith("s"):
        candidates.append(entity[:-1])
    for cand in candidates:
        cand = scene.synonyms.get(cand, cand)
        if cand in scene.objects:
            return cand
    return None
