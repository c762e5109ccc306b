"""Compile a check-worthy part into its small DAG of atomic tasks.

Detection nodes come first and have no prerequisites; the aspect's check node
(if any) depends on them. Relation and attribute phrases are routed to
geometric checks by keyword, with a fixed priority when several match.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Optional, Tuple, Union

from .core import (
    AspectKind,
    AttributePart,
    CheckWorthyPart,
    CountPart,
    ExistencePart,
    ImageTextPart,
    RelationPart,
    SizeCategory,
    SpatialCategory,
    TaskKind,
)

log = logging.getLogger(__name__)

# category -> (exact synonym set, containment keyword); priority is dict order.
_SPATIAL_RULES = {
    SpatialCategory.LEFT: (frozenset(), "left"),
    SpatialCategory.RIGHT: (frozenset(), "right"),
    SpatialCategory.TOP: (frozenset({"above"}), "top"),
    SpatialCategory.BOTTOM: (frozenset({"below", "under", "beneath", "underneath"}), "bottom"),
    SpatialCategory.NEAR: (frozenset({"next", "next to"}), "near"),
}

_SIZE_RULES = {
    SizeCategory.LARGE: (frozenset({"huge", "big"}), "large"),
    SizeCategory.SMALL: (frozenset({"tiny"}), "small"),
    SizeCategory.LONG: (frozenset({"long"}), None),
    SizeCategory.TALL: (frozenset({"tall", "high"}), None),
    SizeCategory.SHORT: (frozenset({"short"}), None),
}


def _contains_word(text: str, word: str) -> bool:
    return re.search(rf"\b{word}\b", text) is not None


def _match(rules, phrase: str):
    hits = [
        cat
        for cat, (exact, keyword) in rules.items()
        if phrase in exact or (keyword and _contains_word(phrase, keyword))
    ]
    if len(hits) > 1:
        log.warning(
            "phrase %r matches several categories %s; keeping %s by priority",
            phrase, [c.value for c in hits], hits[0].value,
        )
    return hits[0] if hits else None


def classify_relation(rela: str) -> Optional[SpatialCategory]:
    """Spatial category for a (normalized) relation phrase, or None for general."""
    cat = _match(_SPATIAL_RULES, rela)
    if cat is SpatialCategory.NEAR and rela == "next":
        log.warning("relation 'next' routed to the near check; may over-trigger")
    return cat


def classify_attribute(attr: str) -> Optional[SizeCategory]:
    """Size category for a (normalized) attribute phrase, or None for general."""
    return _match(_SIZE_RULES, attr)


@dataclass(frozen=True)
class TaskNode:
    id: int
    kind: TaskKind
    inputs: Tuple[str, ...]
    prerequisites: Tuple[int, ...] = ()
    category: Union[SpatialCategory, SizeCategory, None] = None


@dataclass(frozen=True)
class TaskLayout:
    part: CheckWorthyPart
    nodes: Tuple[TaskNode, ...]


def build_layout(part: CheckWorthyPart) -> TaskLayout:
    """The atomic-task DAG for one part (at most three nodes, ids dense from 0)."""
    if isinstance(part, ExistencePart):
        nodes = (TaskNode(0, TaskKind.DET, (part.entity,)),)
    elif isinstance(part, RelationPart):
        cat = classify_relation(part.relation)
        kind = TaskKind.RELA_GENERAL if cat is None else TaskKind.RELA_SPATIAL
        nodes = (
            TaskNode(0, TaskKind.DET, (part.subject,)),
            TaskNode(1, TaskKind.DET, (part.obj,)),
            TaskNode(2, kind, (part.subject, part.relation, part.obj), (0, 1), cat),
        )
    elif isinstance(part, AttributePart):
        cat = classify_attribute(part.attribute)
        kind = TaskKind.ATTR_GENERAL if cat is None else TaskKind.ATTR_SIZE
        nodes = (
            TaskNode(0, TaskKind.DET, (part.obj,)),
            TaskNode(1, kind, (part.attribute, part.obj), (0,), cat),
        )
    elif isinstance(part, CountPart):
        nodes = (
            TaskNode(0, TaskKind.DET, (part.obj,)),
            TaskNode(1, TaskKind.COUNT, (str(part.number), part.obj), (0,)),
        )
    elif isinstance(part, ImageTextPart):
        nodes = (TaskNode(0, TaskKind.OCR, (part.text,)),)
    else:
        raise TypeError(f"not a check-worthy part: {part!r}")
    return TaskLayout(part, nodes)
