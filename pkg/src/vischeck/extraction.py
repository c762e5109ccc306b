"""Turn a free-form image description into typed check-worthy parts.

One prompt per aspect (stored verbatim as package fixtures) is sent to a text
generator; the tagged answer line is parsed tolerantly. Parsing is total:
malformed pieces are dropped with warnings, never raised.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from typing import List, Sequence

from .core import (
    ASPECT_ORDER,
    AspectKind,
    AttributePart,
    CheckWorthyPart,
    CountPart,
    ExistencePart,
    ImageTextPart,
    RelationPart,
)
from .errors import ExpertUnavailable, GeneratorUnavailable

_TAGS = {
    AspectKind.EXISTENCE: "[ENT]:",
    AspectKind.RELATION: "[RELA]:",
    AspectKind.ATTRIBUTE: "[ATTR]:",
    AspectKind.COUNT: "[COUNT]:",
    AspectKind.IMAGE_TEXT: "[TEXT]:",
}

_FIXTURES = {
    AspectKind.EXISTENCE: "prompt_existence.txt",
    AspectKind.RELATION: "prompt_relation.txt",
    AspectKind.ATTRIBUTE: "prompt_attribute.txt",
    AspectKind.COUNT: "prompt_count.txt",
    AspectKind.IMAGE_TEXT: "prompt_image_text.txt",
}

_PLACEHOLDER = "{description}"

_NUMBER_WORDS = {
    w: i
    for i, w in enumerate(
        [
            "one", "two", "three", "four", "five", "six", "seven",
            "eight", "nine", "ten", "eleven", "twelve", "thirteen",
            "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
            "nineteen", "twenty",
        ],
        start=1,
    )
}

_GROUP_RE = re.compile(r"\(([^()]*)\)")

_templates = {}


def _load_template(aspect: AspectKind) -> str:
    if aspect not in _templates:
        text = resources.files("vischeck.fixtures").joinpath(_FIXTURES[aspect]).read_text("utf-8")
        _templates[aspect] = text
    return _templates[aspect]


def render_prompt(aspect: AspectKind, description: str) -> str:
    """Substitute the description into the stored template for this aspect."""
    if not description:
        raise ValueError("description must be nonempty")
    return _load_template(aspect).replace(_PLACEHOLDER, description)


@dataclass
class ExtractionOutput:
    aspect: AspectKind
    raw: str
    parts: List[CheckWorthyPart] = field(default_factory=list)
    parse_warnings: List[str] = field(default_factory=list)


def parse_count_number(token: str) -> int:
    """'5' or 'five' -> 5. Words cover one..twenty. Raises ValueError otherwise."""
    t = token.strip().lower()
    if t.isdigit():
        n = int(t)
        if n >= 1:
            return n
        raise ValueError(f"count must be >= 1: {token!r}")
    if t in _NUMBER_WORDS:
        return _NUMBER_WORDS[t]
    raise ValueError(f"unsupported count token: {token!r}")


def _answer_region(aspect: AspectKind, raw: str) -> str:
    """The text to parse: after the last tag occurrence (to end of that line),
    or the whole raw output when no tag is present (tagless fallback)."""
    tag = _TAGS[aspect]
    idx = raw.rfind(tag)
    if idx < 0:
        return raw.strip()
    return raw[idx + len(tag):].split("\n", 1)[0].strip()


def _is_none_marker(content: str) -> bool:
    return content.strip().rstrip(".").strip().lower() == "none"


def _paren_groups(content: str, warnings: List[str]) -> List[str]:
    groups = _GROUP_RE.findall(content)
    leftover = _GROUP_RE.sub("", content).strip(" \t;,.")
    if leftover:
        warnings.append(f"unparsed content: {leftover!r}")
    return groups


def _parse_listing(aspect: AspectKind, content: str, warnings: List[str]) -> List[CheckWorthyPart]:
    # Existence: comma-separated names; ImageText: semicolon-separated strings.
    parts: List[CheckWorthyPart] = []
    sep = "," if aspect is AspectKind.EXISTENCE else ";"
    groups = _paren_groups(content, warnings)
    if not groups and content:
        warnings.append(f"no parenthesized list found: {content!r}")
    for group in groups:
        for item in group.split(sep):
            if not item.strip():
                warnings.append("dropped empty item")
                continue
            try:
                if aspect is AspectKind.EXISTENCE:
                    parts.append(ExistencePart(item))
                else:
                    parts.append(ImageTextPart(item))
            except ValueError as exc:
                warnings.append(f"dropped item {item!r}: {exc}")
    return parts


def _parse_tuples(aspect: AspectKind, content: str, warnings: List[str]) -> List[CheckWorthyPart]:
    n_fields = 3 if aspect is AspectKind.RELATION else 2
    parts: List[CheckWorthyPart] = []
    for piece in content.split(";"):
        piece = piece.strip()
        if piece.endswith("."):
            piece = piece[:-1].rstrip()
        if not piece:
            continue
        m = re.fullmatch(r"\(([^()]*)\)", piece)
        if not m:
            warnings.append(f"malformed tuple: {piece!r}")
            continue
        fields = [f.strip() for f in m.group(1).split(",")]
        if len(fields) != n_fields:
            warnings.append(f"expected {n_fields} fields, got {len(fields)}: {piece!r}")
            continue
        try:
            if aspect is AspectKind.RELATION:
                parts.append(RelationPart(fields[0], fields[1], fields[2]))
            elif aspect is AspectKind.ATTRIBUTE:
                parts.append(AttributePart(fields[0], fields[1]))
            else:
                parts.append(CountPart(parse_count_number(fields[0]), fields[1]))
        except ValueError as exc:
            warnings.append(f"dropped tuple {piece!r}: {exc}")
    return parts


def parse_extraction(aspect: AspectKind, raw: str) -> ExtractionOutput:
    """Parse one generator reply. Total: never raises on bad input."""
    out = ExtractionOutput(aspect, raw)
    content = _answer_region(aspect, raw)
    if not content or _is_none_marker(content):
        return out
    if aspect in (AspectKind.EXISTENCE, AspectKind.IMAGE_TEXT):
        out.parts = _parse_listing(aspect, content, out.parse_warnings)
    else:
        out.parts = _parse_tuples(aspect, content, out.parse_warnings)
    return out


def run_extraction(description: str, generator) -> List[ExtractionOutput]:
    """Run all five aspect extractions in the fixed aspect order."""
    outputs = []
    for aspect in ASPECT_ORDER:
        prompt = render_prompt(aspect, description)
        try:
            raw = generator.generate(prompt)
        except GeneratorUnavailable:
            raise
        except ExpertUnavailable as exc:
            raise GeneratorUnavailable(aspect, str(exc)) from exc
        outputs.append(parse_extraction(aspect, raw))
    return outputs


def dedup_parts(parts: Sequence[CheckWorthyPart]) -> List[CheckWorthyPart]:
    """Drop exact duplicates (fields are already normalized), keeping first occurrence."""
    seen = set()
    unique = []
    for p in parts:
        if p not in seen:
            seen.add(p)
            unique.append(p)
    return unique


def extract_all(description: str, generator) -> List[CheckWorthyPart]:
    """All check-worthy parts of a description, aspect order, deduplicated."""
    parts: List[CheckWorthyPart] = []
    for out in run_extraction(description, generator):
        parts.extend(out.parts)
    return dedup_parts(parts)
