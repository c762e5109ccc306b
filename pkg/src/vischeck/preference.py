"""Aggregate part verdicts into response scores and build preference pairs."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .core import (
    ASPECT_ORDER,
    AspectKind,
    ImageRef,
    PartAssessment,
    PreferencePair,
    Response,
    ResponseAssessment,
)
from .errors import MixedImages

_PRESETS = {
    "uniform": {},
    # doubles the penalty weight of hallucinated objects
    "qwen": {AspectKind.EXISTENCE: 2.0},
}


@dataclass(frozen=True)
class AspectWeights:
    weights: Mapping[AspectKind, float] = field(default_factory=dict)

    def __post_init__(self):
        full = {aspect: 1.0 for aspect in ASPECT_ORDER}
        for aspect, w in dict(self.weights).items():
            full[AspectKind(aspect) if not isinstance(aspect, AspectKind) else aspect] = float(w)
        if any(w < 0 for w in full.values()):
            raise ValueError("aspect weights must be >= 0")
        if not any(w > 0 for w in full.values()):
            raise ValueError("at least one aspect weight must be > 0")
        object.__setattr__(self, "weights", full)

    @classmethod
    def uniform(cls) -> "AspectWeights":
        return cls()

    @classmethod
    def preset(cls, name: str) -> "AspectWeights":
        try:
            return cls(_PRESETS[name])
        except KeyError:
            raise ValueError(f"unknown weight preset {name!r}") from None

    def weight(self, aspect: AspectKind) -> float:
        return self.weights[aspect]

    def scaled(self, aspect: AspectKind, factor: float) -> "AspectWeights":
        updated = dict(self.weights)
        updated[aspect] = updated[aspect] * factor
        return AspectWeights(updated)


def weighted_score(parts: Sequence[PartAssessment],
                   weights: AspectWeights) -> Tuple[float, bool]:
    """Weighted mean of part scores over scorable (non-skipped) parts.

    Returns (score, had_scorable). Skipped parts contribute nothing to either
    numerator or denominator, so their presence never moves the score.
    """
    num = 0.0
    den = 0.0
    for pa in parts:
        s = pa.verdict.score
        if s is None:
            continue
        w = weights.weight(pa.part.aspect)
        num += w * s
        den += w
    if den == 0.0:
        return 0.0, False
    return num / den, True


def overall_score(assessment: ResponseAssessment, weights: AspectWeights) -> float:
    return weighted_score(assessment.parts, weights)[0]


def build_pairs(pool: Sequence[Tuple[Response, ResponseAssessment]],
                max_pairs_per_image: Optional[int] = None) -> List[PreferencePair]:
    """All strictly-ordered preference pairs among responses to one image.

    Equal scores are dropped (no tie pairs). Output is sorted by the pool
    indices (preferred first, then rejected) so it is deterministic.
    """
    if not pool:
        return []
    image = pool[0][0].image
    for resp, _ in pool:
        if resp.image != image:
            raise MixedImages(
                f"responses span images {image.image_id!r} and {resp.image.image_id!r}")
    ordered: List[Tuple[int, int]] = []
    for i in range(len(pool)):
        for j in range(i + 1, len(pool)):
            si = pool[i][1].overall
            sj = pool[j][1].overall
            if si == sj:
                continue
            ordered.append((i, j) if si > sj else (j, i))
    ordered.sort()
    if max_pairs_per_image is not None:
        ordered = ordered[:max_pairs_per_image]
    pairs = []
    for p, r in ordered:
        pref, pref_a = pool[p]
        rej, rej_a = pool[r]
        pairs.append(PreferencePair(
            image=image,
            instruction_id_pref=pref.instruction_id,
            instruction_id_rej=rej.instruction_id,
            pref_text=pref.text,
            rej_text=rej.text,
            score_pref=pref_a.overall,
            score_rej=rej_a.overall,
        ))
    return pairs


_instructions_cache: Optional[Tuple[str, ...]] = None


def load_instructions() -> Tuple[str, ...]:
    """The eight description instructions, indexed by instruction_id."""
    global _instructions_cache
    if _instructions_cache is None:
        text = resources.files("vischeck.fixtures").joinpath("instructions.txt").read_text("utf-8")
        lines = tuple(line for line in text.splitlines() if line.strip())
        if len(lines) != 8:
            raise RuntimeError(f"instruction fixture must have 8 lines, found {len(lines)}")
        _instructions_cache = lines
    return _instructions_cache


def pair_to_dict(pair: PreferencePair) -> Dict:
    instructions = load_instructions()
    return {
        "image_id": pair.image.image_id,
        "instruction_id_pref": pair.instruction_id_pref,
        "instruction_id_rej": pair.instruction_id_rej,
        "prompt_pref": instructions[pair.instruction_id_pref],
        "prompt_rej": instructions[pair.instruction_id_rej],
        "chosen": pair.pref_text,
        "rejected": pair.rej_text,
        "score_pref": pair.score_pref,
        "score_rej": pair.score_rej,
    }


def export_pairs(pairs: Sequence[PreferencePair], path: str) -> int:
    """Write pairs as JSONL (UTF-8, one trailing newline per line)."""
    with open(path, "w", encoding="utf-8") as f:
        for pair in pairs:
            f.write(json.dumps(pair_to_dict(pair), ensure_ascii=False) + "\n")
    return len(pairs)


def read_pairs(path: str, images: Mapping[str, ImageRef]) -> List[PreferencePair]:
    """Read an export back; image dims are not in the file so callers supply them."""
    pairs = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            row = json.loads(line)
            pairs.append(PreferencePair(
                image=images[row["image_id"]],
                instruction_id_pref=int(row["instruction_id_pref"]),
                instruction_id_rej=int(row["instruction_id_rej"]),
                pref_text=row["chosen"],
                rej_text=row["rejected"],
                score_pref=float(row["score_pref"]),
                score_rej=float(row["score_rej"]),
            ))
    return pairs
