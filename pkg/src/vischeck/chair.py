"""CHAIR-style hallucination metrics over extracted object mentions.

A mention is hallucinated iff its canonical name is absent from the image's
ground-truth object set. chair_s is the fraction of responses containing at
least one hallucinated mention; chair_i is hallucinated mentions over all
mentions. Duplicated mentions count each time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Mapping, Sequence, Tuple

from .core import AnnotationStore, normalize


@dataclass(frozen=True)
class ChairReport:
    chair_s: float
    chair_i: float
    # (response_id, mention count, hallucinated count) per response
    per_response: Tuple[Tuple[str, int, int], ...] = ()

    def to_dict(self) -> dict:
        return {
            "chair_s": self.chair_s,
            "chair_i": self.chair_i,
            "per_response": [
                {"response_id": rid, "mentions": m, "hallucinated": h}
                for rid, m, h in self.per_response
            ],
        }


def object_mentions(entities: Sequence[str], synonyms: Mapping[str, str]) -> List[str]:
    """Canonicalize extracted entities through the synonym map, keeping duplicates."""
    mentions = []
    for entity in entities:
        name = normalize(entity)
        if name:
            mentions.append(synonyms.get(name, name))
    return mentions


def chair(corpus: Sequence[Tuple[str, str, Sequence[str]]],
          store: AnnotationStore) -> ChairReport:
    """Compute metrics for (response_id, image_id, entities) rows.

    Raises AnnotationMissing if any image has no annotation.
    """
    per_response = []
    total_mentions = 0
    total_hallucinated = 0
    responses_with_hallucination = 0
    for response_id, image_id, entities in corpus:
        ann = store.get(image_id)
        mentions = object_mentions(entities, ann.synonyms)
        gt = {ann.synonyms.get(name, name) for name in ann.objects}
        hallucinated = sum(1 for m in mentions if m not in gt)
        per_response.append((response_id, len(mentions), hallucinated))
        total_mentions += len(mentions)
        total_hallucinated += hallucinated
        if hallucinated:
            responses_with_hallucination += 1
    chair_s = responses_with_hallucination / len(corpus) if corpus else 0.0
    chair_i = total_hallucinated / total_mentions if total_mentions else 0.0
    return ChairReport(chair_s, chair_i, tuple(per_response))
