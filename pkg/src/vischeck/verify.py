"""Execute atomic tasks for each check-worthy part and produce verdicts.

Geometric checks follow the box-sum formulation: a spatial claim holds if ANY
(subject box, object box) pair satisfies the category test, a size claim if
ANY box does. All inequalities are strict; ties are false. A failed
prerequisite detection skips the dependent check (no score) rather than
failing it, except for existence claims where a missing detection IS the
failure.
"""

from __future__ import annotations

from typing import List, Optional, Sequence

from .core import (
    AspectKind,
    BBox,
    CheckWorthyPart,
    ImageRef,
    PartAssessment,
    Response,
    ResponseAssessment,
    SizeCategory,
    SpatialCategory,
    TaskKind,
    TraceEntry,
    Verdict,
)
from .errors import EmptyDetections
from .experts import ExpertConfig, ExpertSet, ask_yes_no, detect, fluency, read_texts
from .layout import TaskLayout, build_layout
from . import preference


def _pair_holds(cat: SpatialCategory, bs: BBox, bo: BBox, image: ImageRef) -> bool:
    sx, ox = bs.x1 + bs.x2, bo.x1 + bo.x2
    sy, oy = bs.y1 + bs.y2, bo.y1 + bo.y2
    if cat is SpatialCategory.LEFT:
        return sx < ox
    if cat is SpatialCategory.RIGHT:
        return sx > ox
    if cat is SpatialCategory.TOP:
        return sy > oy
    if cat is SpatialCategory.BOTTOM:
        return sy < oy
    # near: aligned within a tenth of the image extent on either axis
    return abs(sx - ox) < 0.1 * image.width or abs(sy - oy) < 0.1 * image.height


def verify_spatial(boxes_s: Sequence[BBox], boxes_o: Sequence[BBox],
                   cat: SpatialCategory, image: ImageRef) -> bool:
    if not boxes_s or not boxes_o:
        raise EmptyDetections("verify_spatial needs at least one box on each side")
    return any(_pair_holds(cat, bs, bo, image) for bs in boxes_s for bo in boxes_o)


def _box_holds(cat: SizeCategory, box: BBox, image: ImageRef) -> bool:
    wf = (box.x2 - box.x1) / image.width
    hf = (box.y2 - box.y1) / image.height
    if cat is SizeCategory.LARGE:
        return hf > 0.4 or wf > 0.4
    if cat is SizeCategory.SMALL:
        return wf < 0.3 and hf < 0.3
    if cat is SizeCategory.LONG:
        return hf > 0.5 or wf > 0.5
    if cat is SizeCategory.SHORT:
        return wf < 0.3 and hf < 0.3
    # tall
    return hf > 0.4


def verify_size(boxes: Sequence[BBox], cat: SizeCategory, image: ImageRef) -> bool:
    if not boxes:
        raise EmptyDetections("verify_size needs at least one box")
    return any(_box_holds(cat, b, image) for b in boxes)


def make_relation_question(subject: str, relation: str, obj: str) -> str:
    if not (subject and relation and obj):
        raise ValueError("question fields must be nonempty")
    return f"Is the {subject} {relation} {obj}?"


def make_attribute_question(attribute: str, obj: str) -> str:
    if not (attribute and obj):
        raise ValueError("question fields must be nonempty")
    return f"Is the {obj} {attribute}?"


def verify_count(boxes: Sequence[BBox], expected: int) -> bool:
    if not boxes:
        raise EmptyDetections("verify_count needs at least one box")
    return len(boxes) == expected


def verify_ocr(claimed: str, detected: Sequence[str], case_insensitive: bool = False) -> bool:
    """Exact match after trimming surrounding whitespace."""
    target = claimed.strip()
    if case_insensitive:
        target = target.lower()
        return any(target == d.strip().lower() for d in detected)
    return any(target == d.strip() for d in detected)


def assess_part(part: CheckWorthyPart, layout: TaskLayout, image: ImageRef,
                experts: ExpertSet, config: ExpertConfig) -> PartAssessment:
    """Walk the part's task DAG, recording a trace entry per node."""
    if layout.part != part:
        raise ValueError("layout was built for a different part")
    trace: List[TraceEntry] = []
    det_boxes = {}
    check_outcome: Optional[bool] = None
    skipped = False

    for node in layout.nodes:
        if node.kind is TaskKind.DET:
            boxes = detect(experts.detector, node.inputs[0], image, config.detection_threshold)
            det_boxes[node.id] = boxes
            trace.append(TraceEntry(
                node.kind, None,
                f"entity={node.inputs[0]} boxes={len(boxes)}", bool(boxes)))
            continue

        if node.kind is TaskKind.OCR:
            texts = read_texts(experts.ocr, image)
            ok = verify_ocr(part.text, texts, config.ocr_case_insensitive)
            trace.append(TraceEntry(
                node.kind, None, f"text={part.text!r} detected={len(texts)}", ok))
            check_outcome = ok
            continue

        summary = " ".join(node.inputs)
        if any(not det_boxes[p] for p in node.prerequisites):
            trace.append(TraceEntry(node.kind, node.category,
                                    f"{summary} [prerequisite not detected]", None))
            skipped = True
            continue

        if node.kind is TaskKind.RELA_SPATIAL:
            ok = verify_spatial(det_boxes[node.prerequisites[0]],
                                det_boxes[node.prerequisites[1]], node.category, image)
        elif node.kind is TaskKind.ATTR_SIZE:
            ok = verify_size(det_boxes[node.prerequisites[0]], node.category, image)
        elif node.kind is TaskKind.COUNT:
            boxes = det_boxes[node.prerequisites[0]]
            ok = verify_count(boxes, part.number)
            summary = f"expected={part.number} boxes={len(boxes)}"
        else:
            # general relation/attribute question, gated on fluency
            if node.kind is TaskKind.RELA_GENERAL:
                question = make_relation_question(part.subject, part.relation, part.obj)
            else:
                question = make_attribute_question(part.attribute, part.obj)
            summary = f"question={question!r}"
            score = fluency(experts.fluency, question)
            if score < config.fluency_threshold:
                trace.append(TraceEntry(node.kind, node.category,
                                        f"{summary} [fluency {score:g}]", None))
                skipped = True
                continue
            ok = ask_yes_no(experts.vqa, question, image, structured=part)
        trace.append(TraceEntry(node.kind, node.category, summary, ok))
        check_outcome = ok

    if part.aspect is AspectKind.EXISTENCE:
        verdict = Verdict.PASS if trace[0].outcome else Verdict.FAIL
    elif skipped:
        verdict = Verdict.SKIPPED
    else:
        verdict = Verdict.PASS if check_outcome else Verdict.FAIL
    return PartAssessment(part, verdict, tuple(trace))


def assess_parts(response_id: str, parts: Sequence[CheckWorthyPart], image: ImageRef,
                 experts: ExpertSet, config: ExpertConfig,
                 weights: Optional["preference.AspectWeights"] = None) -> ResponseAssessment:
    """Assess a list of parts against one image and aggregate the overall score."""
    if weights is None:
        weights = preference.AspectWeights.uniform()
    assessments = tuple(
        assess_part(p, build_layout(p), image, experts, config) for p in parts
    )
    overall, scorable = preference.weighted_score(assessments, weights)
    if not assessments:
        flags = ("no_checkworthy_content",)
    elif not scorable:
        flags = ("no_scorable_parts",)
    else:
        flags = ()
    return ResponseAssessment(response_id, assessments, overall, flags)


def assess_response(response: Response, parts: Sequence[CheckWorthyPart],
                    experts: ExpertSet, config: ExpertConfig,
                    weights: Optional["preference.AspectWeights"] = None) -> ResponseAssessment:
    """Assess every part of one response and aggregate the overall score."""
    return assess_parts(response.response_id, parts, response.image, experts, config, weights)
