"""Decompose model-written image descriptions into atomic visual checks,
run them against pluggable experts, and turn the scores into preference data.

The flow: extract check-worthy parts from a description, compile each part
into a tiny task DAG (detect boxes first, then the dependent check), execute
the tasks with detection/VQA/OCR experts, aggregate verdicts into a response
score in [-1, 0], and pair responses to the same image by score. A DPO loss
and CHAIR-style hallucination metrics round out the toolkit.
"""

from .core import (
    ASPECT_ORDER,
    AnnotationStore,
    AspectKind,
    AttributePart,
    BBox,
    CheckWorthyPart,
    CountPart,
    Detection,
    ExistencePart,
    ImageRef,
    ImageTextPart,
    PartAssessment,
    PreferencePair,
    RelationPart,
    Response,
    ResponseAssessment,
    SceneAnnotation,
    SizeCategory,
    SpatialCategory,
    TaskKind,
    TraceEntry,
    Verdict,
    bbox_from_y_down,
    load_scene_annotation,
    normalize,
    part_from_dict,
    part_to_dict,
    validate_bbox,
)
from .dpo import DpoInputs, batch_loss, dpo_grad, dpo_loss, reward
from .errors import (
    AnnotationMissing,
    ConfigError,
    EmptyBatch,
    EmptyDetections,
    ExpertUnavailable,
    GeneratorUnavailable,
    MixedImages,
)
from .experts import (
    ConstantFluency,
    ExpertConfig,
    ExpertSet,
    OracleDetector,
    OracleOcr,
    OracleVqa,
    RemoteDetector,
    RemoteFluency,
    RemoteGenerator,
    RemoteOcr,
    RemoteVqa,
    ReplayGenerator,
    ask_yes_no,
    detect,
    fluency,
    prompt_key,
    read_texts,
    resolve_entity,
)
from .extraction import (
    ExtractionOutput,
    extract_all,
    parse_count_number,
    parse_extraction,
    render_prompt,
    run_extraction,
)
from .chair import ChairReport, chair, object_mentions
from .layout import TaskLayout, TaskNode, build_layout, classify_attribute, classify_relation
from .preference import (
    AspectWeights,
    build_pairs,
    export_pairs,
    load_instructions,
    overall_score,
    read_pairs,
    weighted_score,
)
from .verify import (
    assess_part,
    assess_parts,
    assess_response,
    make_attribute_question,
    make_relation_question,
    verify_count,
    verify_ocr,
    verify_size,
    verify_spatial,
)

__version__ = "0.1.0"
