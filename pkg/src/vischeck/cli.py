"""Command line pipeline: extract, verify, build-pref, eval-chair, dpo-check.

All subcommands stream JSONL line by line and write results in input order,
so output bytes are identical across runs and across --workers settings.
Exit codes: 0 success, 2 usage/config errors, 3 expert backend failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

from .chair import chair
from .core import (
    AnnotationStore,
    AspectKind,
    ImageRef,
    Response,
    ResponseAssessment,
    part_from_dict,
    part_to_dict,
)
from .dpo import DEFAULT_BETA, DpoInputs, dpo_loss
from .errors import AnnotationMissing, ConfigError, ExpertUnavailable, GeneratorUnavailable
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
)
from .extraction import dedup_parts, run_extraction
from .preference import AspectWeights, build_pairs, export_pairs
from .verify import assess_parts

_BACKEND_CHOICES = {
    "detector": ("oracle", "remote"),
    "vqa": ("oracle", "remote"),
    "ocr": ("oracle", "remote"),
    "fluency": ("constant", "remote"),
    "generator": ("replay", "remote"),
}

_CONFIG_KEYS = {
    "annotations_dir", "base_url", "backends", "transcript",
    "detection_threshold", "fluency_threshold", "existence_weight_multiplier",
    "ocr_case_insensitive", "beta", "weights", "max_pairs_per_image", "timeout",
}


@dataclass
class PipelineConfig:
    annotations_dir: Optional[str] = None
    base_url: Optional[str] = None
    backends: dict = field(default_factory=dict)
    transcript: Optional[str] = None
    expert: ExpertConfig = field(default_factory=ExpertConfig)
    beta: float = DEFAULT_BETA
    weights: AspectWeights = field(default_factory=AspectWeights.uniform)
    max_pairs_per_image: Optional[int] = None
    timeout: float = 30.0

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        unknown = set(data) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        backends = dict(data.get("backends", {}))
        for role, value in backends.items():
            if role not in _BACKEND_CHOICES:
                raise ConfigError(f"unknown backend role {role!r}")
            if value not in _BACKEND_CHOICES[role]:
                raise ConfigError(
                    f"backend {role!r} must be one of {_BACKEND_CHOICES[role]}, got {value!r}")
        for role, choices in _BACKEND_CHOICES.items():
            backends.setdefault(role, choices[0])
        try:
            expert = ExpertConfig(
                detection_threshold=float(data.get("detection_threshold", 0.25)),
                fluency_threshold=float(data.get("fluency_threshold", 0.75)),
                existence_weight_multiplier=float(data.get("existence_weight_multiplier", 1.0)),
                ocr_case_insensitive=bool(data.get("ocr_case_insensitive", False)),
            )
            weights_spec = data.get("weights", "uniform")
            if isinstance(weights_spec, str):
                weights = AspectWeights.preset(weights_spec)
            else:
                weights = AspectWeights(weights_spec)
            weights = weights.scaled(AspectKind.EXISTENCE, expert.existence_weight_multiplier)
            max_pairs = data.get("max_pairs_per_image")
            return cls(
                annotations_dir=data.get("annotations_dir"),
                base_url=data.get("base_url"),
                backends=backends,
                transcript=data.get("transcript"),
                expert=expert,
                beta=float(data.get("beta", DEFAULT_BETA)),
                weights=weights,
                max_pairs_per_image=None if max_pairs is None else int(max_pairs),
                timeout=float(data.get("timeout", 30.0)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config value: {exc}") from exc

    @classmethod
    def from_file(cls, path: str) -> "PipelineConfig":
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        return cls.from_dict(data)


def _load_config(args) -> PipelineConfig:
    if getattr(args, "config", None):
        return PipelineConfig.from_file(args.config)
    return PipelineConfig.from_dict({})


def _annotation_store(config: PipelineConfig) -> AnnotationStore:
    if not config.annotations_dir:
        raise ConfigError("annotations_dir is required for oracle backends")
    try:
        return AnnotationStore.from_dir(config.annotations_dir)
    except OSError as exc:
        raise ConfigError(f"cannot load annotations from {config.annotations_dir}: {exc}") from exc


def _require_base_url(config: PipelineConfig) -> str:
    if not config.base_url:
        raise ConfigError("base_url is required for remote backends")
    return config.base_url


def build_expert_set(config: PipelineConfig) -> ExpertSet:
    store = None
    if any(config.backends[r] == "oracle" for r in ("detector", "vqa", "ocr")):
        store = _annotation_store(config)
    if config.backends["detector"] == "oracle":
        detector = OracleDetector(store)
    else:
        detector = RemoteDetector(_require_base_url(config), config.timeout)
    if config.backends["vqa"] == "oracle":
        vqa = OracleVqa(store)
    else:
        vqa = RemoteVqa(_require_base_url(config), config.timeout)
    if config.backends["ocr"] == "oracle":
        ocr = OracleOcr(store)
    else:
        ocr = RemoteOcr(_require_base_url(config), config.timeout)
    if config.backends["fluency"] == "constant":
        fluency = ConstantFluency(1.0)
    else:
        fluency = RemoteFluency(_require_base_url(config), config.timeout)
    return ExpertSet(detector, vqa, ocr, fluency)


def build_generator(config: PipelineConfig):
    if config.backends["generator"] == "replay":
        if not config.transcript:
            raise ConfigError("transcript path is required for the replay generator")
        try:
            return ReplayGenerator.from_file(config.transcript)
        except OSError as exc:
            raise ConfigError(f"cannot read transcript {config.transcript}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"transcript {config.transcript} is not valid JSON: {exc}") from exc
    return RemoteGenerator(_require_base_url(config), config.timeout)


def _read_jsonl(path: str) -> List[dict]:
    rows = []
    try:
        with open(path, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ConfigError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
                if not isinstance(row, dict):
                    raise ConfigError(f"{path}:{lineno}: expected a JSON object")
                rows.append(row)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return rows


def _require(row: dict, key: str, where: str):
    if key not in row:
        raise ConfigError(f"{where}: missing key {key!r}")
    return row[key]


_PASSTHROUGH = ("response_id", "image_id", "width", "height", "instruction_id", "text")


def _passthrough(row: dict) -> dict:
    return {k: row[k] for k in _PASSTHROUGH if k in row}


# ---------------------------------------------------------------- subcommands

def cmd_extract(args) -> int:
    config = _load_config(args)
    generator = build_generator(config)
    rows = _read_jsonl(args.input)
    for i, row in enumerate(rows):
        _require(row, "response_id", f"{args.input} row {i + 1}")
        _require(row, "text", f"{args.input} row {i + 1}")

    def work(row):
        outputs = run_extraction(row["text"], generator)
        parts = dedup_parts([p for out in outputs for p in out.parts])
        warnings = [f"{out.aspect.value}: {w}" for out in outputs for w in out.parse_warnings]
        result = _passthrough(row)
        result["parts"] = [part_to_dict(p) for p in parts]
        result["warnings"] = warnings
        return result

    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        results = list(pool.map(work, rows))
    _write_jsonl(args.output, results)
    print(f"extracted parts for {len(results)} responses -> {args.output}")
    return 0


def _write_jsonl(path: str, rows: List[dict]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False) + "\n")


def cmd_verify(args) -> int:
    config = _load_config(args)
    experts = build_expert_set(config)
    store = None
    if config.annotations_dir:
        store = _annotation_store(config)
    rows = _read_jsonl(args.input)

    prepared = []
    for i, row in enumerate(rows):
        where = f"{args.input} row {i + 1}"
        response_id = _require(row, "response_id", where)
        image_id = _require(row, "image_id", where)
        try:
            parts = [part_from_dict(d) for d in _require(row, "parts", where)]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{where}: bad part: {exc}") from exc
        prepared.append((row, response_id, image_id, parts))

    def work(item):
        row, response_id, image_id, parts = item
        if "width" in row and "height" in row:
            image = ImageRef(image_id, int(row["width"]), int(row["height"]))
        elif store is not None:
            if image_id not in store:
                return None, f"no annotation for image {image_id!r}"
            image = store.get(image_id).image
        else:
            raise ConfigError(
                f"rows need width/height when no annotations_dir is configured ({response_id})")
        try:
            assessment = assess_parts(
                response_id, parts, image, experts, config.expert, config.weights)
        except AnnotationMissing as exc:
            return None, str(exc)
        result = _passthrough(row)
        result.setdefault("width", image.width)
        result.setdefault("height", image.height)
        result["overall"] = assessment.overall
        result["flags"] = list(assessment.flags)
        result["parts"] = [pa.to_dict() for pa in assessment.parts]
        return result, None

    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        outcomes = list(pool.map(work, prepared))

    results = [res for res, _ in outcomes if res is not None]
    skipped = [msg for _, msg in outcomes if msg is not None]
    for msg in skipped:
        print(f"warning: skipped response: {msg}", file=sys.stderr)
    _write_jsonl(args.output, results)
    print(f"verified {len(results)} responses ({len(skipped)} skipped) -> {args.output}")
    return 0


def cmd_build_pref(args) -> int:
    config = _load_config(args)
    rows = _read_jsonl(args.input)
    groups: dict = {}
    for i, row in enumerate(rows):
        where = f"{args.input} row {i + 1}"
        image_id = _require(row, "image_id", where)
        for key in ("response_id", "width", "height", "instruction_id", "text", "overall"):
            _require(row, key, where)
        groups.setdefault(image_id, []).append(row)

    all_pairs = []
    ties = 0
    for image_id, group in groups.items():
        pool = []
        for row in group:
            image = ImageRef(image_id, int(row["width"]), int(row["height"]))
            try:
                response = Response(row["response_id"], image,
                                    int(row["instruction_id"]), row["text"])
                assessment = ResponseAssessment(
                    row["response_id"], (), float(row["overall"]),
                    tuple(row.get("flags", ())))
            except ValueError as exc:
                raise ConfigError(f"bad row for response {row['response_id']!r}: {exc}") from exc
            pool.append((response, assessment))
        scores = [a.overall for _, a in pool]
        ties += sum(
            1
            for i in range(len(scores))
            for j in range(i + 1, len(scores))
            if scores[i] == scores[j]
        )
        all_pairs.extend(build_pairs(pool, config.max_pairs_per_image))

    export_pairs(all_pairs, args.output)
    print(f"wrote {len(all_pairs)} pairs from {len(groups)} images "
          f"({ties} ties dropped) -> {args.output}")
    return 0


def cmd_eval_chair(args) -> int:
    config = _load_config(args)
    if args.annotations:
        config.annotations_dir = args.annotations
    store = _annotation_store(config)
    rows = _read_jsonl(args.input)
    corpus = []
    for i, row in enumerate(rows):
        where = f"{args.input} row {i + 1}"
        response_id = _require(row, "response_id", where)
        image_id = _require(row, "image_id", where)
        if "entities" in row:
            entities = row["entities"]
        elif "parts" in row:
            entities = [p["entity"] for p in row["parts"]
                        if p.get("aspect") == AspectKind.EXISTENCE.value]
        else:
            raise ConfigError(f"{where}: need either 'entities' or 'parts'")
        corpus.append((response_id, image_id, entities))
    try:
        report = chair(corpus, store)
    except AnnotationMissing as exc:
        raise ConfigError(str(exc)) from exc
    payload = json.dumps(report.to_dict(), ensure_ascii=False, indent=2)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as f:
            f.write(payload + "\n")
        print(f"chair_s={report.chair_s:g} chair_i={report.chair_i:g} -> {args.output}")
    else:
        print(payload)
    return 0


def cmd_dpo_check(args) -> int:
    config = _load_config(args)
    beta = args.beta if args.beta is not None else config.beta
    rows = _read_jsonl(args.input)
    losses = []
    margins = []
    for i, row in enumerate(rows):
        where = f"{args.input} row {i + 1}"
        try:
            inputs = DpoInputs(
                logp_policy_pref=float(_require(row, "logp_policy_pref", where)),
                logp_ref_pref=float(_require(row, "logp_ref_pref", where)),
                logp_policy_rej=float(_require(row, "logp_policy_rej", where)),
                logp_ref_rej=float(_require(row, "logp_ref_rej", where)),
                beta=float(row.get("beta", beta)),
            )
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from exc
        losses.append(dpo_loss(inputs))
        margins.append(inputs.margin)
    stats = {"count": len(losses)}
    if losses:
        stats.update(
            mean_loss=sum(losses) / len(losses),
            min_loss=min(losses),
            max_loss=max(losses),
            mean_margin=sum(margins) / len(margins),
        )
    print(json.dumps(stats, ensure_ascii=False))
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vischeck",
        description="Decompose image descriptions into atomic visual checks and score them.",
    )
    parser.add_argument("--config", help="path to a JSON pipeline config")
    parser.add_argument("--workers", type=int, default=1,
                        help="worker threads for per-response work (default 1)")
    parser.add_argument("--seed", type=int, default=None,
                        help="reserved for future stochastic features; accepted and unused")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract check-worthy parts from responses")
    p.add_argument("--input", required=True, help="responses JSONL (response_id, text, ...)")
    p.add_argument("--output", required=True, help="parts JSONL to write")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("verify", help="run expert checks over extracted parts")
    p.add_argument("--input", required=True, help="parts JSONL (from extract)")
    p.add_argument("--output", required=True, help="assessments JSONL to write")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("build-pref", help="build preference pairs from assessments")
    p.add_argument("--input", required=True, help="assessments JSONL (from verify)")
    p.add_argument("--output", required=True, help="preference pairs JSONL to write")
    p.set_defaults(func=cmd_build_pref)

    p = sub.add_parser("eval-chair", help="hallucination metrics over extracted mentions")
    p.add_argument("--input", required=True,
                   help="JSONL rows with response_id, image_id and entities (or parts)")
    p.add_argument("--annotations", help="annotation directory (overrides config)")
    p.add_argument("--output", help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_eval_chair)

    p = sub.add_parser("dpo-check", help="loss statistics for a batch of log-probabilities")
    p.add_argument("--input", required=True, help="JSONL with logp_* fields per row")
    p.add_argument("--beta", type=float, default=None, help="beta override (default from config)")
    p.set_defaults(func=cmd_dpo_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GeneratorUnavailable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ExpertUnavailable as exc:
        print(f"error: expert backend unavailable: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
