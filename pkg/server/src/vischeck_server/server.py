"""The HTTP server: wire protocol endpoints over stub or model backends.

Wire protocol (JSON bodies both ways):

    POST /v1/detect   {"image_id", "entity"}
                      -> {"image_width", "image_height",
                          "detections": [{"bbox": [x1,y1,x2,y2], "confidence": f}, ...]}
    POST /v1/vqa      {"image_id", "question", "structured": {...}} -> {"answer": "yes"|"no"}
    POST /v1/ocr      {"image_id"} -> {"texts": [...]}
    POST /v1/fluency  {"text"} -> {"score": f}
    POST /v1/generate {"prompt"} -> {"text": ...}
    GET  /v1/health   -> {"status": "ok", "mode": ...}

Errors: 400 {"error": "bad_request"} for malformed bodies, 404
{"error": "unknown_image"} / {"error": "unknown_prompt"} for unknown keys,
500 {"error": "adapter_failure"} when a model adapter breaks. Boxes are in
the bottom-left-origin pixel convention; adapters wrapping top-left-origin
models should pass their boxes through convert_coords first.
"""

import json
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .scenes import Scene, load_scenes, normalize, prompt_hash, resolve_name

Box = Tuple[float, float, float, float]


def convert_coords(boxes: Sequence[Sequence[float]], height: float) -> List[Box]:
    """Map top-left-origin boxes to bottom-left-origin ones.

    y' = height - y on both y coordinates, reordered so y1 < y2; x unchanged.
    Applying the map twice is the identity.
    """
    out = []
    for x1, y1, x2, y2 in boxes:
        ya, yb = sorted((height - y1, height - y2))
        out.append((x1, ya, x2, yb))
    return out


@dataclass(frozen=True)
class ServerConfig:
    mode: str = "stub"
    annotations_dir: Optional[str] = None
    host: str = "127.0.0.1"
    port: int = 8080
    transcript: Optional[str] = None

    def __post_init__(self):
        if self.mode not in ("stub", "model"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "stub" and not self.annotations_dir:
            raise ValueError("stub mode requires an annotations dir")


@dataclass
class ModelAdapters:
    """Plugin points for real models; every field is optional.

    detect(image_id, entity) -> (width, height, [(box, confidence), ...])
    vqa(image_id, question, structured) -> bool
    ocr(image_id) -> [text, ...]
    fluency(text) -> float
    generate(prompt) -> str
    """

    detect: Optional[Callable] = None
    vqa: Optional[Callable] = None
    ocr: Optional[Callable] = None
    fluency: Optional[Callable] = None
    generate: Optional[Callable] = None


class _BadRequest(Exception):
    pass


def _field(body, key, kind):
    value = body.get(key)
    if not isinstance(value, kind):
        raise _BadRequest(f"missing or invalid {key!r}")
    return value


class _Context:
    def __init__(self, config: ServerConfig, adapters: Optional[ModelAdapters],
                 scenes: Dict[str, Scene], transcript: Dict[str, str]):
        self.config = config
        self.adapters = adapters
        self.scenes = scenes
        self.transcript = transcript

    def scene(self, body) -> Scene:
        image_id = _field(body, "image_id", str)
        if image_id not in self.scenes:
            raise KeyError(image_id)
        return self.scenes[image_id]

    def adapter(self, role: str) -> Callable:
        fn = getattr(self.adapters, role, None) if self.adapters else None
        if fn is None:
            raise RuntimeError(f"no adapter registered for {role}")
        return fn


def _stub_detect(ctx, body):
    scene = ctx.scene(body)
    entity = _field(body, "entity", str)
    key = resolve_name(entity, scene)
    boxes = scene.objects.get(key, ()) if key else ()
    return {
        "image_width": scene.width,
        "image_height": scene.height,
        "detections": [{"bbox": list(b), "confidence": 1.0} for b in boxes],
    }


def _stub_vqa(ctx, body):
    scene = ctx.scene(body)
    structured = body.get("structured")
    if not isinstance(structured, dict):
        raise _BadRequest("stub vqa needs a structured hint")
    aspect = structured.get("aspect")
    if aspect == "relation":
        triple = (normalize(_field(structured, "subject", str)),
                  normalize(_field(structured, "relation", str)),
                  normalize(_field(structured, "object", str)))
        hit = triple in scene.relations
    elif aspect == "attribute":
        pair = (normalize(_field(structured, "attribute", str)),
                normalize(_field(structured, "object", str)))
        hit = pair in scene.attributes
    else:
        raise _BadRequest(f"stub vqa cannot answer aspect {aspect!r}")
    return {"answer": "yes" if hit else "no"}


def _stub_ocr(ctx, body):
    return {"texts": list(ctx.scene(body).scene_texts)}


def _stub_fluency(ctx, body):
    _field(body, "text", str)
    return {"score": 1.0}


def _stub_generate(ctx, body):
    key = prompt_hash(_field(body, "prompt", str))
    if key not in ctx.transcript:
        raise KeyError("unknown_prompt")
    return {"text": ctx.transcript[key]}


def _model_detect(ctx, body):
    fn = ctx.adapter("detect")
    width, height, raw = fn(_field(body, "image_id", str), _field(body, "entity", str))
    return {
        "image_width": int(width),
        "image_height": int(height),
        "detections": [{"bbox": [float(v) for v in box], "confidence": float(conf)}
                       for box, conf in raw],
    }


def _model_vqa(ctx, body):
    fn = ctx.adapter("vqa")
    answer = fn(_field(body, "image_id", str), _field(body, "question", str),
                body.get("structured"))
    return {"answer": "yes" if answer else "no"}


def _model_ocr(ctx, body):
    return {"texts": [str(t) for t in ctx.adapter("ocr")(_field(body, "image_id", str))]}


def _model_fluency(ctx, body):
    return {"score": float(ctx.adapter("fluency")(_field(body, "text", str)))}


def _model_generate(ctx, body):
    return {"text": str(ctx.adapter("generate")(_field(body, "prompt", str)))}


_STUB_ROUTES = {
    "/v1/detect": _stub_detect,
    "/v1/vqa": _stub_vqa,
    "/v1/ocr": _stub_ocr,
    "/v1/fluency": _stub_fluency,
    "/v1/generate": _stub_generate,
}

_MODEL_ROUTES = {
    "/v1/detect": _model_detect,
    "/v1/vqa": _model_vqa,
    "/v1/ocr": _model_ocr,
    "/v1/fluency": _model_fluency,
    "/v1/generate": _model_generate,
}


class _Handler(BaseHTTPRequestHandler):
    def log_message(self, fmt, *args):
        pass

    def _send(self, status: int, payload: dict):
        raw = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)

    def do_GET(self):
        if self.path == "/v1/health":
            self._send(200, {"status": "ok", "mode": self.server.ctx.config.mode})
        else:
            self._send(404, {"error": "not_found"})

    def do_POST(self):
        ctx = self.server.ctx
        routes = _STUB_ROUTES if ctx.config.mode == "stub" else _MODEL_ROUTES
        handler = routes.get(self.path)
        if handler is None:
            self._send(404, {"error": "not_found"})
            return
        try:
            length = int(self.headers.get("Content-Length", ""))
            body = json.loads(self.rfile.read(length).decode("utf-8"))
            if not isinstance(body, dict):
                raise _BadRequest("body must be a JSON object")
            self._send(200, handler(ctx, body))
        except (_BadRequest, ValueError) as exc:
            self._send(400, {"error": "bad_request", "detail": str(exc)})
        except KeyError as exc:
            kind = "unknown_prompt" if exc.args == ("unknown_prompt",) else "unknown_image"
            self._send(404, {"error": kind})
        except Exception as exc:  # adapter misbehavior must not kill the server
            self._send(500, {"error": "adapter_failure", "detail": str(exc)})


def create_server(config: ServerConfig,
                  adapters: Optional[ModelAdapters] = None) -> ThreadingHTTPServer:
    """Build a ready-to-serve HTTP server; port 0 picks a free port."""
    if config.mode == "stub":
        scenes = load_scenes(config.annotations_dir)
        transcript = {}
        if config.transcript:
            with open(config.transcript, "r", encoding="utf-8") as fh:
                transcript = json.load(fh)
    else:
        if adapters is None:
            raise ValueError("model mode requires adapters")
        scenes, transcript = {}, {}
    server = ThreadingHTTPServer((config.host, config.port), _Handler)
    server.daemon_threads = True
    server.ctx = _Context(config, adapters, scenes, transcript)
    return server


def serve(config: ServerConfig, adapters: Optional[ModelAdapters] = None):
    """Run until interrupted."""
    server = create_server(config, adapters)
    try:
        server.serve_forever()
    finally:
        server.server_close()
