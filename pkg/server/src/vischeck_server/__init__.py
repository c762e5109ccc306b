"""HTTP expert server.

Serves the five expert endpoints (/v1/detect, /v1/vqa, /v1/ocr, /v1/fluency,
/v1/generate) plus /v1/health. Stub mode answers deterministically from scene
annotation files; model mode dispatches to user-supplied adapter callables.
"""

from .scenes import Scene, load_scene_file, load_scenes, normalize, prompt_hash, resolve_name
from .server import ModelAdapters, ServerConfig, convert_coords, create_server, serve

__all__ = [
    "ModelAdapters",
    "Scene",
    "ServerConfig",
    "convert_coords",
    "create_server",
    "load_scene_file",
    "load_scenes",
    "normalize",
    "prompt_hash",
    "resolve_name",
    "serve",
]
