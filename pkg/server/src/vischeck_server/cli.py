"""Command line entry: vischeck-server --annotations DIR [options]."""

import argparse
import sys

from .server import ServerConfig, create_server


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="vischeck-server",
        description="Deterministic stub expert server backed by scene annotations.")
    parser.add_argument("--annotations", required=True, help="scene annotation dir")
    parser.add_argument("--transcript", help="prompt-hash transcript JSON for /v1/generate")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8080)
    args = parser.parse_args(argv)

    # model mode needs adapter callables, so it is reachable only through
    # create_server()/serve() from code
    try:
        config = ServerConfig(mode="stub", annotations_dir=args.annotations,
                              host=args.host, port=args.port,
                              transcript=args.transcript)
        server = create_server(config)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    host, port = server.server_address[:2]
    print(f"serving on http://{host}:{port} (stub)", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def entrypoint():
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
