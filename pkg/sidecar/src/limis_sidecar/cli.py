"""`limis-sidecar` entry point."""

from __future__ import annotations

import argparse


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="limis-sidecar",
                                     description="wire-protocol inference server")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=9000)
    parser.add_argument("--stub", action=argparse.BooleanOptionalAction, default=True,
                        help="serve the classical stand-in (default); --no-stub "
                             "starts unloaded and answers 503 until models are wired in")
    args = parser.parse_args(argv)

    import uvicorn

    from .app import create_app

    uvicorn.run(create_app(stub=args.stub), host=args.host, port=args.port,
                log_level="info")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
