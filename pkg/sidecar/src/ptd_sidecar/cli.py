"""Command-line entry point: ``ptd-sidecar serve``."""

import argparse

import uvicorn

from .app import build_app
from .config import BackendConfig


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(prog="ptd-sidecar")
    sub = parser.add_subparsers(dest="command", required=True)
    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8400)
    serve.add_argument("--config", help="JSON config file", default=None)
    serve.add_argument("--mode", choices=["mock", "real"], default=None)
    serve.add_argument("--flag-schedule", default=None,
                       help="mock flag schedule: none | odd_seeds "
                            "| words:<w1,w2>")
    args = parser.parse_args(argv)

    config = (BackendConfig.from_file(args.config) if args.config
              else BackendConfig())
    if args.mode:
        config.mode = args.mode
    if args.flag_schedule:
        config.flag_schedule = args.flag_schedule
    uvicorn.run(build_app(config), host=args.host, port=args.port)


if __name__ == "__main__":
    main()
