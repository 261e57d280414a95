"""vlm-adapter command line: serve the models, or self-test a server."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import load_config
from .selftest import contract_selftest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vlm-adapter")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the model server")
    serve.add_argument("--config", default=None, help="JSON config file")
    serve.add_argument("--similarity", default=None,
                       help="similarity model: builtin | clip:<checkpoint> | none")
    serve.add_argument("--chat", default=None,
                       help="chat model: builtin | blip:<checkpoint> | none")
    serve.add_argument("--detector", default=None,
                       help="detector model: builtin | owlvit:<checkpoint> | none")
    serve.add_argument("--host", default=None, help="bind address (default: 127.0.0.1)")
    serve.add_argument("--port", type=int, default=None, help="port (default: 8100)")
    serve.add_argument("--device", default=None, help="torch device (default: cpu)")

    selftest = sub.add_parser("selftest", help="validate a server against the contract")
    selftest.add_argument("--url", required=True, help="server base URL")
    selftest.add_argument("--timeout", type=float, default=30.0,
                          help="per-request timeout in seconds (default: 30)")

    return parser


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    try:
        config = load_config(
            args.config,
            similarity=args.similarity,
            chat=args.chat,
            detector=args.detector,
            host=args.host,
            port=args.port,
            device=args.device,
        )
        app = create_app(config)
    except Exception as exc:  # model load / config failure: exit nonzero
        print(f"vlm-adapter serve: error: {exc}", file=sys.stderr)
        return 1
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    return 0


def cmd_selftest(args) -> int:
    result = contract_selftest(args.url, timeout=args.timeout)
    print(result.summary())
    return 0 if result.passed else 1


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        return cmd_serve(args)
    return cmd_selftest(args)


if __name__ == "__main__":
    sys.exit(main())
