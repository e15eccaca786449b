"""Command-line entry points: serve, conformance, make-test-model."""

from __future__ import annotations

import argparse
import sys

from .config import DEFAULT_MODEL, ServiceConfig


def cmd_serve(args) -> int:
    import uvicorn

    from .app import create_app
    from .encoder import EncoderLoadError, load_encoder

    cfg = ServiceConfig(
        model=args.model,
        host=args.host,
        port=args.port,
        batch_limit=args.batch_limit,
        device=args.device,
    )
    try:
        encoder = load_encoder(cfg.model, device=cfg.device)
    except EncoderLoadError as exc:
        print(f"startup error: {exc}", file=sys.stderr)
        return 1
    app = create_app(encoder, batch_limit=cfg.batch_limit)
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="info")
    return 0


def cmd_conformance(args) -> int:
    from .conformance import conformance_check

    result = conformance_check(args.endpoint, timeout=args.timeout)
    print(result.summary())
    return 0 if result.passed else 1


def cmd_make_test_model(args) -> int:
    from .encoder import build_test_model

    path = build_test_model(args.out, seed=args.seed)
    print(f"test model written to {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="embed-service")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the embedding service")
    p.add_argument("--model", default=DEFAULT_MODEL,
                   help="sentence-transformers model id or local model path")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8876)
    p.add_argument("--batch-limit", type=int, default=64)
    p.add_argument("--device", default="cpu")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("conformance", help="check an endpoint against the protocol")
    p.add_argument("--endpoint", required=True)
    p.add_argument("--timeout", type=float, default=30.0)
    p.set_defaults(func=cmd_conformance)

    p = sub.add_parser("make-test-model", help="build the offline miniature encoder")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_make_test_model)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
