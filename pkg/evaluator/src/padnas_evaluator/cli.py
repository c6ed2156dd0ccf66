"""CLI: padnas-evaluator --mode {surrogate,tiny-train} --transport {stdio,tcp}"""
from __future__ import annotations

import argparse
import sys

from .server import EvalServer, VersionMismatch


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="padnas-evaluator")
    parser.add_argument("--mode", choices=("surrogate", "tiny-train"), default="surrogate")
    parser.add_argument("--transport", choices=("stdio", "tcp"), default="stdio")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=0, help="0 picks a free port (printed to stderr)")
    parser.add_argument("--seed", type=int, default=0, help="fallback seed until the handshake")
    parser.add_argument("--reorder", type=int, default=0, metavar="K",
                        help="buffer K evaluation replies and deliver them in reverse order "
                             "(client-conformance testing only; needs pipelined batches >= K)")
    args = parser.parse_args(argv)

    server = EvalServer(mode=args.mode, seed=args.seed, reorder_window=args.reorder)
    try:
        if args.transport == "stdio":
            server.serve_stdio()
        else:
            server.serve_tcp(args.host, args.port, ready_file=sys.stderr)
    except VersionMismatch:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
