"""Launch the sidecar: one model per process, protocol on one port."""

from __future__ import annotations

import argparse

import torch
import uvicorn

from .app import create_app
from .model import ModelRunner
from .sessions import StreamTable


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="choir-logit-server", description=__doc__)
    parser.add_argument("--model", default="tiny:0", help="model spec, e.g. tiny:<seed>")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8321)
    parser.add_argument("--max-streams", type=int, default=64)
    parser.add_argument("--idle-timeout", type=float, default=300.0, help="seconds before an idle stream may be evicted")
    parser.add_argument(
        "--deterministic",
        action="store_true",
        help="single-threaded deterministic inference kernels",
    )
    args = parser.parse_args(argv)

    if args.deterministic:
        torch.set_num_threads(1)
        torch.use_deterministic_algorithms(True)

    runner = ModelRunner.from_spec(args.model)
    table = StreamTable(max_streams=args.max_streams, idle_timeout_s=args.idle_timeout)
    app = create_app(runner, table)
    print(
        f"serving {runner.name} (vocab {runner.vocab_size}, eos {runner.eos_token_id}) "
        f"on {args.host}:{args.port}"
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
