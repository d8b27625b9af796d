"""Service launcher: one model per process, selected against an allowlist."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import uvicorn

from .app import DEFAULT_MAX_BATCH, create_app
from .model import MaskedLMBackend

# name -> HuggingFace id (or local path via --config)
DEFAULT_ALLOWLIST = {
    "bert-base-cased": "bert-base-cased",
    "roberta-base": "roberta-base",
    "luke-base": "studio-ousia/luke-base",
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="maskserve", description=__doc__)
    parser.add_argument("--model", required=True, help="model name from the allowlist")
    parser.add_argument("--config", help="JSON file with {'models': {name: id_or_path}, 'max_batch'?, 'rank_horizon'?}")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8100)
    parser.add_argument("--local-files-only", action="store_true", help="never download weights")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")

    allowlist = dict(DEFAULT_ALLOWLIST)
    max_batch = DEFAULT_MAX_BATCH
    rank_horizon = 100
    if args.config:
        config = json.loads(Path(args.config).read_text(encoding="utf-8"))
        allowlist.update(config.get("models", {}))
        max_batch = int(config.get("max_batch", max_batch))
        rank_horizon = int(config.get("rank_horizon", rank_horizon))

    if args.model not in allowlist:
        print(f"error: model {args.model!r} not in allowlist {sorted(allowlist)}", file=sys.stderr)
        return 2

    backend = MaskedLMBackend(
        args.model,
        model_path=allowlist[args.model],
        rank_horizon=rank_horizon,
        local_files_only=args.local_files_only,
    )
    app = create_app(backend, max_batch=max_batch)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


if __name__ == "__main__":
    sys.exit(main())
