#!/usr/bin/env python3
"""Run every pipeline stage on the bundled 10-triple demo fixture with the
deterministic mock scorer. Takes a few seconds and writes all artifacts
(probe shards, evaluation records, analysis tables, SVG plots) under the
chosen output directory."""

import argparse
import sys
from pathlib import Path

from clozeprobe import cli

ROOT = Path(__file__).resolve().parent.parent
DEMO = ROOT / "fixtures" / "demo"


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="demo-out", help="output directory")
    args = parser.parse_args()

    config = str(DEMO / "run_config.json")
    stages = [
        ["fetch-constraints", "--relations", str(DEMO / "relations.json"),
         "--cache", f"{args.out}/cache.json", "--fixture", str(DEMO / "constraints.json")],
        ["build-probe", "--config", config, "--out", args.out],
        ["run-eval", "--config", config, "--out", args.out],
        ["analyze", "--config", config, "--out", args.out],
        ["plot", "--out", args.out],
    ]
    for argv in stages:
        print(f"\n$ clozeprobe {' '.join(argv)}")
        code = cli.main(argv)
        if code != 0:
            return code
    print(f"\nall artifacts under {args.out}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
