#!/usr/bin/env python3
"""Materialize the synthetic TREx-shaped fixture.

Writes relations.json and constraints.json (committed under fixtures/trex/);
with --full also generates the ~30k-line triples.jsonl and the three model
vocabulary files, which are cheap to regenerate and therefore not committed.
"""

import argparse
from pathlib import Path

from clozeprobe.synthdata import trex_relations, write_trex_fixture


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--out",
        default=str(Path(__file__).resolve().parent.parent / "fixtures" / "trex"),
        help="target directory (default: fixtures/trex)",
    )
    parser.add_argument("--full", action="store_true", help="also write triples.jsonl and vocab files")
    args = parser.parse_args()

    write_trex_fixture(args.out, with_corpus=args.full)
    relations = trex_relations()
    print(f"wrote fixture for {len(relations)} relations to {args.out}")
    print(f"total facts when filtered: {sum(r.n_facts for r in relations)}")
    n = len(relations)
    print(f"mean Dom {sum(r.n_domain for r in relations) / n:.2f}, mean Rng {sum(r.n_range for r in relations) / n:.2f}")


if __name__ == "__main__":
    main()
