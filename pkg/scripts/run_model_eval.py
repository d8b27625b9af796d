#!/usr/bin/env python3
"""Sampled evaluation against a live scoring service.

Draws a seeded random sample of vocabulary-filtered triples, evaluates the
full prompt battery (simple, completed single-information, combined; both
completion strategies, both syntax families) through the HTTP scorer, and
prints the headline numbers plus the directional comparisons:

  * simple-prompt P@1 (reference band for BERT-base on TREx: .2786 +/- .05
    on a 1000-triple sample),
  * quality-completed compound and complex P@1 vs. simple,
  * complex vs. appositive-range P@1 (clausal-over-appositive),
  * mean known-subset entropy of quality-completed clausal prompts vs. simple.

The object vocabulary is exported from the service itself (GET /v1/vocab)
so filtering matches the model's single-token convention.
"""

import argparse
import json
import random
import sys
from pathlib import Path

from clozeprobe.constraints import load_relation_configs
from clozeprobe.core import Corpus
from clozeprobe.corpus import filter_by_vocab, load_triples
from clozeprobe.pipeline import RunConfig, run_analyze, run_eval
from clozeprobe.scoring import ScoringClient

ROOT = Path(__file__).resolve().parent.parent


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--endpoint", required=True, help="scoring service base URL")
    parser.add_argument("--model", default="bert-base-uncased")
    parser.add_argument("--corpus", required=True, help="triples JSONL (TREx field names)")
    parser.add_argument("--relations", default=str(ROOT / "fixtures" / "trex" / "relations.json"))
    parser.add_argument("--constraints", default=str(ROOT / "fixtures" / "trex" / "constraints.json"))
    parser.add_argument("--sample", type=int, default=1000, help="triples to sample (0 = all)")
    parser.add_argument("--seed", type=int, default=1234)
    parser.add_argument("--out", default="model-eval-out")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    relations = load_relation_configs(args.relations)
    grouping_map = {r.relation_id: r.grouping for r in relations if r.grouping}
    loaded = load_triples(args.corpus, Corpus.TREX, grouping_by_relation=grouping_map)
    print(f"loaded {len(loaded)} triples ({len(loaded.errors)} malformed lines)")

    print("exporting model vocabulary from the service ...")
    vocab = ScoringClient(args.endpoint, model=args.model).fetch_vocab()
    vocab_path = out / "service_vocab.txt"
    vocab_path.write_text("\n".join(vocab) + "\n", encoding="utf-8")
    kept, dropped = filter_by_vocab(loaded.triples, [set(vocab)])
    print(f"vocabulary filter kept {len(kept)} / dropped {len(dropped)}")

    if args.sample and len(kept) > args.sample:
        rng = random.Random(args.seed)
        kept = rng.sample(kept, args.sample)
        print(f"sampled {len(kept)} triples (seed {args.seed})")

    sample_path = out / "sample.jsonl"
    with open(sample_path, "w", encoding="utf-8") as fh:
        for triple in kept:
            fh.write(json.dumps({
                "sub_label": triple.subject,
                "obj_label": triple.object,
                "predicate_id": triple.relation_id,
            }) + "\n")

    config_path = out / "run_config.json"
    config_path.write_text(json.dumps({
        "corpus": {"path": "sample.jsonl", "kind": "TREx"},
        "relations_path": str(Path(args.relations).resolve()),
        "constraints_path": str(Path(args.constraints).resolve()),
        "vocab_paths": ["service_vocab.txt"],
        "scorer": {"kind": "http", "endpoint": args.endpoint, "model": args.model,
                   "top_k": 10, "max_batch": 64, "max_in_flight": 4},
        "strategies": ["quality", "confidence"],
        "syntaxes": ["clausal", "appositive"],
        "seed": args.seed,
    }, indent=2) + "\n", encoding="utf-8")

    cfg = RunConfig.from_json(config_path)
    run_eval(cfg, out)
    run_analyze(cfg, out)

    table = (out / "analysis" / "p_at_1.csv").read_text().splitlines()
    header = next(line for line in table if line.startswith("corpus,")).split(",")
    quality_total = next(
        line for line in table if line.startswith("TREx,Total,quality,")
    ).split(",")
    row = dict(zip(header, quality_total))
    simple = float(row["simple"])
    compound = float(row["compound"])
    complex_ = float(row["complex"])
    appo_range = float(row["appositive-range"])

    print("\n--- P@1 (quality completion, Total) ---")
    print(f"simple            {simple:.4f}   (BERT-base/TREx reference .2786 +/- .05 on a 1k sample)")
    print(f"compound          {compound:.4f}   {'>' if compound > simple else '<='} simple")
    print(f"complex           {complex_:.4f}   {'>' if complex_ > simple else '<='} simple")
    print(f"appositive-range  {appo_range:.4f}   complex {'>' if complex_ > appo_range else '<='} appositive-range")

    entropy = json.loads((out / "analysis" / "entropy.json").read_text())
    grid = entropy.get("grid", {})
    if grid:
        clausal_quality = grid["clausal"]["quality"]
        print(f"\n--- mean entropy on known subset (n={entropy['known_size']}) ---")
        for level in ("simple", "domain", "range", "combined"):
            print(f"{level:<9} {clausal_quality[level]:.3f} bits")
        direction = all(clausal_quality[l] < clausal_quality["simple"] for l in ("domain", "range"))
        print(f"clausal quality-completed entropy below simple: {direction}")
    else:
        print("\nknown subset empty; entropy grid not available")
    print(f"\nartifacts under {out}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
