"""Model-dependent acceptance checks against real BERT-base.

These need (a) locally cached bert-base-cased weights and (b) a real TREx
triples export pointed at by LAMA_TREX_TRIPLES (field names sub_label /
obj_label / predicate_id). Optional LAMA_RELATIONS / LAMA_CONSTRAINTS
override the bundled relation verbalizations and constraint fixture.
Without those prerequisites the tests skip with the reason; on CPU the
sampled run takes a few minutes.

Checks, on a seeded 1000-triple sample of the vocabulary-filtered corpus:
  * simple-prompt P@1 within .2786 +/- .05;
  * quality-completed compound and complex P@1 both above simple, and
    complex above appositive-range;
  * mean known-subset entropy of quality-completed clausal prompts strictly
    below the simple prompt's.
"""

import json
import os
import random
import socket
import threading
import time
from pathlib import Path

import pytest

pytest.importorskip("clozeprobe", reason="primary toolkit not installed")

from clozeprobe.core import Corpus
from clozeprobe.constraints import load_relation_configs
from clozeprobe.corpus import filter_by_vocab, load_triples
from clozeprobe.pipeline import RunConfig, run_analyze, run_eval
from clozeprobe.scoring import ScoringClient

from maskserve import MaskedLMBackend, create_app

ROOT = Path(__file__).resolve().parent.parent.parent
MODEL_NAME = "bert-base-cased"
SAMPLE_SIZE = 1000
SEED = 1234
REFERENCE_SIMPLE_P1 = 0.2786
SAMPLE_TOLERANCE = 0.05


def _load_bert_or_skip():
    try:
        return MaskedLMBackend(MODEL_NAME, local_files_only=True)
    except Exception as exc:
        pytest.skip(f"{MODEL_NAME} weights not available locally: {exc}")


def _corpus_path_or_skip() -> Path:
    path = os.environ.get("LAMA_TREX_TRIPLES")
    if not path:
        pytest.skip("LAMA_TREX_TRIPLES not set; real TREx export required for model acceptance")
    return Path(path)


@pytest.fixture(scope="module")
def bert_run(tmp_path_factory):
    corpus_path = _corpus_path_or_skip()
    backend = _load_bert_or_skip()

    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    import uvicorn

    server = uvicorn.Server(uvicorn.Config(create_app(backend), host="127.0.0.1", port=port, log_level="warning"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 30
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("service did not start")
        time.sleep(0.1)
    endpoint = f"http://127.0.0.1:{port}"

    out = tmp_path_factory.mktemp("bert-acceptance")
    relations_path = os.environ.get("LAMA_RELATIONS", str(ROOT / "fixtures" / "trex" / "relations.json"))
    constraints_path = os.environ.get("LAMA_CONSTRAINTS", str(ROOT / "fixtures" / "trex" / "constraints.json"))

    relations = load_relation_configs(relations_path)
    grouping_map = {r.relation_id: r.grouping for r in relations if r.grouping}
    loaded = load_triples(corpus_path, Corpus.TREX, grouping_by_relation=grouping_map)

    vocab = ScoringClient(endpoint, model=MODEL_NAME).fetch_vocab()
    kept, _ = filter_by_vocab(loaded.triples, [set(vocab)])
    if len(kept) < SAMPLE_SIZE:
        pytest.skip(f"only {len(kept)} filtered triples; need {SAMPLE_SIZE}")
    sample = random.Random(SEED).sample(kept, SAMPLE_SIZE)

    sample_path = out / "sample.jsonl"
    with open(sample_path, "w", encoding="utf-8") as fh:
        for triple in sample:
            fh.write(json.dumps({
                "sub_label": triple.subject,
                "obj_label": triple.object,
                "predicate_id": triple.relation_id,
            }) + "\n")
    vocab_path = out / "vocab.txt"
    vocab_path.write_text("\n".join(vocab) + "\n", encoding="utf-8")

    config_path = out / "run_config.json"
    config_path.write_text(json.dumps({
        "corpus": {"path": "sample.jsonl", "kind": "TREx"},
        "relations_path": str(Path(relations_path).resolve()),
        "constraints_path": str(Path(constraints_path).resolve()),
        "vocab_paths": ["vocab.txt"],
        "scorer": {"kind": "http", "endpoint": endpoint, "model": MODEL_NAME,
                   "top_k": 10, "max_batch": 64, "max_in_flight": 2},
        "strategies": ["quality", "confidence"],
        "syntaxes": ["clausal", "appositive"],
        "seed": SEED,
    }) + "\n", encoding="utf-8")

    cfg = RunConfig.from_json(config_path)
    run_eval(cfg, out)
    run_analyze(cfg, out)

    yield out
    server.should_exit = True
    thread.join(timeout=10)


def _quality_total_row(out: Path) -> dict:
    lines = (out / "analysis" / "p_at_1.csv").read_text().splitlines()
    header = next(line for line in lines if line.startswith("corpus,")).split(",")
    row = next(line for line in lines if line.startswith("TREx,Total,quality,")).split(",")
    return dict(zip(header, row))


def test_simple_p_at_1_sanity(bert_run):
    row = _quality_total_row(bert_run)
    simple = float(row["simple"])
    print(f"[{'PASS' if abs(simple - REFERENCE_SIMPLE_P1) <= SAMPLE_TOLERANCE else 'FAIL'}] "
          f"BERT simple P@1 {simple:.4f} within {REFERENCE_SIMPLE_P1} +/- {SAMPLE_TOLERANCE}")
    assert abs(simple - REFERENCE_SIMPLE_P1) <= SAMPLE_TOLERANCE


def test_directional_claims(bert_run):
    row = _quality_total_row(bert_run)
    simple = float(row["simple"])
    compound = float(row["compound"])
    complex_ = float(row["complex"])
    appositive_range = float(row["appositive-range"])
    print(f"compound {compound:.4f} / complex {complex_:.4f} vs simple {simple:.4f}; "
          f"appositive-range {appositive_range:.4f}")
    assert compound > simple
    assert complex_ > simple
    assert complex_ > appositive_range


def test_entropy_direction(bert_run):
    payload = json.loads((bert_run / "analysis" / "entropy.json").read_text())
    grid = payload["grid"]["clausal"]["quality"]
    print(f"known n={payload['known_size']}; clausal quality entropy: "
          f"simple {grid['simple']:.3f}, domain {grid['domain']:.3f}, "
          f"range {grid['range']:.3f}, combined {grid['combined']:.3f}")
    assert grid["domain"] < grid["simple"]
    assert grid["range"] < grid["simple"]
