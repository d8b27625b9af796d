import json
import shutil
from pathlib import Path

import pytest

import clozeprobe.cli as cli
from clozeprobe.errors import StageMismatch
from clozeprobe.metrics import read_records
from clozeprobe.pipeline import RunConfig, run_analyze, run_build_probe, run_eval

FIXTURES = Path(__file__).parent.parent / "fixtures"
DEMO = FIXTURES / "demo"


@pytest.fixture
def demo_config():
    return RunConfig.from_json(DEMO / "run_config.json")


def run_stage(*argv):
    return cli.main([str(a) for a in argv])


def test_config_loading_and_hash_stability(tmp_path, demo_config):
    assert demo_config.corpus_kind.value == "TREx"
    assert demo_config.config_hash
    # hash is location-independent: same document from another directory
    copy_dir = tmp_path / "elsewhere"
    shutil.copytree(DEMO, copy_dir)
    other = RunConfig.from_json(copy_dir / "run_config.json")
    assert other.config_hash == demo_config.config_hash


def test_config_missing_path_rejected(tmp_path):
    raw = json.loads((DEMO / "run_config.json").read_text())
    raw["corpus"]["path"] = "missing.jsonl"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(raw))
    with pytest.raises(Exception) as excinfo:
        RunConfig.from_json(bad)
    assert "missing" in str(excinfo.value)


def test_build_probe_stage(tmp_path, demo_config):
    manifest_path = run_build_probe(demo_config, tmp_path)
    manifest = json.loads(manifest_path.read_text())
    # 6 capital triples (|D|=2,|R|=2 -> 17) + 4 continent triples (|D|=2,|R|=1 -> 11)
    assert manifest["total_prompts"] == 6 * 17 + 4 * 11 == 146
    assert manifest["n_triples"] == 10
    assert manifest["n_dropped_by_vocab"] == 1  # Atlantis object missing from vocab_b
    assert manifest["provenance"]["config_hash"] == demo_config.config_hash
    assert manifest["per_type"]["simple"] == 10


def test_run_eval_produces_complete_record_groups(tmp_path, demo_config):
    records_path = run_eval(demo_config, tmp_path)
    header, records = read_records(records_path)
    assert header["config_hash"] == demo_config.config_hash
    # 1 simple + (2 syntaxes x 2 strategies x 3 prompts) per triple
    assert len(records) == 10 * 13
    per_triple = {}
    for record in records:
        per_triple[record.triple_key] = per_triple.get(record.triple_key, 0) + 1
    assert set(per_triple.values()) == {13}


def test_run_eval_resume_skips_scored_triples(tmp_path, demo_config, monkeypatch):
    scorers = []
    original = RunConfig.make_scorer

    def counting_scorer(self):
        scorer = original(self)
        scorers.append(scorer)
        return scorer

    monkeypatch.setattr(RunConfig, "make_scorer", counting_scorer)

    full_dir = tmp_path / "full"
    run_eval(demo_config, full_dir)
    full_calls = scorers[-1].calls

    resume_dir = tmp_path / "resumed"
    run_eval(demo_config, resume_dir, stop_after_triples=4)
    first_calls = scorers[-1].calls
    assert 0 < first_calls < full_calls

    run_eval(demo_config, resume_dir)
    second_calls = scorers[-1].calls
    assert first_calls + second_calls == full_calls  # nothing re-scored

    assert (resume_dir / "records.jsonl").read_bytes() == (full_dir / "records.jsonl").read_bytes()


def test_run_eval_discards_partial_trailing_line(tmp_path, demo_config):
    out = tmp_path / "out"
    run_eval(demo_config, out, stop_after_triples=4)
    records_path = out / "records.jsonl"
    with open(records_path, "a", encoding="utf-8") as fh:
        fh.write('{"triple_key": "TREx:P30:half')  # simulated crash mid-write
    run_eval(demo_config, out)
    header, records = read_records(records_path)
    assert len(records) == 130


def test_score_checkpoint_survives_lost_records(tmp_path, demo_config, monkeypatch):
    """A crash after scores were flushed but before the triple's records
    were written must not re-score anything on resume."""
    scorers = []
    original = RunConfig.make_scorer

    def counting_scorer(self):
        scorer = original(self)
        scorers.append(scorer)
        return scorer

    monkeypatch.setattr(RunConfig, "make_scorer", counting_scorer)

    out = tmp_path / "out"
    run_eval(demo_config, out, stop_after_triples=4)
    first_calls = scorers[-1].calls

    # drop the last evaluated triple's records; its scores stay checkpointed
    records_path = out / "records.jsonl"
    lines = records_path.read_text().splitlines()
    records_path.write_text("\n".join(lines[:-13]) + "\n")

    run_eval(demo_config, out)
    resume_calls = scorers[-1].calls

    full_dir = tmp_path / "full"
    run_eval(demo_config, full_dir)
    full_calls = scorers[-1].calls

    assert first_calls + resume_calls == full_calls  # dropped triple cost nothing
    assert (out / "records.jsonl").read_bytes() == (full_dir / "records.jsonl").read_bytes()
    assert (out / "scores.jsonl").exists()


def test_score_checkpoint_rejects_foreign_config(tmp_path, demo_config):
    out = tmp_path / "out"
    out.mkdir()
    (out / "scores.jsonl").write_text('{"kind": "provenance", "config_hash": "deadbeef"}\n')
    with pytest.raises(StageMismatch):
        run_eval(demo_config, out)


def test_run_eval_rejects_foreign_checkpoint(tmp_path, demo_config):
    out = tmp_path / "out"
    out.mkdir()
    (out / "records.jsonl").write_text('{"kind": "provenance", "config_hash": "deadbeef"}\n')
    with pytest.raises(StageMismatch):
        run_eval(demo_config, out)


def test_analyze_requires_records(tmp_path, demo_config):
    with pytest.raises(StageMismatch):
        run_analyze(demo_config, tmp_path)


def test_analyze_missing_prompt_type_is_coverage_mismatch(tmp_path, demo_config):
    from clozeprobe.errors import CoverageMismatch

    run_eval(demo_config, tmp_path)
    records_path = tmp_path / "records.jsonl"
    kept = [
        line
        for line in records_path.read_text().splitlines()
        if '"prompt_type": "complex"' not in line
    ]
    records_path.write_text("\n".join(kept) + "\n")
    with pytest.raises(CoverageMismatch) as excinfo:
        run_analyze(demo_config, tmp_path)
    assert "complex" in str(excinfo.value)


def test_analyze_artifacts(tmp_path, demo_config):
    run_eval(demo_config, tmp_path)
    artifacts = run_analyze(demo_config, tmp_path)

    stats = (tmp_path / "analysis" / "stats.csv").read_text().splitlines()
    assert stats[0].startswith("# config_hash=")
    assert any(line.startswith("TREx,Total,2,10") for line in stats)

    p_table = (tmp_path / "analysis" / "p_at_1.csv").read_text().splitlines()
    header_row = next(line for line in p_table if line.startswith("corpus,"))
    assert "simple" in header_row and "compound-complex" in header_row
    data_rows = [line for line in p_table if line.startswith("TREx,")]
    # groups 1:1, N:1, Total x strategies quality, confidence
    assert len(data_rows) == 6

    bounds = json.loads((tmp_path / "analysis" / "bounds.json").read_text())
    for syntax in ("clausal", "appositive"):
        for strategy in ("quality", "confidence"):
            cell = bounds["syntaxes"][syntax][strategy]
            assert cell["n_triples"] == 10
            assert 0.0 <= cell["lower_p_at_1"] <= 1.0
            assert len(cell["triples"]) == 10

    partition = json.loads((tmp_path / "analysis" / "partition.json").read_text())
    clausal_quality = partition["syntaxes"]["clausal"]["quality"]
    assert clausal_quality["set_names"] == ["simple", "compound", "complex", "compound-complex"]
    assert "percent_of_simple" in clausal_quality

    entropy = json.loads((tmp_path / "analysis" / "entropy.json").read_text())
    assert entropy["known_size"] > 0
    grid = entropy["grid"]["clausal"]["quality"]
    assert set(grid) == {"simple", "domain", "range", "combined"}
    assert artifacts["entropy"].name == "entropy.json"


def test_cli_end_to_end_and_plot(tmp_path):
    out = tmp_path / "out"
    config = DEMO / "run_config.json"
    assert run_stage("build-probe", "--config", config, "--out", out) == 0
    assert run_stage("run-eval", "--config", config, "--out", out) == 0
    assert run_stage("analyze", "--config", config, "--out", out) == 0
    assert run_stage("plot", "--out", out) == 0
    bounds_svg = (out / "plots" / "bounds.svg").read_text()
    assert bounds_svg.startswith("<?xml")
    assert (out / "plots" / "entropy.svg").exists()
    matrix = (out / "plots" / "partition_matrix.csv").read_text().splitlines()
    assert any(line.startswith("# config_hash=") for line in matrix)
    header_row = next(line for line in matrix if line.startswith("syntax,"))
    assert header_row.split(",")[:2] == ["syntax", "strategy"]


def test_cli_appositive_range_override_changes_grammar_and_hash(tmp_path, demo_config):
    out = tmp_path / "out"
    config = DEMO / "run_config.json"
    assert run_stage("build-probe", "--config", config, "--out", out, "--appositive-range", "post") == 0
    manifest = json.loads((out / "probe" / "manifest.json").read_text())
    assert manifest["provenance"]["config_hash"] != demo_config.config_hash
    shard = (out / "probe" / manifest["shards"][0]).read_text().splitlines()
    post_lines = [json.loads(s) for s in shard if json.loads(s)["prompt_type"] == "appositive-range"]
    assert post_lines and all(", a " in line["text"] or ", an " in line["text"] for line in post_lines)
    # downstream stages must carry the same override to match provenance
    assert run_stage("run-eval", "--config", config, "--out", out) == cli.EXIT_CONFIG
    assert run_stage("run-eval", "--config", config, "--out", out, "--appositive-range", "post") == 0


def test_cli_plot_before_analyze_is_stage_error(tmp_path):
    assert run_stage("plot", "--out", tmp_path) == cli.EXIT_CONFIG


def test_cli_analyze_before_eval_is_stage_error(tmp_path):
    config = DEMO / "run_config.json"
    assert run_stage("analyze", "--config", config, "--out", tmp_path) == cli.EXIT_CONFIG


def test_cli_fetch_constraints_from_fixture(tmp_path, capsys):
    cache = tmp_path / "cache.json"
    code = run_stage(
        "fetch-constraints",
        "--relations", DEMO / "relations.json",
        "--cache", cache,
        "--fixture", DEMO / "constraints.json",
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "resolved 2 relations" in out
    assert cache.exists()


def test_cli_fetch_constraints_warm_cache_survives_dead_endpoint(tmp_path):
    cache = tmp_path / "cache.json"
    assert run_stage(
        "fetch-constraints",
        "--relations", DEMO / "relations.json",
        "--cache", cache,
        "--fixture", DEMO / "constraints.json",
    ) == 0
    # endpoint is unreachable but the warm cache answers
    assert run_stage(
        "fetch-constraints",
        "--relations", DEMO / "relations.json",
        "--cache", cache,
        "--endpoint", "http://127.0.0.1:1/sparql",
    ) == 0


def test_cli_fetch_constraints_refresh_with_dead_endpoint_exits_2(tmp_path):
    cache = tmp_path / "cache.json"
    code = run_stage(
        "fetch-constraints",
        "--relations", DEMO / "relations.json",
        "--cache", cache,
        "--endpoint", "http://127.0.0.1:1/sparql",
        "--refresh",
    )
    assert code == cli.EXIT_CONFIG


def test_cli_fetch_constraints_no_fallback_exits_2(tmp_path, capsys):
    relations = tmp_path / "relations.json"
    relations.write_text(
        json.dumps([{"relation_id": "P999", "relation_text": "relates to"}]), encoding="utf-8"
    )
    code = run_stage(
        "fetch-constraints",
        "--relations", relations,
        "--cache", tmp_path / "cache.json",
        "--fixture", DEMO / "constraints.json",
    )
    assert code == cli.EXIT_CONFIG
    assert "P999" in capsys.readouterr().err


def test_cli_fetch_constraints_writes_specs(tmp_path):
    specs_out = tmp_path / "specs.json"
    assert run_stage(
        "fetch-constraints",
        "--relations", DEMO / "relations.json",
        "--cache", tmp_path / "cache.json",
        "--fixture", DEMO / "constraints.json",
        "--specs-out", specs_out,
    ) == 0
    from clozeprobe.templating import load_relation_specs

    specs = load_relation_specs(specs_out)
    assert specs["P1376"].domain_types == ("city", "municipality")
    assert specs["P30"].range_types == ("continent",)
