"""Command-line pipeline: fetch-constraints, build-probe, run-eval, analyze,
plot.

Exit codes: 0 ok, 1 internal error, 2 configuration/data error. The scorer
endpoint can be overridden with the CLOZEPROBE_ENDPOINT environment
variable.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import constraints as cons
from .core import TypeConstraintSet
from .errors import ClozeProbeError, ConfigError, NetworkError, NoFallbackAvailable
from .pipeline import RunConfig, run_analyze, run_build_probe, run_eval, specs_from_constraints
from .plots import run_plot

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2

DEFAULT_WIKIDATA_ENDPOINT = "https://query.wikidata.org/sparql"


def cmd_fetch_constraints(args) -> int:
    relations = cons.load_relation_configs(args.relations)
    cache = cons.ConstraintCache(args.cache)

    providers = []
    if not args.refresh:
        # warm cache acts as the first source
        class CacheProvider:
            def lookup(self, relation):
                return cache.get(relation.property_id)

        providers.append(CacheProvider())
    if args.fixture:
        providers.append(cons.FixtureProvider(args.fixture))
    if args.endpoint:
        providers.append(cons.LiveWikidataProvider(args.endpoint))
    if args.concept_graph:
        providers.append(cons.ConceptGraphProvider(cons.load_concept_graph(args.concept_graph)))
    if not providers:
        print("no constraint sources configured (need --fixture, --endpoint, or --concept-graph)", file=sys.stderr)
        return EXIT_CONFIG

    manual_defaults = {
        r.relation_id: (r.manual_domain, r.manual_range)
        for r in relations
        if r.manual_domain and r.manual_range
    }

    def resolve_one(relation):
        return relation, cons.resolve_constraints(
            relation, providers, manual_defaults, strict_network=args.refresh
        )

    # fetches may run concurrently across relations; cache writes stay serialized
    resolved: dict[str, TypeConstraintSet] = {}
    failures: list[str] = []
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=args.max_in_flight) as pool:
        futures = [pool.submit(resolve_one, relation) for relation in relations]
        for future in futures:
            try:
                relation, cset = future.result()
            except NoFallbackAvailable as exc:
                failures.append(exc.relation_id)
                continue
            except NetworkError as exc:
                print(f"error: endpoint unreachable while --refresh was forced: {exc}", file=sys.stderr)
                return EXIT_CONFIG
            resolved[relation.relation_id] = cset
    for relation in relations:
        if relation.relation_id in resolved:
            cache.put(relation.property_id, resolved[relation.relation_id])

    if failures:
        print(f"error: no constraints and no manual fallback for: {', '.join(failures)}", file=sys.stderr)
        return EXIT_CONFIG

    if args.specs_out:
        from .templating import save_relation_specs

        specs = specs_from_constraints(relations, resolved)
        save_relation_specs(specs.values(), args.specs_out)
        print(f"wrote {len(specs)} relation specs to {args.specs_out}")

    n = len(resolved)
    mean_dom = sum(len(c.domain) for c in resolved.values()) / n
    mean_rng = sum(len(c.range) for c in resolved.values()) / n
    n_manual = sum(1 for c in resolved.values() if c.manual_fallback)
    print(f"resolved {n} relations into {args.cache}")
    print(f"{'relations':>10} {'Dom':>6} {'Rng':>6} {'manual':>7}")
    print(f"{n:>10} {mean_dom:>6.1f} {mean_rng:>6.1f} {n_manual:>7}")
    return EXIT_OK


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_json(args.config)
    endpoint_override = os.environ.get("CLOZEPROBE_ENDPOINT")
    if endpoint_override:
        cfg.endpoint = endpoint_override
        cfg.scorer_kind = "http"
    if getattr(args, "appositive_range", None):
        cfg.override_appositive_range(args.appositive_range)
    return cfg


def cmd_build_probe(args) -> int:
    cfg = _load_config(args)
    manifest_path = run_build_probe(cfg, args.out)
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    print(f"probe manifest: {manifest_path}")
    print(f"prompts: {manifest['total_prompts']} across {len(manifest['shards'])} shard(s)")
    return EXIT_OK


def cmd_run_eval(args) -> int:
    cfg = _load_config(args)
    records_path = run_eval(cfg, args.out, stop_after_triples=args.stop_after)
    print(f"evaluation records: {records_path}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = _load_config(args)
    artifacts = run_analyze(cfg, args.out)
    for name, path in artifacts.items():
        print(f"{name}: {path}")
    return EXIT_OK


def cmd_plot(args) -> int:
    artifacts = run_plot(args.out)
    for name, path in artifacts.items():
        print(f"{name}: {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clozeprobe",
        description="Controlled cloze-prompt probing of masked language models",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fetch-constraints", help="resolve and cache domain/range type constraints")
    p.add_argument("--relations", required=True, help="relations JSON file")
    p.add_argument("--cache", required=True, help="constraint cache JSON file (created if absent)")
    p.add_argument("--fixture", help="recorded constraint fixture (cache format)")
    p.add_argument("--endpoint", help=f"SPARQL endpoint, e.g. {DEFAULT_WIKIDATA_ENDPOINT}")
    p.add_argument("--concept-graph", help="TSV concept graph for seed-based derivation")
    p.add_argument("--refresh", action="store_true", help="ignore warm cache; endpoint failures become fatal")
    p.add_argument("--specs-out", help="also write the relation-spec JSON for the templater")
    p.add_argument("--max-in-flight", type=int, default=4, help="concurrent constraint fetches")
    p.set_defaults(func=cmd_fetch_constraints)

    for name, func, extra in [
        ("build-probe", cmd_build_probe, False),
        ("run-eval", cmd_run_eval, True),
        ("analyze", cmd_analyze, False),
    ]:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="run config JSON")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument(
            "--appositive-range",
            choices=("pre", "post"),
            help="override the range-appositive realization ('the r [MASK]' vs '[MASK], a r')",
        )
        if extra:
            p.add_argument(
                "--stop-after",
                type=int,
                default=None,
                help="stop after N freshly evaluated triples (testing/debug; resumable)",
            )
        p.set_defaults(func=func)

    p = sub.add_parser("plot", help="render SVG charts and the partition matrix export")
    p.add_argument("--out", required=True, help="output directory holding analysis/")
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, NoFallbackAvailable) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ClozeProbeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # pragma: no cover - unexpected internal failure
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
