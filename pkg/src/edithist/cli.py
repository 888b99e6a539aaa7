"""``edithist`` command line: ingest, analyze, classrank, split, export, train,
evaluate and compare.

Every successful command writes ``manifest.json`` into its output directory.
Options may also come from a TOML file given with ``--config``; top-level keys
apply to every subcommand and a ``[<subcommand>]`` table to that one only.
Keys are option names with dashes or underscores (``max-reject-retries = 50``).
Explicit flags win over the file, which wins over built-in defaults.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import __version__

log = logging.getLogger("edithist")


class StageError(Exception):
    """A pipeline stage failed; reported on stderr with exit code 1."""


# --- manifest ---------------------------------------------------------------

def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def tree_digests(path) -> dict:
    p = Path(path)
    if p.is_file():
        return {str(p): file_digest(p)}
    out = {}
    if p.is_dir():
        for f in sorted(p.rglob("*")):
            if f.is_file() and f.name != "manifest.json":
                out[str(f)] = file_digest(f)
    return out


def write_manifest(out_dir, argv, seed, inputs, started) -> Path:
    out = Path(out_dir)
    digests = {}
    for i in inputs:
        digests.update(tree_digests(i))
    outputs = sorted(str(f) for f in out.rglob("*") if f.is_file() and f.name != "manifest.json")
    manifest = {
        "tool_version": __version__,
        "command_line": list(argv),
        "seed": seed,
        "input_digests": digests,
        "output_paths": outputs,
        "timings": {"wall_seconds": round(time.time() - started, 3)},
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


# --- stage helpers --------------------------------------------------------

def _read_revisions(store_dir):
    from .ingest import Store, StoreError

    try:
        return list(Store(store_dir).all_revisions())
    except StoreError as exc:
        raise StageError(str(exc)) from None


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _entity_labels(store_dir) -> dict:
    from .ingest import Store
    from .model import parse_entity_id

    store = Store(store_dir)
    out = {}
    for eid in store.entity_ids():
        label = store.final_document(eid).get("labels", {}).get("en")
        if label:
            out[parse_entity_id(str(eid))] = label["value"]
    return out


# --- subcommands ----------------------------------------------------------

def cmd_ingest(args):
    from .ingest import IngestError, StoreError, build_store, ingest_jsonl, ingest_xml_dump

    if not Path(args.input).exists():
        raise StageError(f"input not found: {args.input}")
    try:
        records = ingest_xml_dump(args.input) if args.format == "xml" else ingest_jsonl(args.input)
        stats = build_store(records, args.out_dir)
    except (IngestError, StoreError) as exc:
        raise StageError(str(exc)) from None
    print(f"ingested {stats.revisions} revisions of {stats.entities} entities "
          f"({stats.operations} triple operations)")
    return [args.input]


def cmd_analyze(args):
    from . import analytics as A
    from .graph import class_membership, extract_triple_ops, materialize
    from .ingest import Store

    revisions = _read_revisions(args.store)
    out = Path(args.out_dir)
    fmt = args.format
    if args.report == "transitions":
        graph = A.transition_graph(Store(args.store), args.prune)
        if fmt == "dot":
            _write(out / "transitions.dot", graph.to_dot())
        else:
            _write(out / "transitions.csv", graph.to_csv())
        return [args.store]
    if fmt == "dot":
        raise StageError(f"report {args.report} has no dot rendering; use --format csv")
    ops = extract_triple_ops(revisions)
    membership = class_membership(materialize(ops).triples)
    labels = _entity_labels(args.store)
    if args.report == "class-ops":
        rows = [(s.class_id, labels.get(s.class_id, ""), s.instances, s.additions, s.removals,
                 s.replacements) for s in A.class_operation_stats(ops, membership)]
        _write(out / "class_ops.csv", A.rows_to_csv(
            ["class", "label", "instances", "additions", "removals", "replacements"], rows))
    elif args.report == "removed-props":
        rows = []
        classes = sorted({c for cs in membership.values() for c in cs})
        for cls in classes:
            for pid, rate in A.most_removed_properties(ops, membership, cls)[: args.top]:
                rows.append((cls, pid, A.property_label(pid, labels), rate))
        _write(out / "removed_props.csv", A.rows_to_csv(
            ["class", "property", "label", "removals_per_instance"], rows))
    else:
        wars = A.detect_edit_wars(ops)
        rows = [(w.entity, w.property, w.value, w.add_ordinal, w.remove_ordinal, w.readd_ordinal)
                for w in wars]
        _write(out / "edit_wars.csv", A.rows_to_csv(
            ["entity", "property", "value", "add_ordinal", "remove_ordinal", "readd_ordinal"], rows))
        by_prop, by_class = A.conflict_rankings(wars, membership)
        _write(out / "conflicts_by_property.csv", A.rows_to_csv(
            ["property", "label", "wars"], [(p, A.property_label(p, labels), n) for p, n in by_prop]))
        _write(out / "conflicts_by_class.csv", A.rows_to_csv(
            ["class", "label", "wars_per_instance"], [(c, labels.get(c, ""), v) for c, v in by_class]))
    return [args.store]


def cmd_classrank(args):
    from .analytics import rows_to_csv
    from .graph import (class_rank, entity_edges, extract_triple_ops, materialize, pagerank,
                        read_pagerank_file, top_classes)
    from .model import INSTANCE_OF, EntityId

    revisions = _read_revisions(args.store)
    state = materialize(extract_triple_ops(revisions))
    inputs = [args.store]
    if args.pagerank_file:
        if not Path(args.pagerank_file).exists():
            raise StageError(f"pagerank file not found: {args.pagerank_file}")
        scores = read_pagerank_file(args.pagerank_file)
        inputs.append(args.pagerank_file)
    else:
        scores = pagerank(entity_edges(state.triples), args.damping, args.iterations)
    instance_of = [(t.subject, t.object) for t in state.triples
                   if t.predicate == INSTANCE_OF and isinstance(t.object, EntityId)]
    ranking = class_rank(instance_of, scores, args.aggregate)
    labels = _entity_labels(args.store)
    top = top_classes(ranking, labels, args.top, args.filter_label or None)
    _write(Path(args.out_dir) / "classrank.csv", rows_to_csv(
        ["rank", "class", "label", "score", "instances"],
        [(i, c.class_id, labels.get(c.class_id, ""), c.score, c.instance_count)
         for i, c in enumerate(top, 1)]))
    return inputs


def cmd_split(args):
    from .graph import SplitSpec, chronological_split, extract_triple_ops
    from .pipeline import write_split_dir

    revisions = sorted(_read_revisions(args.store), key=lambda r: r.order_key)
    spec = SplitSpec(args.train, args.valid)
    split = chronological_split(revisions, extract_triple_ops(revisions), spec)
    summary = write_split_dir(split, spec, args.out_dir)
    print("operations " + " ".join(f"{k}={v}" for k, v in summary["operations"].items()))
    return [args.store]


def cmd_export(args):
    from .graph import export_dynamic, export_static, extract_triple_ops, materialize

    revisions = sorted(_read_revisions(args.store), key=lambda r: r.order_key)
    ops = extract_triple_ops(revisions)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    both = not args.static and not args.dynamic
    if args.static or both:
        n = export_static(materialize(ops, args.horizon), out / "static.nt")
        print(f"static: {n} triples")
    if args.dynamic or both:
        kept = [op for op in ops if args.horizon is None or op.ordinal <= args.horizon]
        n = export_dynamic(kept, revisions, out / "dynamic.nt")
        print(f"dynamic: {n} lines")
    return [args.store]


def _load_split(path):
    from .pipeline import read_split_dir

    try:
        return read_split_dir(path)
    except FileNotFoundError as exc:
        raise StageError(str(exc)) from None


def cmd_train(args):
    from .kge.io import save_model
    from .kge.training import PRESETS, TrainConfig, TrainingError, with_overrides
    from .kge.sampling import SamplerError, Side
    from .pipeline import prepare_split, train_kge, train_supervised
    from .typer import ForestConfig, WalkEmbeddingConfig, save_supervised

    prep = prepare_split(_load_split(args.split_dir), include_valid=not args.train_only)
    if not prep.train_triples:
        raise StageError("the training graph is empty")
    out = Path(args.out_dir)
    if args.supervised:
        wcfg = WalkEmbeddingConfig(vector_size=args.dim or 50, epochs=args.epochs or 50,
                                   max_depth=args.depth, walks_per_entity=args.walks,
                                   window=args.window, seed=args.seed)
        fcfg = ForestConfig(num_trees=args.trees, min_samples_split=args.min_samples_split,
                            seed=args.seed)
        try:
            forest, emb = train_supervised(prep, wcfg, fcfg, dedup=args.dedup)
        except ValueError as exc:
            raise StageError(str(exc)) from None
        save_supervised(forest, emb, out, {"kind": "supervised", "walks": vars_of(wcfg),
                                           "forest": vars_of(fcfg), "dedup": args.dedup})
        print(f"forest of {len(forest.trees)} trees, oob accuracy {forest.oob_accuracy}")
        return [args.split_dir]
    base = PRESETS[args.model] if args.preset else TrainConfig()
    cfg = with_overrides(base, dim=args.dim, epochs=args.epochs, batch_size=args.batch,
                         learning_rate=args.lr, num_negatives=args.negatives, margin=args.margin,
                         seed=args.seed)
    try:
        result = train_kge(prep, args.model, cfg, args.sampler, Side(args.corrupt_side),
                           args.max_reject_retries)
    except (TrainingError, SamplerError) as exc:
        raise StageError(str(exc)) from None
    save_model(result.model, out / "model.bin",
               {"train": cfg.to_json(), "sampler": args.sampler, "corrupt_side": args.corrupt_side})
    _write(out / "losses.csv", "epoch,loss\n" + "".join(
        f"{i},{loss:.10g}\n" for i, loss in enumerate(result.losses)))
    print(f"trained {args.model} ({args.sampler}); final loss {result.losses[-1]:.6f}")
    return [args.split_dir]


def vars_of(cfg) -> dict:
    from dataclasses import asdict
    return asdict(cfg)


def _load_scorer(model_path):
    from .kge.io import load_model
    from .pipeline import kge_scorer, supervised_scorer
    from .typer import load_supervised

    p = Path(model_path)
    if p.is_dir() and (p / "forest.json").exists():
        forest, emb = load_supervised(p)
        return supervised_scorer(forest, emb), p
    bin_path = p / "model.bin" if p.is_dir() else p.with_suffix(".bin")
    if not bin_path.exists():
        raise StageError(f"model not found: {model_path}")
    model, _ = load_model(bin_path)
    return kge_scorer(model), bin_path


def cmd_evaluate(args):
    from .evaluation import report_text, reports_csv
    from .pipeline import evaluate_scorer, prepare_split

    scorer, model_file = _load_scorer(args.model)
    prep = prepare_split(_load_split(args.split_dir))
    if not prep.sample:
        raise StageError("the test split holds no new-class P31 additions")
    results, report = evaluate_scorer(prep, scorer)
    if report is None:
        raise StageError("no test case could be ranked by the model")
    out = Path(args.out_dir)
    name = args.name or Path(args.model).name
    rows = "".join(f"{r.entity},{r.true_class},{r.rank},{int(r.rank == 1)}\n" for r in results)
    _write(out / "ranks.csv", "entity,true_class,rank,hit1\n" + rows)
    _write(out / "report.csv", reports_csv({name: report}))
    _write(out / "report.txt", report_text(name, report))
    _write(out / "report.json", json.dumps({"name": name, **report.row(), "skipped":
                                            len(prep.sample) - len(results)}, indent=2,
                                           sort_keys=True, default=str) + "\n")
    sys.stdout.write(report_text(name, report))
    return [model_file, args.split_dir]


def _read_eval_dir(path):
    from .evaluation import RankingReport

    d = Path(path)
    if not (d / "report.json").exists():
        raise StageError(f"evaluation results not found: {d}")
    meta = json.loads((d / "report.json").read_text(encoding="utf-8"))
    cases = {}
    with open(d / "ranks.csv", encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            e, c, rank, hit = line.strip().split(",")
            cases[(e, c)] = hit == "1"
    hits = {int(k.split("@")[1]): v for k, v in meta.items() if k.startswith("hits@")}
    return meta["name"], RankingReport(meta["MR"], meta["MRR"], hits, meta["n"]), cases


def cmd_compare(args):
    from .evaluation import EvaluationError, comparison_csv, comparison_text, reports_csv

    dirs = [m for m in args.models.split(",") if m]
    if len(dirs) < 2:
        raise StageError("compare needs at least two evaluation directories")
    reports, outcomes, keys = {}, {}, None
    for d in dirs:
        name, report, cases = _read_eval_dir(d)
        if name in reports:
            name = f"{name}[{d}]"
        if keys is None:
            keys = sorted(cases)
        elif sorted(cases) != keys:
            raise StageError(f"misaligned test samples: {d}")
        reports[name] = report
        outcomes[name] = [cases[k] for k in keys]
    try:
        from .evaluation import compare_models
        pairs = compare_models(reports, outcomes, args.alpha, corrected=not args.uncorrected)
    except EvaluationError as exc:
        raise StageError(str(exc)) from None
    out = Path(args.out_dir)
    _write(out / "metrics.csv", reports_csv(reports))
    _write(out / "comparison.csv", comparison_csv(pairs))
    _write(out / "comparison.txt", comparison_text(pairs))
    sys.stdout.write(comparison_text(pairs))
    return dirs


# --- parser ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--out-dir", default="out")
    common.add_argument("--config", help="TOML configuration file")
    common.add_argument("--threads", type=int, default=None, help="cap numeric worker threads")
    common.add_argument("--deterministic", action="store_true",
                        help="single-threaded numeric sections")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="edithist", description="Edit-history knowledge graph toolkit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", parents=[common], help="build a store from a dump")
    s.add_argument("--format", choices=["xml", "jsonl"], default="xml")
    s.add_argument("--input", required=True)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("analyze", parents=[common], help="edit-history reports")
    s.add_argument("--store", required=True)
    s.add_argument("--report", choices=["transitions", "class-ops", "removed-props", "edit-wars"],
                   default="transitions")
    s.add_argument("--format", choices=["csv", "dot"], default="csv")
    s.add_argument("--prune", type=float, default=0.10)
    s.add_argument("--top", type=int, default=10)
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("classrank", parents=[common], help="class importance ranking")
    s.add_argument("--store", required=True)
    s.add_argument("--pagerank-file")
    s.add_argument("--top", type=int, default=100)
    s.add_argument("--filter-label", default="Wikimedia")
    s.add_argument("--aggregate", choices=["sum", "mean"], default="sum")
    s.add_argument("--damping", type=float, default=0.85)
    s.add_argument("--iterations", type=int, default=100)
    s.add_argument("--format", choices=["csv"], default="csv")
    s.set_defaults(func=cmd_classrank)

    s = sub.add_parser("split", parents=[common], help="chronological train/valid/test split")
    s.add_argument("--store", required=True)
    s.add_argument("--train", type=float, default=0.70)
    s.add_argument("--valid", type=float, default=0.15)
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("export", parents=[common], help="N-Triples export")
    s.add_argument("--store", required=True)
    s.add_argument("--static", action="store_true")
    s.add_argument("--dynamic", action="store_true")
    s.add_argument("--horizon", type=int, default=None, help="last operation ordinal to include")
    s.add_argument("--format", choices=["nt"], default="nt")
    s.set_defaults(func=cmd_export)

    s = sub.add_parser("train", parents=[common], help="train a type predictor")
    s.add_argument("--split-dir", required=True)
    s.add_argument("--model", choices=["transe", "rotate", "mure"], default="transe")
    s.add_argument("--sampler", choices=["basic", "edits", "edits-no-wars", "inverse"],
                   default="basic")
    s.add_argument("--preset", action="store_true", help="start from the tuned configuration for this model")
    s.add_argument("--dim", type=int)
    s.add_argument("--epochs", type=int)
    s.add_argument("--batch", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--negatives", type=int)
    s.add_argument("--margin", type=float)
    s.add_argument("--corrupt-side", choices=["head", "tail", "both"], default="both")
    s.add_argument("--max-reject-retries", type=int, default=100)
    s.add_argument("--train-only", action="store_true", help="fit on the train part alone")
    s.add_argument("--supervised", action="store_true", help="walk embeddings + random forest")
    s.add_argument("--walks", type=int, default=50)
    s.add_argument("--depth", type=int, default=5)
    s.add_argument("--window", type=int, default=5)
    s.add_argument("--trees", type=int, default=75)
    s.add_argument("--min-samples-split", type=int, default=2)
    s.add_argument("--dedup", action="store_true", help="keep the last label of repeated triples")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", parents=[common], help="filtered ranking metrics")
    s.add_argument("--model", required=True)
    s.add_argument("--split-dir", required=True)
    s.add_argument("--name")
    s.add_argument("--format", choices=["csv"], default="csv")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("compare", parents=[common], help="pairwise significance tests")
    s.add_argument("--models", required=True, help="comma-separated evaluation directories")
    s.add_argument("--alpha", type=float, default=0.01)
    s.add_argument("--uncorrected", action="store_true", help="McNemar without continuity correction")
    s.add_argument("--format", choices=["csv"], default="csv")
    s.set_defaults(func=cmd_compare)
    return p


def load_config(path, command) -> dict:
    if sys.version_info >= (3, 11):
        import tomllib
    else:
        import tomli as tomllib
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    out = {k: v for k, v in data.items() if not isinstance(v, dict)}
    out.update(data.get(command, {}))
    return {k.replace("-", "_"): v for k, v in out.items()}


def _config_path(argv):
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def parse_args(argv):
    parser = build_parser()
    path = _config_path(argv)
    subparsers = parser._subparsers._group_actions[0].choices
    command = next((tok for tok in argv if tok in subparsers), None)
    if path and command:
        try:
            cfg = load_config(path, command)
        except (OSError, ValueError) as exc:
            parser.exit(2, f"edithist: error: cannot read config {path}: {exc}\n")
        sub = subparsers[command]
        actions = {a.dest: a for a in sub._actions}
        unknown = sorted(set(cfg) - set(actions))
        if unknown:
            parser.exit(2, f"edithist: error: unknown config keys: {', '.join(unknown)}\n")
        for key in cfg:
            actions[key].required = False
        sub.set_defaults(**cfg)
    return parser.parse_args(argv)


def _cap_threads(n):
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.deterministic:
        _cap_threads(1)
    elif args.threads:
        _cap_threads(args.threads)
    started = time.time()
    try:
        inputs = args.func(args)
    except StageError as exc:
        print(f"edithist {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as exc:
        print(f"edithist {args.command}: error: {exc}", file=sys.stderr)
        return 1
    Path(args.out_dir).mkdir(parents=True, exist_ok=True)
    write_manifest(args.out_dir, ["edithist", *argv], args.seed, inputs, started)
    return 0


if __name__ == "__main__":
    sys.exit(main())
