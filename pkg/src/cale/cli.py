"""Command-line pipeline: build pair datasets, train the adapter, run the
evaluation suites, and gradient-check the loss implementation.

Every JSON report embeds a run manifest (command, resolved arguments, input
file digests, seed, toolkit version). Outputs are never overwritten unless
--force is given.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .adapter import (
    AdapterParams,
    TrainConfig,
    adapt_rows,
    gradient_check,
    parse_train_config,
    read_adapter,
    train,
    write_adapter,
)
from .conceptdiff import baseline_1l1c, classify, metrics, score_pairs, tune_threshold
from .corpus import Pos, filter_corpus, load_taxonomy, parse_corpus
from .cosimlex import read_entries, subtask1, subtask2, write_predictions
from .embeddings import cosine_similarity, read_embeddings
from .errors import CaleError
from .geometry import (
    category_distributions,
    silhouette,
    unique_beginner_labels,
    write_histogram_csv,
    write_histogram_svg,
    wup_correlation,
)
from .lscd import build_targets, load_gold, load_usages, score_targets, summarize
from .pairs import (
    Split,
    SplitSpec,
    assign_occurrences,
    generate_pairs,
    pair_stats,
    partition,
    read_pairs,
    write_pairs,
)
from .util import default_threads, sha256_file, substream


@dataclass
class RunManifest:
    command: str
    arguments: dict
    inputs: dict[str, str]
    seed: int | None
    version: str


def _manifest(command: str, args: argparse.Namespace, input_paths: list[str | Path],
              seed: int | None = None) -> dict:
    arguments = {k: v for k, v in vars(args).items() if k != "func" and v is not None}
    for key, value in list(arguments.items()):
        if isinstance(value, Path):
            arguments[key] = str(value)
    inputs = {str(p): sha256_file(p) for p in input_paths}
    return asdict(RunManifest(command=command, arguments=arguments, inputs=inputs,
                              seed=seed, version=__version__))


def _prepare_output(path: str | Path, force: bool) -> Path:
    path = Path(path)
    if path.exists() and not force:
        raise CaleError(f"refusing to overwrite {path} (use --force)")
    if path.parent and not path.parent.exists():
        raise CaleError(f"output directory {path.parent} does not exist")
    return path


def _write_json(obj: dict, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"wrote {path}")


def _load_adapter_if_given(args) -> AdapterParams | None:
    if getattr(args, "adapter", None):
        return read_adapter(args.adapter)
    return None


def cmd_build_pairs(args) -> int:
    out_pairs = _prepare_output(args.out_pairs, args.force)
    out_stats = _prepare_output(args.out_stats, args.force)
    spec = SplitSpec(val_fraction=args.val_frac, test_fraction=args.test_frac, seed=args.seed)
    occs = filter_corpus(parse_corpus(args.corpus))
    if not occs:
        raise CaleError("no occurrences survive filtering")
    assignment = partition((o.concept for o in occs), (o.lemma for o in occs), spec)
    per_split = assign_occurrences(occs, assignment)
    records = []
    for split in (Split.TRAIN, Split.VAL, Split.TEST):
        records.extend(generate_pairs(per_split[split], spec.seed, split))
    write_pairs(records, out_pairs)
    print(f"wrote {out_pairs} ({len(records)} pairs)")
    report = pair_stats(records)
    report["manifest"] = _manifest("build-pairs", args, [args.corpus], seed=args.seed)
    _write_json(report, out_stats)
    return 0


def cmd_train_adapter(args) -> int:
    out_adapter = _prepare_output(args.out_adapter, args.force)
    out_trace = _prepare_output(args.out_trace, args.force)
    config = parse_train_config(args.config) if args.config else TrainConfig()
    if args.seed is not None:
        config = TrainConfig(**{**_config_dict(config), "seed": args.seed})
    pairs = [p for p in read_pairs(args.pairs) if p.split is Split(args.split)]
    if not pairs:
        raise CaleError(f"no pairs in split {args.split!r}")
    embeddings = read_embeddings(args.embeddings)
    params, trace = train(pairs, embeddings, config)
    write_adapter(params, out_adapter)
    print(f"wrote {out_adapter} ({params.d_out}x{params.d_in})")
    with open(out_trace, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["step", "mean_loss"])
        for i, loss in enumerate(trace, start=1):
            writer.writerow([i, repr(float(loss))])
    print(f"wrote {out_trace} ({len(trace)} steps)")
    return 0


def _config_dict(config: TrainConfig) -> dict:
    return {f: getattr(config, f) for f in TrainConfig.__dataclass_fields__}


def cmd_eval_cdiff(args) -> int:
    out_report = _prepare_output(args.out_report, args.force)
    pairs = read_pairs(args.pairs)
    embeddings = read_embeddings(args.embeddings)
    adapter = _load_adapter_if_given(args)
    tune_pairs = [p for p in pairs if p.split in (Split.TRAIN, Split.VAL)]
    test_pairs = [p for p in pairs if p.split is Split.TEST]
    if not tune_pairs or not test_pairs:
        raise CaleError("cdiff evaluation needs train/val pairs and test pairs")
    threshold = tune_threshold(score_pairs(tune_pairs, embeddings, adapter))
    scored_test = score_pairs(test_pairs, embeddings, adapter)
    model_report = metrics(classify(scored_test, threshold), test_pairs, threshold)
    base_report = metrics(baseline_1l1c(test_pairs), test_pairs)
    report = {
        "threshold": threshold,
        "n_test_pairs": len(test_pairs),
        "model": model_report.to_dict(),
        "baseline_1l1c": base_report.to_dict(),
        "manifest": _manifest("eval cdiff", args,
                              [args.pairs, args.embeddings] + ([args.adapter] if args.adapter else [])),
    }
    _write_json(report, out_report)
    return 0


def cmd_eval_lscd(args) -> int:
    out_scores = _prepare_output(args.out_scores, args.force)
    out_report = _prepare_output(args.out_report, args.force)
    targets = build_targets(load_gold(args.gold), load_usages(args.usages))
    embeddings = read_embeddings(args.embeddings)
    adapter = _load_adapter_if_given(args)
    scores = score_targets(targets, embeddings, adapter, threads=args.threads)
    with open(out_scores, "w", encoding="utf-8") as f:
        for word, apd_score, prt_score in scores:
            f.write(f"{word}\t{apd_score!r}\t{prt_score!r}\n")
    print(f"wrote {out_scores} ({len(scores)} targets)")
    if len(targets) >= 3:
        report = summarize(targets, scores)
    else:
        report = {"n_targets": len(targets), "spearman": None,
                  "note": "fewer than 3 targets; rank correlation undefined"}
    report["manifest"] = _manifest("eval lscd", args,
                                   [args.gold, args.usages, args.embeddings]
                                   + ([args.adapter] if args.adapter else []))
    _write_json(report, out_report)
    return 0


def _stored_vector(embeddings, adapter, key: str) -> np.ndarray:
    vec = embeddings.vector(key).astype(np.float64)
    if adapter is not None:
        vec = adapter.weight.astype(np.float64) @ vec
        if adapter.bias is not None:
            vec = vec + adapter.bias.astype(np.float64)
    return vec


def cmd_eval_cosimlex(args) -> int:
    out_predictions = _prepare_output(args.out_predictions, args.force)
    out_report = _prepare_output(args.out_report, args.force)
    entries = read_entries(args.entries)
    embeddings = read_embeddings(args.embeddings)
    adapter = _load_adapter_if_given(args)
    predictions: list[tuple[float, float]] = []
    for entry in entries:
        per_context = []
        for k in (1, 2):
            v1 = _stored_vector(embeddings, adapter, f"{entry.id}#c{k}.w1")
            v2 = _stored_vector(embeddings, adapter, f"{entry.id}#c{k}.w2")
            per_context.append(cosine_similarity(v1, v2))
        predictions.append((per_context[0], per_context[1]))
    write_predictions(entries, predictions, out_predictions)
    print(f"wrote {out_predictions} ({len(entries)} entries)")
    report = {
        "n_entries": len(entries),
        "subtask1_pearson": subtask1(entries, predictions).to_dict(),
        "subtask2_spearman": subtask2(entries, predictions).to_dict(),
        "manifest": _manifest("eval cosimlex", args,
                              [args.entries, args.embeddings]
                              + ([args.adapter] if args.adapter else [])),
    }
    _write_json(report, out_report)
    return 0


def cmd_eval_geometry(args) -> int:
    out_hist = _prepare_output(args.out_hist, args.force)
    out_report = _prepare_output(args.out_report, args.force)
    out_svg = _prepare_output(args.out_svg, args.force) if args.out_svg else None
    occs = parse_corpus(args.corpus)
    occ_by_id = {o.id: o for o in occs}
    pairs = read_pairs(args.pairs)
    embeddings = read_embeddings(args.embeddings)
    taxonomy = load_taxonomy(args.taxonomy)
    adapter = _load_adapter_if_given(args)

    tune_pairs = [p for p in pairs if p.split in (Split.TRAIN, Split.VAL)]
    test_pairs = [p for p in pairs if p.split is Split.TEST]
    if not test_pairs:
        raise CaleError("geometry evaluation needs test pairs")
    threshold = tune_threshold(score_pairs(tune_pairs, embeddings, adapter)) if tune_pairs else None
    scored_test = score_pairs(test_pairs, embeddings, adapter)
    dists = category_distributions(scored_test, threshold=threshold)
    write_histogram_csv(dists, out_hist)
    print(f"wrote {out_hist}")
    if out_svg is not None:
        write_histogram_svg(dists, out_svg)
        print(f"wrote {out_svg}")

    test_ids = sorted({p.occ_a for p in test_pairs} | {p.occ_b for p in test_pairs})
    missing = [i for i in test_ids if i not in occ_by_id]
    if missing:
        raise CaleError(f"pair occurrence {missing[0]!r} not present in the corpus")
    rows = embeddings.rows[embeddings.row_indices(test_ids)]
    if adapter is not None:
        rows = adapt_rows(rows, adapter)
    synset_labels = [occ_by_id[i].concept for i in test_ids]
    sil_synset = silhouette(rows, synset_labels)

    nv_ids = [i for i in test_ids if occ_by_id[i].pos in (Pos.NOUN, Pos.VERB)]
    ub_labels_map, skipped = unique_beginner_labels(
        taxonomy, [occ_by_id[i].concept for i in nv_ids]
    )
    ub_ids = [i for i in nv_ids if occ_by_id[i].concept in ub_labels_map]
    sil_ub = None
    if ub_ids:
        ub_rows = embeddings.rows[embeddings.row_indices(ub_ids)]
        if adapter is not None:
            ub_rows = adapt_rows(ub_rows, adapter)
        ub_labels = [ub_labels_map[occ_by_id[i].concept] for i in ub_ids]
        if len(set(ub_labels)) >= 2:
            sil_ub = silhouette(ub_rows, ub_labels)

    occ_concept = {i: occ_by_id[i].concept for i in test_ids}
    wup_rho = wup_correlation(test_pairs, occ_concept, embeddings, taxonomy, adapter)

    report = {
        "threshold": threshold,
        "category_means": {c: d.mean for c, d in dists.distributions.items()},
        "category_counts": {c: d.n for c, d in dists.distributions.items()},
        "silhouette_synset": sil_synset,
        "silhouette_unique_beginner": sil_ub,
        "wup_spearman": wup_rho.to_dict(),
        "n_test_occurrences": len(test_ids),
        "n_unique_beginner_occurrences": len(ub_ids),
        "skipped_concepts": skipped,
        "manifest": _manifest("eval geometry", args,
                              [args.corpus, args.pairs, args.embeddings, args.taxonomy]
                              + ([args.adapter] if args.adapter else [])),
    }
    _write_json(report, out_report)
    return 0


def cmd_gradcheck(args) -> int:
    rng = substream(args.seed, "gradcheck")
    worst = 0.0
    for draw in range(args.draws):
        d_in, d_out = args.d_in, args.d_out
        params = AdapterParams(weight=rng.normal(size=(d_out, d_in)))
        batch = [
            (rng.normal(size=d_in), rng.normal(size=d_in), int(rng.integers(0, 2)))
            for _ in range(args.batch_size)
        ]
        err = gradient_check(params, batch, args.margin, args.step)
        worst = max(worst, err)
    print(f"gradcheck: {args.draws} draws, max relative error {worst:.3e} "
          f"(tolerance {args.tolerance:.1e})")
    if worst > args.tolerance:
        print("gradcheck FAILED", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cale",
        description="Concept-differentiation datasets, adapter training, and evaluation suites.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-pairs", help="build the four-category pair dataset from a corpus")
    p.add_argument("--corpus", required=True, help="occurrence JSONL file")
    p.add_argument("--out-pairs", required=True)
    p.add_argument("--out-stats", required=True)
    p.add_argument("--val-frac", type=float, default=0.05)
    p.add_argument("--test-frac", type=float, default=0.10)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_build_pairs)

    p = sub.add_parser("train-adapter", help="train the linear adapter on train-split pairs")
    p.add_argument("--pairs", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--config", help="key=value training config file")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--split", default="train", choices=[s.value for s in Split])
    p.add_argument("--out-adapter", required=True)
    p.add_argument("--out-trace", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_train_adapter)

    ev = sub.add_parser("eval", help="evaluation suites").add_subparsers(
        dest="suite", required=True
    )

    p = ev.add_parser("cdiff", help="threshold classification on test pairs")
    p.add_argument("--pairs", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--adapter")
    p.add_argument("--out-report", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_eval_cdiff)

    p = ev.add_parser("lscd", help="semantic-change scores and rank correlation")
    p.add_argument("--gold", required=True, help="word<TAB>gold_change file")
    p.add_argument("--usages", required=True, help="word<TAB>period<TAB>occ_id file")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--adapter")
    p.add_argument("--out-scores", required=True)
    p.add_argument("--out-report", required=True)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_eval_lscd)

    p = ev.add_parser("cosimlex", help="in-context similarity subtasks")
    p.add_argument("--entries", required=True, help="entry JSONL file")
    p.add_argument("--embeddings", required=True,
                   help="vectors keyed `<entry>#c<1|2>.w<1|2>`")
    p.add_argument("--adapter")
    p.add_argument("--out-predictions", required=True)
    p.add_argument("--out-report", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_eval_cosimlex)

    p = ev.add_parser("geometry", help="distance distributions, silhouettes, taxonomy correlation")
    p.add_argument("--corpus", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--taxonomy", required=True, help="child<TAB>parent edge list")
    p.add_argument("--adapter")
    p.add_argument("--out-hist", required=True)
    p.add_argument("--out-report", required=True)
    p.add_argument("--out-svg")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_eval_geometry)

    p = sub.add_parser("gradcheck", help="analytic vs finite-difference gradient check")
    p.add_argument("--d-in", type=int, default=8)
    p.add_argument("--d-out", type=int, default=6)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--draws", type=int, default=25)
    p.add_argument("--margin", type=float, default=0.7)
    p.add_argument("--step", type=float, default=1e-4)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", None) is None and hasattr(args, "threads"):
        args.threads = default_threads()
    try:
        return args.func(args)
    except (CaleError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
