"""Command-line entry point.

One binary, subcommands for each stage of the pipeline: audit, sweep,
metrics, compgap, uncertainty, agreement, sample, export, fixture, serve.
Every artifact embeds a provenance block (tool version, config, input
digests) and re-running a command rewrites its outputs byte-identically.

Exit codes: 0 success, 1 usage, 2 data validation, 3 internal error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import __version__
from .audit import (
    AUDIT_CATEGORIES,
    AuditConfig,
    audit_dataset,
    build_panel,
    cutoff_sweep,
    label_lines,
    loo_analysis,
    parse_label_lines,
    report_document,
)
from .metrics import (
    Metric,
    avg_comp_gap_over,
    condition_scores,
    load_score_table,
    metric_value,
    split_report,
)
from .rank_store import (
    Condition,
    DataError,
    dump_manifest,
    generate_fixture,
    ingest_runs,
    load_manifest,
    serialize_runs,
    validate_matrix,
)
from .reports import (
    count_pct,
    format_pct,
    provenance_block,
    render_table,
    write_artifact,
)
from .stats import (
    BootstrapConfig,
    LabelMatrix,
    bootstrap_mean_ci,
    fleiss_kappa,
    krippendorff_alpha_nominal,
    paired_delta_ci,
    pairwise_agreement,
    stratified_sample,
)
from .validation import ISSUE_LABELS, ValidationStore, parse_policy, replay_log

OUT_ENV = "CIRAUDIT_OUT"


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D102 - argparse hook
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise UsageError(message)


def _split_csv(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _parse_mapping(text: str, what: str) -> dict[str, int]:
    out: dict[str, int] = {}
    for part in _split_csv(text):
        key, sep, value = part.partition("=")
        if not sep:
            raise UsageError(f"bad {what} entry {part!r}, expected name=count")
        try:
            out[key.strip()] = int(value)
        except ValueError:
            raise UsageError(f"bad {what} count in {part!r}") from None
    return out


def _out_dir(args: argparse.Namespace) -> Path:
    out = args.out or os.environ.get(OUT_ENV) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_matrix(args: argparse.Namespace):
    if not args.manifest or not args.runs:
        raise UsageError("this command needs --manifest and --runs")
    manifest = load_manifest(args.manifest)
    matrix = None
    cells: dict = {}
    for runs_path in args.runs:
        part = ingest_runs(runs_path, manifest)
        overlap = cells.keys() & part.cells.keys()
        if overlap:
            qid, rid, cond = next(iter(overlap))
            raise DataError(
                f"duplicate cell across run files: ({qid}, {rid}, {cond.value})"
            )
        cells.update(part.cells)
    from .rank_store import RunMatrix

    matrix = RunMatrix(manifest=manifest, cells=cells)
    policy = args.policy.replace("-", "_")
    validate_matrix(matrix, policy)
    return matrix


def _pool(args: argparse.Namespace) -> list[str] | None:
    return _split_csv(args.pool) if args.pool else None


def _metric(args: argparse.Namespace) -> Metric:
    name = args.metric
    if name == "recall":
        name = f"recall@{args.k}"
    return Metric.parse(name)


def _inputs(args: argparse.Namespace) -> dict[str, str]:
    inputs: dict[str, str] = {}
    if getattr(args, "manifest", None):
        inputs["manifest"] = args.manifest
    for i, runs_path in enumerate(getattr(args, "runs", None) or []):
        inputs[f"runs[{i}]"] = runs_path
    if getattr(args, "log", None):
        inputs["log"] = args.log
    if getattr(args, "labels", None):
        inputs["labels"] = args.labels
    if getattr(args, "table", None):
        inputs["table"] = args.table
    return inputs


def _provenance(args: argparse.Namespace, command: str, **extra) -> dict:
    config = {
        key: value
        for key, value in vars(args).items()
        if key not in ("func", "out") and value is not None
    }
    config.update(extra)
    return provenance_block(command, __version__, config, _inputs(args))


# ---------------------------------------------------------------------------
# Subcommand handlers


def cmd_audit(args: argparse.Namespace) -> int:
    matrix = _load_matrix(args)
    report = audit_dataset(matrix, AuditConfig(k=args.k), _pool(args))
    out = _out_dir(args)
    doc = report_document(report)
    write_artifact(
        out / "audit_report.json",
        {"provenance": _provenance(args, "audit"), "report": doc},
    )
    (out / "audit_labels.jsonl").write_text(
        "".join(line + "\n" for line in label_lines(report)), encoding="utf-8"
    )
    rows = [
        {
            "category": cat,
            "count": report.counts[cat],
            "percent": format_pct(report.percentages[cat]),
        }
        for cat in AUDIT_CATEGORIES
    ]
    rows.append(
        {
            "category": "shortcut_any",
            "count": report.shortcut_count,
            "percent": format_pct(100.0 * report.shortcut_rate),
        }
    )
    rows.append({"category": "total", "count": report.total, "percent": "100.0"})
    print(f"audit of {report.total} queries at K={args.k} "
          f"over {len(report.pool)} retrievers")
    print(render_table(rows, ["category", "count", "percent"]))
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    matrix = _load_matrix(args)
    pool = _pool(args)
    ks = [int(x) for x in _split_csv(args.cutoffs)]
    rates = cutoff_sweep(matrix, ks, pool)
    effective_pool = pool or list(matrix.manifest.retriever_ids)
    loo_doc = None
    if len(effective_pool) >= 2:
        loo = loo_analysis(matrix, AuditConfig(k=args.k), pool)
        loo_doc = {
            "k": args.k,
            "full_rate_percent": 100.0 * loo.full_rate,
            "rates_percent": {
                r: 100.0 * v for r, v in sorted(loo.rates.items())
            },
            "range_percent": [100.0 * loo.min_rate, 100.0 * loo.max_rate],
        }
    else:
        print("pool of one retriever: leave-one-out skipped", file=sys.stderr)
    out = _out_dir(args)
    write_artifact(
        out / "sweep.json",
        {
            "provenance": _provenance(args, "sweep"),
            "shortcut_rate_percent": {
                str(k): 100.0 * rates[k] for k in sorted(rates)
            },
            "leave_one_out": loo_doc,
        },
    )
    rows = [
        {"K": k, "shortcut_rate": format_pct(100.0 * rates[k])}
        for k in sorted(rates)
    ]
    print(render_table(rows, ["K", "shortcut_rate"]))
    if loo_doc is not None:
        print(
            f"leave-one-out at K={args.k}: full "
            f"{format_pct(loo_doc['full_rate_percent'])}, range "
            f"{format_pct(loo_doc['range_percent'][0])}"
            f"-{format_pct(loo_doc['range_percent'][1])}"
        )
    return 0


def _resolve_splits(args: argparse.Namespace, matrix) -> dict[str, list[str]]:
    splits: dict[str, list[str]] = {"Full": list(matrix.manifest.query_ids)}
    report = audit_dataset(matrix, AuditConfig(k=args.k), _pool(args))
    splits["SF"] = report.sf_query_ids()
    if getattr(args, "v_split", None):
        import json as _json

        doc = _json.loads(Path(args.v_split).read_text(encoding="utf-8"))
        splits["V"] = [str(q) for q in doc.get("query_ids", [])]
    return splits


def cmd_metrics(args: argparse.Namespace) -> int:
    matrix = _load_matrix(args)
    metric = _metric(args)
    splits = _resolve_splits(args, matrix)
    rows = split_report(matrix, splits, metric, _pool(args))
    out = _out_dir(args)
    write_artifact(
        out / "metrics.json",
        {
            "provenance": _provenance(args, "metrics", metric=str(metric)),
            "metric": str(metric),
            "rows": [
                {
                    "retriever": r.retriever_id,
                    "split": r.split_id,
                    "mm": r.mm,
                    "delta_mm_i": r.delta_mm_i,
                    "delta_mm_t": r.delta_mm_t,
                    "delta_i_t": r.delta_i_t,
                }
                for r in rows
            ],
        },
    )
    table = [
        {
            "retriever": r.retriever_id,
            "split": r.split_id,
            "MM": format_pct(100 * r.mm),
            "dMM-I": format_pct(100 * r.delta_mm_i),
            "dMM-T": format_pct(100 * r.delta_mm_t),
            "dI-T": format_pct(100 * r.delta_i_t),
        }
        for r in rows
    ]
    print(f"metric: {metric}")
    print(render_table(table, ["retriever", "split", "MM", "dMM-I", "dMM-T", "dI-T"]))
    return 0


def cmd_compgap(args: argparse.Namespace) -> int:
    metric_key = args.metric
    pool = _pool(args)
    rows_out = []
    if args.manifest:
        matrix = _load_matrix(args)
        metric = Metric.parse(metric_key)
        splits = _resolve_splits(args, matrix)
        for split_id, qids in splits.items():
            scores = [
                condition_scores(matrix, qids, rid, metric, split_id=split_id)
                for rid in (pool or matrix.manifest.retriever_ids)
            ]
            gap = avg_comp_gap_over(scores)
            rows_out.append(
                {
                    "dataset": matrix.manifest.benchmark_id,
                    "split": split_id,
                    "comp_gap": gap.mean,
                    "defined": gap.defined_count,
                    "undefined": gap.undefined_count,
                }
            )
    else:
        table = load_score_table(args.table)
        if metric_key not in table.metrics():
            raise DataError(
                f"score table has metrics {table.metrics()}, not {metric_key!r}"
            )
        for dataset in table.datasets():
            for split_id in table.splits(dataset):
                rows = table.select(metric_key, dataset, split_id, pool)
                if not rows:
                    continue
                gap = avg_comp_gap_over(r.to_condition_scores() for r in rows)
                rows_out.append(
                    {
                        "dataset": dataset,
                        "split": split_id,
                        "comp_gap": gap.mean,
                        "defined": gap.defined_count,
                        "undefined": gap.undefined_count,
                    }
                )
    out = _out_dir(args)
    write_artifact(
        out / "compgap.json",
        {"provenance": _provenance(args, "compgap"), "rows": rows_out},
    )
    print(
        render_table(
            [
                {
                    "dataset": r["dataset"],
                    "split": r["split"],
                    "comp_gap": "undefined"
                    if r["comp_gap"] is None
                    else f"{r['comp_gap']:.3f}",
                    "retrievers": r["defined"],
                    "undefined": r["undefined"],
                }
                for r in rows_out
            ],
            ["dataset", "split", "comp_gap", "retrievers", "undefined"],
        )
    )
    return 0


def cmd_uncertainty(args: argparse.Namespace) -> int:
    matrix = _load_matrix(args)
    metric = _metric(args)
    pool = _pool(args) or list(matrix.manifest.retriever_ids)
    splits = _resolve_splits(args, matrix)
    wanted = {"full": "Full", "sf": "SF", "v": "V"}[args.split]
    if wanted not in splits:
        raise DataError(f"split {wanted!r} is not available")
    qids = splits[wanted]
    if not qids:
        raise DataError(f"split {wanted!r} is empty")
    config = BootstrapConfig(
        resamples=args.resamples, confidence=args.confidence, master_seed=args.seed
    )

    def per_query(cond: Condition) -> dict[str, list[float]]:
        values: dict[str, list[float]] = {}
        for qid in qids:
            vals = []
            for rid in pool:
                record = matrix.get(qid, rid, cond)
                vals.append(
                    0.0
                    if record is None
                    else metric_value(metric, record.relevant_ranks)
                )
            values[qid] = vals
        return values

    mm = per_query(Condition.MM)
    text = per_query(Condition.TEXT)
    image = per_query(Condition.IMAGE)
    dataset = matrix.manifest.benchmark_id
    n = len(qids)
    rows = []
    mm_means = [sum(v) / len(v) for v in mm.values()]
    ci = bootstrap_mean_ci(mm_means, config)
    rows.append((f"{metric}:mm", ci))
    for name, other in (("delta_mm_t", text), ("delta_mm_i", image)):
        pairs = {
            qid: list(zip(mm[qid], other[qid])) for qid in qids
        }
        rows.append((f"{metric}:{name}", paired_delta_ci(pairs, config)))
    out = _out_dir(args)
    write_artifact(
        out / "uncertainty.json",
        {
            "provenance": _provenance(args, "uncertainty", metric=str(metric)),
            "rows": [
                {
                    "dataset": dataset,
                    "split": wanted,
                    "N": n,
                    "metric": name,
                    "estimate": ci.estimate,
                    "lower": ci.lower,
                    "upper": ci.upper,
                }
                for name, ci in rows
            ],
        },
    )
    print(
        render_table(
            [
                {
                    "dataset": dataset,
                    "split": wanted,
                    "N": n,
                    "metric": name,
                    "estimate": f"{100 * ci.estimate:.1f}",
                    "interval": f"[{100 * ci.lower:.1f}, {100 * ci.upper:.1f}]",
                }
                for name, ci in rows
            ],
            ["dataset", "split", "N", "metric", "estimate", "interval"],
        )
    )
    return 0


def cmd_agreement(args: argparse.Namespace) -> int:
    if not args.log:
        raise UsageError("agreement needs --log (judgment log)")
    records = replay_log(args.log)
    if not records:
        raise DataError("judgment log is empty")
    latest: dict[tuple[str, str], object] = {}
    for pos, rec in enumerate(records):
        key = (rec.query_id, rec.annotator_id)
        held = latest.get(key)
        if held is None or (rec.timestamp, pos) >= held[0]:
            latest[key] = ((rec.timestamp, pos), rec)
    labels = {key: rec.issues for key, (_, rec) in latest.items()}
    items = sorted({q for q, _ in labels})
    raters = sorted({a for _, a in labels})
    if args.items:
        keep = set(_split_csv(args.items))
        items = [i for i in items if i in keep]
        labels = {k: v for k, v in labels.items() if k[0] in keep}
    matrix = LabelMatrix(
        item_ids=tuple(items), rater_ids=tuple(raters), labels=labels
    )
    binary = matrix.map_labels(lambda issues: "valid" if not issues else "invalid")
    complete_items = tuple(
        i
        for i in items
        if all((i, r) in labels for r in raters)
    )
    fleiss = None
    if complete_items:
        complete = LabelMatrix(
            item_ids=complete_items,
            rater_ids=tuple(raters),
            labels={
                (i, r): binary.labels[(i, r)]
                for i in complete_items
                for r in raters
            },
        )
        fleiss = fleiss_kappa(complete)
    alpha = krippendorff_alpha_nominal(binary)
    pairwise = pairwise_agreement(matrix)
    per_issue = {}
    for issue in ISSUE_LABELS:
        flagged = matrix.map_labels(lambda s, issue=issue: issue in s)
        per_issue[issue] = krippendorff_alpha_nominal(flagged)
    out = _out_dir(args)
    write_artifact(
        out / "agreement.json",
        {
            "provenance": _provenance(args, "agreement"),
            "items": len(items),
            "raters": len(raters),
            "fleiss_kappa": fleiss,
            "krippendorff_alpha": alpha,
            "mean_pairwise_cohen_kappa": pairwise.mean_kappa,
            "pairwise_kappa_range": [pairwise.min_kappa, pairwise.max_kappa],
            "unanimous_rate": pairwise.unanimous_rate,
            "issue_alpha": per_issue,
            "signature_rates": {
                f"{a}|{b}": v for (a, b), v in sorted(pairwise.signature_rates.items())
            },
        },
    )

    def show(value: float | None) -> str:
        return "undefined" if value is None else f"{value:.3f}"

    print(f"items: {len(items)}  raters: {len(raters)}")
    print(f"fleiss_kappa:              {show(fleiss)}")
    print(f"krippendorff_alpha:        {show(alpha)}")
    print(f"mean_pairwise_cohen_kappa: {show(pairwise.mean_kappa)}")
    print(
        f"pairwise_kappa_range:      "
        f"[{show(pairwise.min_kappa)}, {show(pairwise.max_kappa)}]"
    )
    print(f"unanimous_rate:            {format_pct(100 * pairwise.unanimous_rate)}%")
    return 0


def cmd_sample(args: argparse.Namespace) -> int:
    if not args.labels:
        raise UsageError("sample needs --labels (per-query label file)")
    with open(args.labels, "r", encoding="utf-8") as fh:
        labels = parse_label_lines(fh)
    requests = _parse_mapping(args.request, "request")
    unknown = set(requests) - set(AUDIT_CATEGORIES)
    if unknown:
        raise DataError(f"unknown categories requested: {sorted(unknown)}")
    sample = stratified_sample(labels, requests, args.seed)
    out = _out_dir(args)
    write_artifact(
        out / "sample.json",
        {
            "provenance": _provenance(args, "sample"),
            "selected": {c: list(ids) for c, ids in sample.selected.items()},
            "shortfall": dict(sample.shortfall),
        },
    )
    rows = [
        {
            "category": cat,
            "requested": requests[cat],
            "sampled": len(sample.selected[cat]),
            "shortfall": sample.shortfall[cat],
        }
        for cat in sorted(requests)
    ]
    print(render_table(rows, ["category", "requested", "sampled", "shortfall"]))
    return 0


def cmd_export(args: argparse.Namespace) -> int:
    matrix = _load_matrix(args)
    report = audit_dataset(matrix, AuditConfig(k=args.k), _pool(args))
    policy = parse_policy(args.aggregation)
    aggregated = None
    if args.log:
        from .validation import aggregate_labels

        aggregated = aggregate_labels(replay_log(args.log), policy)
    from .validation import export_splits

    manifests = export_splits(
        matrix.manifest,
        report,
        aggregated,
        policy_name=args.aggregation,
        include_v=aggregated is not None,
    )
    out = _out_dir(args)
    for split_id, manifest in manifests.items():
        write_artifact(
            out / f"split_{split_id.lower()}.json",
            {
                "provenance": _provenance(args, "export"),
                **manifest.to_document(),
            },
        )
    sizes = {s: len(m.query_ids) for s, m in manifests.items()}
    print(
        "  ".join(f"{s}: {n}" for s, n in sizes.items())
        + ("" if "V" in manifests else "  (V skipped: no judgment log)")
    )
    return 0


def cmd_fixture(args: argparse.Namespace) -> int:
    counts = _parse_mapping(args.counts, "counts")
    sweep_profile = None
    if args.sweep:
        sweep_profile = {}
        for part in _split_csv(args.sweep):
            k_str, sep, n_str = part.partition(":")
            if not sep:
                raise UsageError(f"bad sweep entry {part!r}, expected K:count")
            sweep_profile[int(k_str)] = int(n_str)
    fixture = generate_fixture(
        counts,
        pool_size=args.pool_size,
        gallery_size=args.gallery_size,
        k=args.k,
        seed=args.seed,
        sweep_profile=sweep_profile,
        relevants_per_query=args.relevants,
        include_topk=args.topk,
    )
    out = _out_dir(args)
    (out / "manifest.json").write_text(
        dump_manifest(fixture.manifest), encoding="utf-8"
    )
    from .rank_store import RunMatrix

    matrix = RunMatrix(
        manifest=fixture.manifest,
        cells={
            (r.query_id, r.retriever_id, r.condition): r for r in fixture.records
        },
    )
    (out / "runs.jsonl").write_text(
        "".join(line + "\n" for line in serialize_runs(matrix)), encoding="utf-8"
    )
    import json as _json

    (out / "planted_labels.jsonl").write_text(
        "".join(
            _json.dumps({"query": qid, "category": cat}, sort_keys=True) + "\n"
            for qid, cat in fixture.labels.items()
        ),
        encoding="utf-8",
    )
    print(
        f"fixture: {len(fixture.manifest.query_ids)} queries, "
        f"{len(fixture.records)} records -> {out}"
    )
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import json as _json

    matrix = _load_matrix(args)
    pool = _pool(args)
    report = audit_dataset(matrix, AuditConfig(k=args.k), pool)
    batches_doc = _json.loads(Path(args.batches).read_text(encoding="utf-8"))
    batches = {
        str(a): [str(q) for q in qids]
        for a, qids in batches_doc.get("annotators", {}).items()
    }
    overlap = [str(q) for q in batches_doc.get("overlap", [])]
    in_scope = set(overlap)
    for qids in batches.values():
        in_scope.update(qids)
    panels = {
        qid: build_panel(matrix, qid, AuditConfig(k=args.k).depth, pool)
        for qid in sorted(in_scope)
    }
    store = ValidationStore(
        manifest=matrix.manifest,
        audit_report=report,
        panels=panels,
        batches=batches,
        overlap=overlap,
        log_path=args.log,
    )
    from .service import create_app

    app = create_app(store, asset_dir=args.assets, ui_dir=args.ui)
    import uvicorn

    print(f"serving validation workflow on http://{args.host}:{args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# Parser assembly


def build_parser() -> Parser:
    parser = Parser(prog="ciraudit", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_io(p: Parser) -> None:
        p.add_argument("--manifest", help="benchmark manifest document")
        p.add_argument(
            "--runs",
            action="append",
            help="line-delimited run records (repeatable)",
        )
        p.add_argument(
            "--policy",
            choices=["strict", "allow-missing"],
            default="strict",
            help="missing-cell policy (default strict)",
        )

    def add_common(p: Parser) -> None:
        p.add_argument("--k", type=int, default=10, help="audit cutoff (default 10)")
        p.add_argument("--pool", help="comma-separated retriever subset")
        p.add_argument(
            "--out",
            help=f"output directory (default ${OUT_ENV} or current directory)",
        )

    p = sub.add_parser("audit", help="classify queries by unimodal solvability")
    add_io(p)
    add_common(p)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("sweep", help="shortcut rates across cutoffs + leave-one-out")
    add_io(p)
    add_common(p)
    p.add_argument("--cutoffs", default="5,10,20", help="comma list (default 5,10,20)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("metrics", help="per-retriever condition scores and deltas")
    add_io(p)
    add_common(p)
    p.add_argument(
        "--metric",
        default="recall",
        help="recall|mrr|ndcg, with optional @cutoff (default recall@K)",
    )
    p.add_argument("--v-split", help="validated-split manifest for a V column")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("compgap", help="retriever-averaged composition gap")
    add_io(p)
    add_common(p)
    p.add_argument(
        "--metric", default="ndcg", help="score-table metric key or metric name"
    )
    p.add_argument("--table", help="published-score table (default: packaged)")
    p.add_argument("--v-split", help="validated-split manifest for a V row")
    p.set_defaults(func=cmd_compgap)

    p = sub.add_parser("uncertainty", help="bootstrap confidence intervals")
    add_io(p)
    add_common(p)
    p.add_argument("--metric", default="recall")
    p.add_argument("--split", choices=["full", "sf"], default="full")
    p.add_argument("--resamples", type=int, default=10_000)
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--v-split", help="validated-split manifest")
    p.set_defaults(func=cmd_uncertainty)

    p = sub.add_parser("agreement", help="inter-annotator agreement coefficients")
    p.add_argument("--log", help="judgment log (line-delimited)")
    p.add_argument("--items", help="restrict to these item ids (comma list)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_agreement)

    p = sub.add_parser("sample", help="stratified query sample from audit labels")
    p.add_argument("--labels", help="per-query audit label file")
    p.add_argument(
        "--request",
        default="composition_required=1000,unresolved=1000",
        help="category=count pairs (comma-separated)",
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("export", help="write Full/SF/V split manifests")
    add_io(p)
    add_common(p)
    p.add_argument("--log", help="judgment log for the V split")
    p.add_argument(
        "--aggregation",
        default="single_assignee",
        help="single_assignee or majority[:threshold[:quorum]]",
    )
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("fixture", help="generate a synthetic planted benchmark")
    p.add_argument(
        "--counts",
        required=True,
        help="category=count pairs, e.g. shortcut_text=5,unresolved=3",
    )
    p.add_argument("--pool-size", type=int, default=3)
    p.add_argument("--gallery-size", type=int, default=500)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--relevants", type=int, default=1)
    p.add_argument("--topk", action="store_true", help="emit multimodal top-k lists")
    p.add_argument("--sweep", help="K:count pairs pinning best-unimodal bands")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fixture)

    p = sub.add_parser("serve", help="run the validation service")
    add_io(p)
    add_common(p)
    p.add_argument("--batches", required=True, help="annotator batches document")
    p.add_argument("--log", help="append-only judgment log path")
    p.add_argument("--assets", help="read-only asset directory")
    p.add_argument("--ui", help="static frontend directory to mount")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.set_defaults(func=cmd_serve)

    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError:
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ciraudit: usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"ciraudit: data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"ciraudit: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort diagnostic
        print(f"ciraudit: internal error: {exc!r}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
