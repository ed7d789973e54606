"""Command line interface.

Store path resolution: --store flag, else the TRACKDIFF_STORE environment
variable, else ./track_store.  Query subcommands print human-readable tables
by default and the exact service JSON payload with --json, so scripted
consumers see identical fields either way.  Exit codes: 0 success, 1
operational failure (one-line diagnostic on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import reporting
from .analysis import SynthPairSpec, synth_pair
from .compression import compress_track
from .errors import TrackdiffError
from .learn import (
    cross_validate,
    extract_features,
    labels_to_array,
    save_model,
)
from .metrics import MetricConfig
from .model import LabeledPair, MonitorItemSet
from .service import (
    ServiceConfig,
    payload_anomalies,
    payload_compare,
    payload_statdiff,
    payload_topk,
    payload_tracks,
    serve,
)
from .store import TrackStore, ingest_batch, ingest_stream, serve_stream_tcp

DEFAULT_STORE = "track_store"


def _store_path(args):
    if args.store:
        return args.store
    return os.environ.get("TRACKDIFF_STORE", DEFAULT_STORE)


def _items_arg(args):
    return list(args.items) if args.items else None


def _parse_budgets(spec):
    """Accept '5,10,20' or '5..30' (step 5) or '5..30:5'."""
    if "," in spec:
        return [int(x) for x in spec.split(",")]
    if ".." in spec:
        span, _, step = spec.partition(":")
        lo, hi = span.split("..")
        step = int(step) if step else 5
        return list(range(int(lo), int(hi) + 1, step))
    return [int(spec)]


def _print_breakdown(payload):
    bd = payload["breakdown"]
    print(f"{'channel':<30} {'ed':>8} {'dtw':>8} {'pc':>8} {'ss':>8}")
    for name, m in bd["per_channel"].items():
        print(f"{name:<30} {m['ed']:>8.4f} {m['dtw']:>8.4f} {m['pc']:>8.4f} {m['ss']:>8.4f}")
    if bd["missing"]:
        print(f"missing channels: {', '.join(bd['missing'])}")
    print(
        f"aggregate: ed={bd['aggregate_ed']:.3f} dtw={bd['aggregate_dtw']:.3f} "
        f"pc={bd['aggregate_pc']:.3f} ss={bd['aggregate_ss']:.3f}"
    )


def cmd_ingest_batch(args):
    store = TrackStore(_store_path(args))
    report = ingest_batch(args.path, store, args.budget, keep_raw=args.keep_raw)
    print(f"ingested {report.count} track(s) into {store.root}")
    for tid, msg in report.errors:
        print(f"  skipped {tid}: {msg}", file=sys.stderr)
    return 0 if not report.errors or report.count else 1


def cmd_ingest_stream(args):
    store = TrackStore(_store_path(args))
    if args.listen:
        host, _, port = args.listen.rpartition(":")
        serve_stream_tcp(
            host or "127.0.0.1",
            int(port),
            store,
            args.budget,
            max_connections=args.max_connections,
            keep_raw=args.keep_raw,
        )
        return 0
    stats = ingest_stream(sys.stdin, store, args.budget, keep_raw=args.keep_raw)
    print(
        f"stored {len(stats.stored)} track(s), "
        f"{stats.orphan_samples} orphan sample(s), "
        f"{len(stats.unterminated)} unterminated"
    )
    for tid, msg in stats.errors:
        print(f"  {tid}: {msg}", file=sys.stderr)
    return 0


def cmd_compare(args):
    store = TrackStore(_store_path(args))
    payload = payload_compare(store, args.a, args.b, _items_arg(args), args.k)
    if args.json:
        print(json.dumps(payload))
    else:
        _print_breakdown(payload)
    return 0


def cmd_topk(args):
    store = TrackStore(_store_path(args))
    payload = payload_topk(store, args.target, args.k, _items_arg(args))
    if args.json:
        print(json.dumps(payload))
        return 0
    if not payload["matches"]:
        print("no same-type candidates in store")
        return 0
    print(f"{'rank':<5} {'track_id':<28} {'ss':>8}  dr_refs")
    for rank, m in enumerate(payload["matches"], 1):
        refs = ",".join(m["dr_refs"]) or "-"
        print(f"{rank:<5} {m['track_id']:<28} {m['aggregate_ss']:>8.4f}  {refs}")
    return 0


def cmd_anomalies(args):
    store = TrackStore(_store_path(args))
    payload = payload_anomalies(
        store, args.target, args.reference, args.threshold_z, args.min_run, _items_arg(args)
    )
    if args.json:
        print(json.dumps(payload))
        return 0
    if not payload["intervals"]:
        print("no anomalous intervals")
        return 0
    print(f"{'channel':<30} {'start_t':>10} {'end_t':>10} {'severity':>9}")
    for h in payload["intervals"]:
        print(
            f"{h['channel_name']:<30} {h['start_t']:>10.1f} {h['end_t']:>10.1f} "
            f"{h['severity']:>9.2f}"
        )
    return 0


def cmd_statdiff(args):
    store = TrackStore(_store_path(args))
    payload = payload_statdiff(store, args.a, args.b, _items_arg(args))
    if args.json:
        print(json.dumps(payload))
        return 0
    print(f"{'channel':<30} {'t':>9} {'dof':>7} {'p':>10} {'mean_delta':>11}")
    for name, s in payload["report"]["per_channel"].items():
        print(
            f"{name:<30} {s['t_stat']:>9.3f} {s['dof']:>7.1f} {s['p_value']:>10.2e} "
            f"{s['mean_delta']:>11.4f}"
        )
    return 0


def cmd_synth(args):
    store = TrackStore(_store_path(args))
    labels = []
    for i in range(args.pairs):
        for correlated in (True, False):
            spec = SynthPairSpec(
                length=args.length,
                snr=args.snr,
                correlated=correlated,
                seed=args.seed + i,
            )
            a, b = synth_pair(spec)
            store.write_track(compress_track(a, args.budget))
            store.write_track(compress_track(b, args.budget))
            labels.append(
                {
                    "a": a.track_id,
                    "b": b.track_id,
                    "label": "similar" if correlated else "dissimilar",
                }
            )
    labels_path = args.labels or os.path.join(store.root, "labels.json")
    with open(labels_path, "w", encoding="utf-8") as f:
        json.dump(labels, f, indent=1)
    print(f"stored {2 * len(labels)} synthetic tracks, labels at {labels_path}")
    return 0


def _features_from_labels(args, store):
    with open(args.labels, "r", encoding="utf-8") as f:
        entries = json.load(f)
    cfg = MetricConfig()
    items = MonitorItemSet(items=tuple(args.items)) if args.items else MonitorItemSet()
    X, y = [], []
    for e in entries:
        pair = LabeledPair(e["a"], e["b"], e["label"])
        X.append(extract_features(pair, store, items, cfg).values)
        y.append(e["label"])
    return np.array(X), labels_to_array(y)


def _bounded_k_nn(k_nn, y, folds):
    # the smallest cross-validation train fold caps the neighbor count
    import math

    worst_hold = sum(
        math.ceil(int(c) / folds) for c in np.unique(y, return_counts=True)[1]
    )
    return max(1, min(k_nn, len(y) - worst_hold))


def cmd_train(args):
    store = TrackStore(_store_path(args))
    X, y = _features_from_labels(args, store)
    params = {}
    if args.kind == "ffnn":
        params = {"hidden": args.hidden, "epochs": args.epochs}
    elif args.kind == "logistic":
        params = {"epochs": args.epochs}
    elif args.kind == "knn":
        params = {"k_nn": _bounded_k_nn(args.k_nn, y, args.folds)}
    report = cross_validate(X, y, args.kind, folds=args.folds, seed=args.seed, **params)
    save_model(report.model, args.model_out)
    print(f"{args.kind}: cv auc={report.auc:.4f}  model saved to {args.model_out}")
    return 0


def cmd_evaluate(args):
    store = TrackStore(_store_path(args))
    X, y = _features_from_labels(args, store)
    reports = [
        cross_validate(X, y, "logistic", folds=args.folds, seed=args.seed, epochs=args.epochs),
        cross_validate(
            X, y, "ffnn", folds=args.folds, seed=args.seed, hidden=args.hidden, epochs=args.epochs
        ),
        cross_validate(
            X, y, "knn", folds=args.folds, seed=args.seed,
            k_nn=_bounded_k_nn(args.k_nn, y, args.folds),
        ),
    ]
    rows = reporting.evaluate_models(reports, outdir=args.outdir)
    print(f"{'model':<10} {'auc':>7}  folds")
    for row in rows:
        print(f"{row['kind']:<10} {row['auc']:>7.4f}  {row['fold_aucs']}")
    if args.outdir:
        print(f"report written to {args.outdir}/model_aucs.csv and model_aucs.png")
    return 0


def cmd_bench_compression(args):
    budgets = _parse_budgets(args.hinges)
    rng = np.random.default_rng(args.seed)
    n = args.length
    t = np.arange(n, dtype=float)
    base = (
        np.sin(2 * np.pi * t / (0.9 * n))
        + 0.5 * np.sin(2 * np.pi * t / (0.31 * n) + 1.0)
        + 0.8 * np.clip((t - 0.55 * n) / (0.2 * n), 0, 1)
    )
    for peak in (int(0.3 * n), int(0.75 * n)):
        width = max(4, n // 400)
        lo, hi = peak - width, peak + width
        base[lo : hi + 1] += 3.0 * (1 - np.abs(t[lo : hi + 1] - peak) / width)
    drift = 0.2 * np.sin(2 * np.pi * t / (0.45 * n) + 2.0)
    from .model import ChannelSeries, build_track
    from .analysis import SYNTH_KEY

    mk = lambda tid, v: build_track(tid, SYNTH_KEY, 0.0, [ChannelSeries("carrier_power", t, v)])
    a = mk("bench-a", base + 0.002 * rng.normal(size=n))
    b = mk("bench-b", base + drift + 0.002 * rng.normal(size=n))
    items = MonitorItemSet(items=("carrier_power",))
    rows = reporting.bench_compression(a, b, budgets, items, MetricConfig(), outdir=args.outdir)
    print(f"{'budget':>6} {'ratio':>8} {'ss_raw':>8} {'ss_comp':>8} {'pc_raw':>8} {'pc_comp':>8}")
    for r in rows:
        print(
            f"{r['budget']:>6} {r['ratio']:>8.1f} {r['ss_raw']:>8.4f} {r['ss_compressed']:>8.4f} "
            f"{r['pc_raw']:>8.4f} {r['pc_compressed']:>8.4f}"
        )
    if args.outdir:
        print(f"report written to {args.outdir}/")
    return 0


def cmd_serve(args):
    serve(
        ServiceConfig(
            host=args.host,
            port=args.port,
            store_path=_store_path(args),
            default_topk=args.default_topk,
        )
    )
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="trackdiff", description=__doc__)
    p.add_argument("--store", help="store directory (default: $TRACKDIFF_STORE or ./track_store)")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        sp = sub.add_parser(name, **kwargs)
        sp.set_defaults(fn=fn)
        return sp

    sp = add("ingest-batch", cmd_ingest_batch, help="ingest a directory of CSV tracks")
    sp.add_argument("path")
    sp.add_argument("--budget", type=int, default=20, help="hinge points per channel")
    sp.add_argument("--keep-raw", action="store_true", help="retain raw sample sidecars")

    sp = add("ingest-stream", cmd_ingest_stream, help="ingest ndjson records from stdin or TCP")
    sp.add_argument("--listen", metavar="HOST:PORT", help="accept TCP stream connections")
    sp.add_argument("--max-connections", type=int, default=None)
    sp.add_argument("--budget", type=int, default=20)
    sp.add_argument("--keep-raw", action="store_true")

    for name, fn, ids in (
        ("compare", cmd_compare, ("a", "b")),
        ("statdiff", cmd_statdiff, ("a", "b")),
    ):
        sp = add(name, fn, help=f"{name} two stored tracks")
        for i in ids:
            sp.add_argument(i)
        sp.add_argument("--items", nargs="+", help="channel names (default: 7 monitor items)")
        sp.add_argument("--json", action="store_true")
        if name == "compare":
            sp.add_argument("--k", type=float, default=None, help="calibration factor in [2,10]")

    sp = add("topk", cmd_topk, help="rank similar same-type tracks")
    sp.add_argument("target")
    sp.add_argument("--k", type=int, default=10)
    sp.add_argument("--items", nargs="+")
    sp.add_argument("--json", action="store_true")

    sp = add("anomalies", cmd_anomalies, help="flag deviations from a reference track")
    sp.add_argument("target")
    sp.add_argument("reference")
    sp.add_argument("--threshold-z", type=float, default=3.0)
    sp.add_argument("--min-run", type=int, default=5)
    sp.add_argument("--items", nargs="+")
    sp.add_argument("--json", action="store_true")

    sp = add("synth", cmd_synth, help="store labeled synthetic track pairs")
    sp.add_argument("--pairs", type=int, default=10, help="pairs per label class")
    sp.add_argument("--length", type=int, default=2000)
    sp.add_argument("--snr", type=float, default=10.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--budget", type=int, default=20)
    sp.add_argument("--labels", help="labels.json path (default: <store>/labels.json)")

    sp = add("train", cmd_train, help="train a classifier from labeled pairs")
    sp.add_argument("--labels", required=True)
    sp.add_argument("--kind", choices=("logistic", "ffnn", "knn"), default="ffnn")
    sp.add_argument("--model-out", required=True)
    sp.add_argument("--folds", type=int, default=5)
    sp.add_argument("--epochs", type=int, default=800)
    sp.add_argument("--hidden", type=int, default=16)
    sp.add_argument("--k-nn", type=int, default=5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--items", nargs="+")

    sp = add("evaluate", cmd_evaluate, help="cross-validate all classifiers")
    sp.add_argument("--labels", required=True)
    sp.add_argument("--folds", type=int, default=5)
    sp.add_argument("--epochs", type=int, default=800)
    sp.add_argument("--hidden", type=int, default=16)
    sp.add_argument("--k-nn", type=int, default=5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--items", nargs="+")
    sp.add_argument("--outdir", help="write CSV + figures here")

    sp = add("bench-compression", cmd_bench_compression, help="hinge budget fidelity sweep")
    sp.add_argument("--hinges", default="5..30", help="'5..30', '5..30:5', or '5,10,20'")
    sp.add_argument("--length", type=int, default=20000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--outdir", help="write CSV + figures here")

    sp = add("serve", cmd_serve, help="run the HTTP query service")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8765)
    sp.add_argument("--default-topk", type=int, default=10)

    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except TrackdiffError as exc:
        print(f"trackdiff: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
