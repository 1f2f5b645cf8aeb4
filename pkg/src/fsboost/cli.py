"""Command-line runner: generate, train, eval, sweep."""
import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .boosting import OPTIMIZERS, BoostConfig, write_trace
from .data import generate_synthetic, make_folds
from .errors import FsBoostError
from .evaluation import KSHOT_MODES, VARIANTS, Ablation, evaluate_fold, evaluate_fold_sweep
from .io import read_folds, read_manifest, read_params, write_dataset, write_folds, write_params
from .metrics import CSV_FIELDS, crossval_report, score_rows, write_csv
from .presets import PRESETS
from .training import TrainConfig, train_head

log = logging.getLogger("fsboost")

VARIANT_HELP = """ablation variants (--variant NAME is shorthand for the two flags):
  B          --no-use-relevance --no-use-boosting   plain prototype cosine
  B+C1       --use-relevance    --no-use-boosting   relevance-weighted cosine
  B+C2       --no-use-relevance --use-boosting      guided ensemble only
  B+C1+C2    --use-relevance    --use-boosting      both
K-shot: --kshot-mode joint pools all supports into one class vector (Our-K-shot);
--kshot-mode average runs each support separately and averages (Average).
Paths given to --params may contain {fold}, e.g. heads/fold{fold}.fshp."""

SYNTH_FLAGS = {
    "d": int, "h": int, "w": int, "num_classes": int, "num_shared_dims": int, "stride": int,
    "noise_sigma": float, "prototype_scale": float, "offset_sigma": float, "context_sigma": float,
}


def _echo(args, skip=("out", "trace", "func", "params", "manifest", "folds", "loss_out")):
    """Config lines for CSV headers; output and input paths are left out so runs compare byte-for-byte."""
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    return [f"fsboost {args.command}", "config " + json.dumps(cfg, sort_keys=True)]


def _selected_folds(args):
    folds = read_folds(args.folds)
    if args.fold:
        wanted = set(args.fold)
        folds = [f for f in folds if f.fold_index in wanted]
        missing = wanted - {f.fold_index for f in folds}
        if missing:
            raise FsBoostError(f"{args.folds}: no fold(s) {sorted(missing)}")
    return folds


def _params_path(template, fold):
    return Path(str(template).replace("{fold}", str(fold)))


def _ablation(args):
    rel, boost = VARIANTS[args.variant] if args.variant else (True, True)
    if args.use_relevance is not None:
        rel = args.use_relevance
    if args.use_boosting is not None:
        boost = args.use_boosting
    return Ablation(rel, boost, args.kshot_mode)


def _boost(args):
    return BoostConfig(getattr(args, "num_experts", 1), args.step_size, args.optimizer)


def cmd_generate(args):
    base, epc = PRESETS[args.preset]
    overrides = {k: getattr(args, k) for k in SYNTH_FLAGS if getattr(args, k) is not None}
    config = dataclasses.replace(base, seed=args.seed, **overrides)
    epc = args.examples_per_class or epc
    dataset = generate_synthetic(config, epc)
    out = Path(args.out)
    manifest = write_dataset(out, dataset)
    folds = make_folds(range(config.num_classes), min(args.num_folds, config.num_classes))
    write_folds(out / "folds.json", folds)
    (out / "config.json").write_text(
        json.dumps({"synthetic": dataclasses.asdict(config), "examples_per_class": epc}, indent=1) + "\n",
        encoding="utf-8",
    )
    log.info("wrote %d examples to %s", len(dataset), manifest)


def cmd_train(args):
    dataset = read_manifest(args.manifest)
    config = TrainConfig(args.learning_rate, args.iterations, args.batch_size, args.seed, args.k, args.hidden)
    use_rel = True if args.use_relevance is None else args.use_relevance
    for split in _selected_folds(args):
        params, losses = train_head(dataset, split, config, use_rel)
        path = _params_path(args.out, split.fold_index)
        path.parent.mkdir(parents=True, exist_ok=True)
        write_params(path, params)
        loss_path = _params_path(args.loss_out, split.fold_index) if args.loss_out else path.with_suffix(".losses.csv")
        rows = [{"iteration": i, "loss": f"{v:.8f}"} for i, v in enumerate(losses)]
        write_csv(loss_path, rows, ["iteration", "loss"], _echo(args) + [f"fold {split.fold_index}"])
        log.info("fold %d: %d iterations, params -> %s", split.fold_index, len(losses), path)


def cmd_eval(args):
    dataset = read_manifest(args.manifest)
    ablation = _ablation(args)
    boost = _boost(args)
    rows, fold_mious, traces = [], [], []
    for split in _selected_folds(args):
        params = read_params(_params_path(args.params, split.fold_index))
        res = evaluate_fold(dataset, split, params, ablation, boost, args.k, args.episodes, args.seed, args.workers)
        rows.extend(score_rows(split.fold_index, res.scores.values()))
        fold_mious.append(res.miou)
        traces.extend(
            {"fold": split.fold_index, "episode": r.index, "class_id": r.class_id, "iou": r.iou, "experts": r.experts}
            for r in res.records
        )
        log.info("fold %d %s: mIoU %.4f", split.fold_index, ablation.name, res.miou)
    rows.append(_mean_row(crossval_report(fold_mious)))
    write_csv(args.out, rows, CSV_FIELDS, _echo(args) + [f"variant {ablation.name}"])
    if args.trace:
        write_trace(args.trace, traces)


def _mean_row(value, **extra):
    row = {k: "" for k in CSV_FIELDS}
    row.update(fold="mean", class_id="all", miou=f"{value:.6f}", **extra)
    return row


SWEEP_FIELDS = ["fold", "num_experts", "miou", "episode_mean_iou"]


def cmd_sweep(args):
    dataset = read_manifest(args.manifest)
    use_rel = True if args.use_relevance is None else args.use_relevance
    if args.variant:
        use_rel = VARIANTS[args.variant][0]
    boost = _boost(args)
    per_n = {n: [] for n in sorted(set(args.n_values))}
    rows = []
    traces = []
    for split in _selected_folds(args):
        params = read_params(_params_path(args.params, split.fold_index))
        results = evaluate_fold_sweep(dataset, split, params, use_rel, args.n_values, boost, args.k, args.episodes, args.seed)
        for n, res in results.items():
            per_n[n].append(res.miou)
            rows.append({
                "fold": split.fold_index, "num_experts": n, "miou": f"{res.miou:.6f}",
                "episode_mean_iou": f"{sum(r.iou for r in res.records) / len(res.records):.6f}",
            })
        top = results[max(results)]
        traces.extend({"fold": split.fold_index, "episode": r.index, "class_id": r.class_id, "experts": r.experts}
                      for r in top.records)
    for n, vals in per_n.items():
        rows.append({"fold": "mean", "num_experts": n, "miou": f"{crossval_report(vals):.6f}", "episode_mean_iou": ""})
    write_csv(args.out, rows, SWEEP_FIELDS, _echo(args))
    if args.trace:
        write_trace(args.trace, traces)


def _add_common(p, params=True):
    p.add_argument("--manifest", required=True, help="dataset manifest.json")
    p.add_argument("--folds", required=True, help="fold definitions (JSON)")
    p.add_argument("--fold", type=int, action="append", help="restrict to this fold index (repeatable)")
    p.add_argument("--k", type=int, default=1, help="supports per episode (default 1)")
    p.add_argument("--use-relevance", action=argparse.BooleanOptionalAction, default=None)
    if params:
        p.add_argument("--params", required=True, help="head parameters file; {fold} is substituted")


def _add_eval(p):
    _add_common(p)
    p.add_argument("--variant", choices=sorted(VARIANTS), help="named ablation (see below)")
    p.add_argument("--step-size", type=float, default=1e-2)
    p.add_argument("--optimizer", choices=OPTIMIZERS, default="adam")
    p.add_argument("--episodes", type=int, default=200, help="test episodes per fold (default 200)")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--trace", help="optional per-episode expert trace (JSON)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fsboost", description=__doc__, epilog=VARIANT_HELP, formatter_class=argparse.RawDescriptionHelpFormatter
    )
    parser.add_argument("--seed", type=int, default=0, help="single source of randomness (default 0)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset, manifest and folds")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--preset", choices=sorted(PRESETS), default="benchmark")
    g.add_argument("--examples-per-class", type=int)
    g.add_argument("--num-folds", type=int, default=4)
    for name, typ in SYNTH_FLAGS.items():
        g.add_argument("--" + name.replace("_", "-"), type=typ)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train the prediction head per fold")
    _add_common(t, params=False)
    t.add_argument("--iterations", type=int, default=2000)
    t.add_argument("--learning-rate", type=float, default=7e-3, help="SGD step (default 7e-3; the benchmark preset uses 0.1)")
    t.add_argument("--batch-size", type=int, default=8)
    t.add_argument("--hidden", type=int, default=128)
    t.add_argument("--out", required=True, help="params path; {fold} is substituted")
    t.add_argument("--loss-out", help="loss trace CSV path (default: next to params)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate one ablation variant", epilog=VARIANT_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_eval(e)
    e.add_argument("--num-experts", type=int, default=10)
    e.add_argument("--use-boosting", action=argparse.BooleanOptionalAction, default=None)
    e.add_argument("--kshot-mode", choices=KSHOT_MODES, default="joint")
    e.add_argument("--workers", type=int, default=1, help="episode worker processes (default 1)")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="boosted evaluation over several ensemble sizes")
    _add_eval(s)
    s.add_argument("--n-values", type=int, nargs="+", default=[1, 2, 5, 10, 20])
    s.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (FsBoostError, ValueError, OSError) as exc:
        print(f"fsboost: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
