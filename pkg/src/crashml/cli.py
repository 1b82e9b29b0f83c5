"""Command-line entry point: ``crashml {synth,cluster,rebalance,run,rank,eval}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pipeline, ranking
from .dataset import generate_synthetic, planted_plan, read_csv, save_csv
from .errors import CrashMLError
from .pipeline import RunConfig, StageError, stage
from .resample import ResamplePlan, rebalance
from .seeding import resolve_seed, subseed
from .spatial import cluster_dataset

PLANS = {"none": lambda: (), "planted": planted_plan}


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def cmd_synth(args) -> int:
    with stage("synth"):
        ds = generate_synthetic(args.n, args.rate, PLANS[args.plan](), resolve_seed(args.seed), args.blobs)
    with stage("write"):
        save_csv(ds, args.output)
    c = ds.class_counts()
    print(f"wrote {len(ds)} records: fatal={c['fatal']} not_fatal={c['not_fatal']}")
    return 0


def cmd_cluster(args) -> int:
    with stage("read"):
        ds = read_csv(args.input)
    with stage("cluster"):
        ds, model = cluster_dataset(ds, args.k, resolve_seed(args.seed))
    with stage("write"):
        save_csv(ds, args.output)
        if args.centroids:
            _write(Path(args.centroids), json.dumps(model.to_dict(), indent=2) + "\n")
    print(f"assigned {int(ds.has_location.sum())} located records to {model.k} clusters")
    return 0


def cmd_rebalance(args) -> int:
    with stage("read"):
        ds = read_csv(args.input)
    with stage("rebalance"):
        plan = ResamplePlan(args.smote_percent, args.k, args.majority_frac, resolve_seed(args.seed))
        out = rebalance(ds, plan)
    with stage("write"):
        save_csv(out, args.output)
    c = out.class_counts()
    print(f"wrote {len(out)} records: fatal={c['fatal']} not_fatal={c['not_fatal']}")
    return 0


def _config(args) -> RunConfig:
    with stage("config"):
        base = RunConfig.load(args.config) if args.config else RunConfig()
        return base.override(
            seed=args.seed,
            model=getattr(args, "model", None),
            threads=getattr(args, "threads", None),
            folds=args.folds,
            n_bags=getattr(args, "n_bags", None),
            k_clusters=getattr(args, "k_clusters", None),
            alpha=args.alpha,
            test_fraction=getattr(args, "test_fraction", None),
            input=args.input,
            out_dir=args.out_dir,
        )


def cmd_run(args) -> int:
    config = _config(args)
    with stage("read"):
        ds = read_csv(config.input)
    result = pipeline.run(ds, config)
    with stage("write"):
        paths = result.write(config.out_dir)
    for name, report in result.validation.items():
        print(f"validation {name:5s} f1={report.f1:.4f} auc_pr={report.auc_pr:.4f} "
              f"kappa={report.kappa:.4f} ({report.kappa_band})")
    t = result.test
    print(f"test       {config.model:5s} f1={t.f1:.4f} auc_pr={t.auc_pr:.4f} "
          f"kappa={t.kappa:.4f} ({t.kappa_band}) baseline={t.pr_baseline:.4f} n_test={result.n_test}")
    for p in paths.values():
        print(f"wrote {p}")
    return 0


def cmd_rank(args) -> int:
    config = _config(args)
    with stage("read"):
        ds = read_csv(config.input)
    with stage("rank"):
        ranked = ranking.rank_attributes(ds, config.folds, config.alpha, subseed(config.root_seed, "rank"))
    with stage("write"):
        out = Path(config.out_dir)
        _write(out / pipeline.ARTIFACTS["ranking"], ranking.ranking_csv(ranked))
        _write(out / pipeline.ARTIFACTS["ranking_json"], ranking.ranking_json(ranked))
    for a in ranked:
        flag = "significant" if a.significant else "-"
        print(f"{a.rank:2d} {a.name:24s} chi2={a.chi2:10.3f} df={a.df:2d} critical={a.critical:8.3f} {flag}")
    return 0


def cmd_eval(args) -> int:
    with stage("read"):
        model_text = Path(args.model).read_text(encoding="utf-8")
        ds = read_csv(args.input)
    with stage("evaluate"):
        report, curve = pipeline.evaluate_saved(model_text, ds)
    with stage("write"):
        out = Path(args.out_dir)
        doc = {"n_test": len(ds), "test": report.to_dict()}
        _write(out / pipeline.ARTIFACTS["metrics"], json.dumps(doc, indent=2) + "\n")
        _write(out / pipeline.ARTIFACTS["pr_curve"], curve.to_csv())
    print(f"f1={report.f1:.4f} auc_pr={report.auc_pr:.4f} kappa={report.kappa:.4f} ({report.kappa_band})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crashml", description="Fatal crash classification pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic crash CSV")
    p.add_argument("output")
    p.add_argument("--n", type=int, default=8482)
    p.add_argument("--rate", type=float, default=0.05, help="fatal fraction")
    p.add_argument("--seed", type=int)
    p.add_argument("--plan", choices=sorted(PLANS), default="planted")
    p.add_argument("--blobs", type=int, default=10, help="number of location hot spots")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("cluster", help="assign spatial cluster IDs by k-means")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--seed", type=int)
    p.add_argument("--centroids", help="optional JSON file for the fitted centroids")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("rebalance", help="SMOTE the fatal class and under-sample the rest")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--smote-percent", type=float, default=100.0)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--majority-frac", type=float, default=0.83)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_rebalance)

    for name, func, help_ in (("run", cmd_run, "split, cross-validate, train, test and rank"),
                              ("rank", cmd_rank, "chi-squared attribute ranking")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("input", nargs="?")
        p.add_argument("--config", help="JSON run configuration; flags override it")
        p.add_argument("--seed", type=int)
        p.add_argument("--folds", type=int)
        p.add_argument("--alpha", type=float)
        p.add_argument("--out-dir")
        if name == "run":
            p.add_argument("--model", choices=("smo", "bag", "vote"))
            p.add_argument("--threads", type=int)
            p.add_argument("--n-bags", type=int)
            p.add_argument("--k-clusters", type=int)
            p.add_argument("--test-fraction", type=float)
        p.set_defaults(func=func)

    p = sub.add_parser("eval", help="score a saved model on a CSV")
    p.add_argument("model")
    p.add_argument("input")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "input", "") is None and not getattr(args, "config", None):
            raise StageError("config", ValueError("an input CSV is required"))
        return args.func(args)
    except StageError as exc:
        print(f"crashml {args.command}: stage {exc.stage} failed: {exc.cause}", file=sys.stderr)
        return 2
    except CrashMLError as exc:
        print(f"crashml {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
