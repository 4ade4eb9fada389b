"""Command-line entry point: ``dsenlg <verb> ...``.

Verbs: ``run``, ``stats``, ``kappa``, ``list-datasets``, ``validate-config``.
Settings resolve as defaults, then flags, then the ``--config`` file (which
wins). Pipeline settings take ``--set section.key=value`` with sections
``dsen``, ``lgscm``, ``tree`` and ``pipeline``.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from . import experiment as ex


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI file; its values override flags")
    p.add_argument("--manifest", help="rerun exactly the configuration in this manifest.json")
    p.add_argument("--datasets", help="comma-separated names (looked up in --data-dir) or paths")
    p.add_argument("--data-dir", dest="data_dir")
    p.add_argument("--folds", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--output", help="parent directory for report bundles")
    p.add_argument("--methods", help="comma-separated subset of full,mifcm_only,none")
    p.add_argument("--workers", type=int, help="worker processes (default 1)")
    p.add_argument("--no-predictions", dest="keep_predictions", action="store_const",
                   const=False, help="skip the per-classifier prediction dump")
    p.add_argument("--K", dest="dsen.K", type=int, help="neighbors per envelope")
    p.add_argument("--L", dest="dsen.L", type=int, help="number of FCM layers")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="pipeline override, e.g. lgscm.d=10 (repeatable)")


def _resolve(args) -> ex.ExperimentConfig:
    if args.manifest:
        cfg = ex.config_from_manifest(args.manifest)
        if args.output:
            cfg = replace(cfg, output=args.output)
        return cfg
    flags = {k: v for k, v in vars(args).items()
             if k not in ("verb", "config", "manifest", "set", "verbose", "func", "bundle")}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep or "." not in key:
            raise ex.ConfigError(f"--set expects section.key=value, got {item!r}")
        flags[key.strip()] = ex._parse_value(value.strip())
    return ex.build_config(flags, args.config)


def cmd_run(args) -> int:
    cfg = _resolve(args)
    report = ex.run_experiment(cfg, args.bundle)
    print(f"bundle: {report.directory}")
    print(f"runs: {len(report.records)}  failed: {report.failures}")
    for row in ex.mean_table(report.records):
        print(f"  {row['dataset']:<28} {row['label']:<13} "
              + " ".join(f"{m}={float(row[m]):.4f}" for m in ex.evaluation.METRIC_NAMES))
    return 0 if report.ok else 1


def cmd_stats(args) -> int:
    out = ex.compute_stats(args.bundle, args.control, args.alpha)
    for metric, res in out["metrics"].items():
        fr = res["friedman"]
        print(f"{metric}: Friedman chi2={fr['statistic']:.4f} df={fr['df']} p={fr['p_value']:.4g}")
        for m, r in res["average_ranks"].items():
            print(f"  rank {r:.3f}  {m}")
        for h in res["holm"]:
            flag = "reject" if h["reject"] else "keep"
            print(f"  holm {h['method']:<12} p={h['p_value']:.4g} "
                  f"threshold={h['threshold']:.5f} {flag}")
    return 0


def cmd_kappa(args) -> int:
    rows = ex.kappa_report(args.bundle, args.dataset, args.method)
    if rows:
        mean_k = sum(r["kappa"] for r in rows) / len(rows)
        print(f"{len(rows)} classifier pairs, mean kappa {mean_k:.4f}")
    else:
        print("no classifier pairs")
    return 0


def cmd_list(args) -> int:
    for d in ex.describe_datasets(args.data_dir):
        if "error" in d:
            print(f"{d['name']:<28} unreadable: {d['error']}")
        else:
            print(f"{d['name']:<28} n={d['samples']:<5} s={d['features']:<3} "
                  f"min={d['minority']:<4} maj={d['majority']:<5} IR={d['ir']:.2f}")
    return 0


def cmd_validate(args) -> int:
    cfg = _resolve(args)
    ex.load_all(cfg)
    print(json.dumps(cfg.to_dict(), indent=1))
    print(f"config hash: {cfg.config_hash()}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dsenlg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="cross-validate every dataset x method")
    _add_experiment_flags(p)
    p.add_argument("--bundle", help="write here instead of <output>/<config hash>")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("stats", help="average ranks, Friedman and Holm tests")
    p.add_argument("bundle")
    p.add_argument("--control", default="full")
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("kappa", help="pairwise kappa vs pair-mean metrics")
    p.add_argument("bundle")
    p.add_argument("--dataset", required=True)
    p.add_argument("--method", default="full")
    p.set_defaults(func=cmd_kappa)

    p = sub.add_parser("list-datasets", help="describe the .dat files in a directory")
    p.add_argument("--data-dir", dest="data_dir", default=ex.default_data_dir())
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("validate-config", help="resolve, check and print a configuration")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ex.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
