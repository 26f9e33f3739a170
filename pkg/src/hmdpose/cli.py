"""Command line entry point: ``hmdpose {extract,run,report,synth}``.

Exit codes: 0 ok, 2 input error, 3 degenerate data, 4 internal error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import yaml

from .config import TASKS, RunConfig
from .errors import DegenerateData, HMDError, InputError
from .experiments import RUNNERS, dump_json, extract_features
from .features import FeatureConfig
from .ingest import load_pose_dir

log = logging.getLogger("hmdpose")

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE, EXIT_INTERNAL = 0, 2, 3, 4


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def load_config(args) -> RunConfig:
    """Config file (if any) overlaid with the flags given on the command line."""
    data: dict = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise InputError(f"config file {path} does not exist")
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise InputError(f"config file {path} is not valid YAML: {exc}") from None
        if not isinstance(data, dict):
            raise InputError(f"config file {path} must hold a mapping")
    overrides = {
        "task": args.task, "features": args.features, "pose_dir": args.pose_dir,
        "output_dir": args.output_dir, "bundle_dir": args.bundle_dir, "k": args.k, "inner_k": args.inner_k,
        "seed": args.seed, "pooling": args.pooling, "comparator": args.comparator,
        "phenotype": args.phenotype, "condition": args.condition, "threshold_source": args.threshold_source,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    if args.labels:
        data["labels"] = _csv_list(args.labels)
    if args.importance:
        data["importance"] = {**data.get("importance", {}), "enabled": True}
    if args.max_control_fp is not None:
        thr = dict(data.get("threshold", {}))
        thr["constraints"] = {**thr.get("constraints", {}), "max_control_fp": args.max_control_fp}
        data["threshold"] = thr
    if args.alpha is not None:
        data["threshold"] = {**data.get("threshold", {}), "alpha": args.alpha}
    if args.no_bundles:
        data["save_bundles"] = False
    try:
        return RunConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid configuration: {exc}") from None


def cmd_extract(args) -> int:
    fcfg = FeatureConfig(ddof=args.ddof, detrend_fft=args.detrend_fft)
    series = load_pose_dir(args.pose_dir, pattern=args.pattern)
    paths = extract_features(series, args.out, fcfg, {"pose_dir": Path(args.pose_dir).name})
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args)
    runner = RUNNERS.get(cfg.task)
    if runner is None:
        raise InputError(f"task {cfg.task!r} has no runner")
    res = runner(cfg)
    out = Path(cfg.output_dir)
    summary = res.get("metrics", {}).get("summary") if isinstance(res.get("metrics"), dict) else None
    if summary:
        for key, v in sorted(summary.items()):
            if isinstance(v, dict) and v.get("mean") is not None:
                print(f"{key}: {v['mean']:.4f} +/- {v['std']:.4f}")
    print(f"wrote {len(res['manifest']['artifacts'])} artifacts to {out}")
    return EXIT_OK


# ---------------------------------------------------------------- report

def _write_rows(path: Path, header, rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def _share_matrix(path: Path, shares: dict) -> Path:
    """label x group matrix with zeros for absent groups."""
    groups = sorted({g for per in shares.values() for g in per})
    rows = [[lab] + [repr(float(shares[lab].get(g, 0.0))) for g in groups] for lab in sorted(shares)]
    return _write_rows(path, ["label", *groups], rows)


def build_report(run_dir, out_dir=None) -> list[Path]:
    run = Path(run_dir)
    if not run.is_dir() or not any(run.iterdir()):
        raise InputError(f"run directory {run} is missing or empty")
    out = Path(out_dir) if out_dir else run / "report"
    sources = {name: run / name for name in ("confusion.json", "rollups.json", "metrics.json")}
    if not any(p.exists() for p in sources.values()):
        raise InputError(f"{run} holds no run reports (confusion.json, rollups.json or metrics.json)")
    out.mkdir(parents=True, exist_ok=True)
    written = []
    config_hash = None
    if sources["confusion.json"].exists():
        conf = json.loads(sources["confusion.json"].read_text(encoding="utf-8"))
        config_hash = conf.pop("config_hash", None)
        rows = [[lab, c["TP"], c["FN"], c["FP"], c["TN"], c["control_fp"]] for lab, c in sorted(conf.items())]
        written.append(_write_rows(out / "confusion_bars.csv",
                                   ["label", "TP", "FN", "FP", "TN", "control_fp"], rows))
    if sources["rollups.json"].exists():
        doc = json.loads(sources["rollups.json"].read_text(encoding="utf-8"))
        config_hash = config_hash or doc.get("config_hash")
        for group, shares in sorted(doc.get("rollups", {}).items()):
            written.append(_share_matrix(out / f"{group}_shares.csv", shares))
        rows = [[lab, fold, fam, repr(float(v))]
                for lab, per in sorted(doc.get("fold_family_shares", {}).items())
                for fold, fams in sorted(per.items(), key=lambda kv: int(kv[0]))
                for fam, v in sorted(fams.items())]
        written.append(_write_rows(out / "fold_family_shares.csv", ["label", "fold", "family", "share"], rows))
    if sources["metrics.json"].exists():
        m = json.loads(sources["metrics.json"].read_text(encoding="utf-8"))
        config_hash = config_hash or m.get("config_hash")
        summary = m.get("summary")
        if isinstance(summary, dict):
            rows = [[k, v.get("mean"), v.get("std")] for k, v in sorted(summary.items()) if isinstance(v, dict)]
            written.append(_write_rows(out / "summary.csv", ["metric", "mean", "std"], rows))
    index = {"run_dir": run.name, "files": sorted(p.name for p in written)}
    written.append(dump_json(out / "report.json", index, config_hash))
    return written


def cmd_report(args) -> int:
    for p in build_report(args.run_dir, args.out):
        print(p)
    return EXIT_OK


def cmd_synth(args) -> int:
    data: dict = {"task": "synth", "output_dir": args.out, "seed": args.seed}
    synth = {}
    if args.config:
        raw = yaml.safe_load(Path(args.config).read_text(encoding="utf-8")) or {}
        synth.update(raw.get("synth", raw))
    for key, val in (("n_patients", args.n_patients), ("n_controls", args.n_controls),
                     ("windows_per_subject", args.windows), ("seed", args.seed)):
        if val is not None:
            synth[key] = val
    data["synth"] = synth
    cfg = RunConfig.from_dict({k: v for k, v in data.items() if v is not None})
    res = RUNNERS["synth"](cfg)
    print(f"wrote {len(res['manifest']['artifacts'])} artifacts to {cfg.output_dir}")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hmdpose", description="Kinematic phenotyping from pose keypoints")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("extract", help="keypoint CSVs -> window feature CSV")
    ex.add_argument("--pose-dir", required=True)
    ex.add_argument("--out", required=True, help="feature CSV path")
    ex.add_argument("--pattern", default="*.csv")
    ex.add_argument("--ddof", type=int, default=0)
    ex.add_argument("--detrend-fft", action="store_true")
    ex.set_defaults(func=cmd_extract)

    run = sub.add_parser("run", help="run a configured task")
    run.add_argument("--config", help="YAML run configuration")
    run.add_argument("--task", choices=TASKS)
    run.add_argument("--features")
    run.add_argument("--pose-dir")
    run.add_argument("--output-dir")
    run.add_argument("--bundle-dir")
    run.add_argument("--k", type=int)
    run.add_argument("--inner-k", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--pooling")
    run.add_argument("--comparator")
    run.add_argument("--labels", help="comma-separated phenotype mask")
    run.add_argument("--phenotype")
    run.add_argument("--condition")
    run.add_argument("--threshold-source", choices=("oof", "in_sample"))
    run.add_argument("--alpha", type=float)
    run.add_argument("--max-control-fp", type=int)
    run.add_argument("--importance", action="store_true", help="also compute permutation importance")
    run.add_argument("--no-bundles", action="store_true")
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="plot-ready tables from a finished run")
    rep.add_argument("run_dir")
    rep.add_argument("--out")
    rep.set_defaults(func=cmd_report)

    syn = sub.add_parser("synth", help="write a synthetic cohort with features")
    syn.add_argument("--out", required=True)
    syn.add_argument("--config", help="YAML with cohort keys (optionally under 'synth')")
    syn.add_argument("--seed", type=int)
    syn.add_argument("--n-patients", type=int)
    syn.add_argument("--n-controls", type=int)
    syn.add_argument("--windows", type=int, help="windows per subject")
    syn.set_defaults(func=cmd_synth)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DegenerateData as exc:
        print(f"degenerate data: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except HMDError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - top-level guard maps everything else to exit 4
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
