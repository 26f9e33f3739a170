"""Print family and region importance shares from a finished run's importance.csv.

    python3 scripts/importance_rollup.py runs/demo/multilabel
"""
import argparse
from pathlib import Path

from hmdpose.evaluation import fold_family_shares, read_importance_csv, rollup_importance


def _table(title, shares):
    groups = sorted({g for v in shares.values() for g in v})
    print(f"\n{title}")
    print(f"{'label':<12}" + "".join(f"{g:>15}" for g in groups))
    for lab, v in shares.items():
        print(f"{lab:<12}" + "".join(f"{v.get(g, 0.0):>15.3f}" for g in groups))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("run_dir")
    ap.add_argument("--min-folds", type=int, default=2, help="stability filter")
    ap.add_argument("--per-fold", action="store_true", help="also print unfiltered per-fold family shares")
    args = ap.parse_args()
    recs = read_importance_csv(Path(args.run_dir) / "importance.csv")
    for group in ("family", "region"):
        _table(f"{group} shares (positive in >= {args.min_folds} folds)",
               rollup_importance(recs, group, args.min_folds))
    if args.per_fold:
        for lab in sorted({r.label for r in recs}):
            _table(f"{lab}: per-fold family shares",
                   {f"fold {k}": v for k, v in fold_family_shares(recs, lab).items()})


if __name__ == "__main__":
    main()
