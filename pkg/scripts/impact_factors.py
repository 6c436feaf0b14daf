"""Classifier accuracy against oversampling, BCF offset and dataset generation method."""

import argparse
from fractions import Fraction
from pathlib import Path

from wds.harness import ExperimentConfig, run_classifier_study

GRID = (-20.0, -10.0, 0.0, 10.0, 20.0, 30.0, 40.0, 50.0)


def study(out, name, **kw):
    cfg = ExperimentConfig(kind="classify", n_subcarriers=256, fading=True, es_n0_db=GRID, **kw)
    table, _, _ = run_classifier_study(cfg)
    table.name = f"classify_{name}"
    table.write(out)
    acc = " ".join(f"{v:.3f}" for v in table.column("metric"))
    print(f"{name:24s} {acc}   ({table.wall_time:.0f}s)", flush=True)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results/impact")
    ap.add_argument("--per-class", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    out = Path(args.out)
    common = dict(train_per_class=args.per_class, test_per_class=args.per_class * 2 // 5, seed=args.seed)

    print("study                    accuracy at Es/N0 = " + " ".join(f"{x:g}" for x in GRID))
    for rho in (8, 4, 2):
        study(out, f"type-iii_rho{rho}", pattern="type-iii", oversampling=Fraction(rho), **common)
    for p in ("type-i", "type-ii", "type-iii"):
        study(out, f"{p}_rho8", pattern=p, oversampling=Fraction(8), **common)
    for mode in ("DD", "DA"):
        study(out, f"type-i_rho2_{mode}", pattern="type-i", oversampling=Fraction(2), mode=mode, **common)


if __name__ == "__main__":
    main()
