"""BER of the legitimate receiver and both eavesdroppers on WLAN-Type-III frames.

    python3 scripts/wlan_security.py --out results/wlan --trials 10
"""

import argparse
from pathlib import Path

from wds.harness import ExperimentConfig, run_ber_sweep

GRID = (-20.0, -10.0, 0.0, 10.0, 20.0, 30.0, 40.0, 50.0)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results/wlan")
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    out = Path(args.out)
    curves = {}
    for rx in ("legit", "ofdm", "eve1", "eve2"):
        cfg = ExperimentConfig(receiver=rx, es_n0_db=GRID, trials=args.trials, max_trials=10 * args.trials,
                               seed=args.seed, workers=args.workers)
        table, _ = run_ber_sweep(cfg)
        table.write(out / rx)
        curves[rx] = table.column("metric")
        print(f"{rx:6s} done in {table.wall_time:.1f}s", flush=True)

    print("Es/N0  " + "  ".join(f"{k:>9s}" for k in curves))
    for i, x in enumerate(GRID):
        print(f"{x:5.0f}  " + "  ".join(f"{curves[k][i]:9.2e}" for k in curves))


if __name__ == "__main__":
    main()
