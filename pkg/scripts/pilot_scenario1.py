"""Pilot run behind the Scenario-I flat-floor band: BER(50 dB) / BER(30 dB) over several seeds."""

import argparse

import numpy as np

from wds.harness import ExperimentConfig, run_ber_sweep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--trials", type=int, default=10)
    args = ap.parse_args()
    ratios = []
    for seed in range(args.seeds):
        cfg = ExperimentConfig(receiver="eve1", es_n0_db=(30.0, 50.0), trials=args.trials,
                               max_trials=args.trials, seed=seed)
        lo, hi = run_ber_sweep(cfg)[0].column("metric")
        ratios.append(hi / lo)
        print(f"seed {seed}: BER 30 dB {lo:.4f}  50 dB {hi:.4f}  ratio {hi / lo:.3f}")
    print(f"ratio range [{min(ratios):.3f}, {max(ratios):.3f}], mean {np.mean(ratios):.3f}")


if __name__ == "__main__":
    main()
