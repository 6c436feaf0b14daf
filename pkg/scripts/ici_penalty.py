"""Why Type-III trails OFDM at low Es/N0 even with perfect interference cancellation.

The eigenvalues of C average to one, so by concavity sum log(1 + l_i g) falls
short of N log(1 + g). The printed ratio is the mutual-information fraction
kept by each BCF under Gaussian signalling.
"""

from fractions import Fraction

import numpy as np

from wds.patterns import get_pattern
from wds.sefdm import SefdmConfig, correlation_matrix


def main():
    base = SefdmConfig(52, Fraction(16, 13))
    print("alpha   lambda_min  " + "  ".join(f"{g:>6d}dB" for g in range(0, 13, 2)))
    for a in get_pattern("wlan-type-iii").alphas:
        lam = np.linalg.eigvalsh(correlation_matrix(base.with_bcf(a)))
        kept = []
        for g_db in range(0, 13, 2):
            g = 10 ** (g_db / 10)
            kept.append(np.sum(np.log2(1 + np.clip(lam, 0, None) * g)) / (len(lam) * np.log2(1 + g)))
        print(f"{a:5.3f}   {lam.min():10.2e}  " + "  ".join(f"{k:8.4f}" for k in kept))


if __name__ == "__main__":
    main()
