"""Closed-form operation counts for OFDM and SEFDM signal generation."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class OpCount:
    label: str
    count: float

    def __post_init__(self):
        if not self.count >= 0 or math.isinf(self.count):
            raise ValueError(f"operation count must be finite and non-negative, got {self.count}")


def _length(q: int, alpha: float, use_dft_size: bool) -> float:
    if q < 1:
        raise ValueError("Q must be a positive integer")
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    # M = round(Q / alpha) with halves rounded up, as the modulator does
    return float(math.floor(q / alpha + 0.5)) if use_dft_size else q / alpha


def ops_ofdm(q: int) -> OpCount:
    if q < 1:
        raise ValueError("Q must be a positive integer")
    return OpCount("ofdm", q * math.log2(q))


def ops_sefdm(q: int, alpha: float, use_dft_size: bool = False) -> OpCount:
    """``L log2 L`` with ``L = Q / alpha`` (or the integer IDFT size when ``use_dft_size``)."""
    n = _length(q, alpha, use_dft_size)
    return OpCount("sefdm", n * math.log2(n))


def ops_sefdm_pruned(q: int, alpha: float, use_dft_size: bool = False) -> OpCount:
    """Pruned transform: only Q of the ``Q / alpha`` outputs are computed, ``(Q / alpha) log2 Q``."""
    n = _length(q, alpha, use_dft_size)
    return OpCount("sefdm-pruned", n * math.log2(q))


def complexity_rows(q: int, alphas, use_dft_size: bool = False) -> list[tuple[float, str, float]]:
    """``(alpha, scheme, count)`` for every alpha and the three schemes."""
    rows = []
    for a in alphas:
        for op in (ops_ofdm(q), ops_sefdm(q, a, use_dft_size), ops_sefdm_pruned(q, a, use_dft_size)):
            rows.append((float(a), op.label, op.count))
    return rows
