"""SEFDM/OFDM modem: symbol generation, demodulation and the ICI correlation model.

All transforms accept a single symbol vector of shape ``(N,)`` or a batch of
shape ``(..., N)``; the last axis is always the sub-carrier (or sample) axis.

The realized compression factor is ``Q / M`` with ``M = round(Q / alpha)``.
Every operation here uses that effective value so that transmitter, receiver
and detectors share the same ICI model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np


@dataclass(frozen=True)
class SefdmConfig:
    """Waveform parameters for one SEFDM (or OFDM, ``bcf=1``) symbol.

    ``oversampling`` may be any rational (e.g. ``Fraction(16, 13)`` for the
    802.11a layout); ``n_subcarriers * oversampling`` must be an integer.
    """

    n_subcarriers: int
    oversampling: Fraction = Fraction(2)
    bcf: float = 1.0
    sample_rate: float = 20e6
    n_samples: int = field(init=False)
    dft_size: int = field(init=False)

    def __post_init__(self):
        if self.n_subcarriers < 1:
            raise ValueError(f"n_subcarriers must be positive, got {self.n_subcarriers}")
        rho = Fraction(self.oversampling).limit_denominator(10_000)
        if rho <= 0:
            raise ValueError(f"oversampling must be positive, got {self.oversampling}")
        q = rho * self.n_subcarriers
        if q.denominator != 1:
            raise ValueError(
                f"oversampling {rho} x {self.n_subcarriers} sub-carriers is not an integer sample count"
            )
        if not 0.0 < self.bcf <= 1.0:
            raise ValueError(f"bcf must lie in (0, 1], got {self.bcf}")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "oversampling", rho)
        object.__setattr__(self, "n_samples", int(q))
        # round-half-up; Python's round() would send 0.5 to the even side
        object.__setattr__(self, "dft_size", int(np.floor(int(q) / self.bcf + 0.5)))

    @property
    def effective_bcf(self) -> float:
        return self.n_samples / self.dft_size

    @property
    def symbol_duration(self) -> float:
        return self.n_samples / self.sample_rate

    @property
    def subcarrier_spacing(self) -> float:
        return self.effective_bcf / self.symbol_duration

    def with_bcf(self, bcf: float) -> "SefdmConfig":
        return SefdmConfig(self.n_subcarriers, self.oversampling, bcf, self.sample_rate)


@dataclass(frozen=True)
class Constellation:
    """Unit-energy constellation with a Gray bit label per point.

    ``bits[i]`` is the label of ``points[i]``; the point order also defines
    the tie-breaking order used by :meth:`nearest`.
    """

    label: str
    points: np.ndarray
    bits: np.ndarray

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def bits_per_symbol(self) -> int:
        return self.bits.shape[1]

    def nearest(self, v) -> np.ndarray:
        """Index of the closest point for every entry of ``v`` (lowest index on ties)."""
        v = np.asarray(v)
        d = np.abs(v[..., None] - self.points)
        return np.argmin(d, axis=-1)

    def map_bits(self, bits) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.int64)
        b = self.bits_per_symbol
        if bits.shape[-1] % b:
            raise ValueError(f"bit count {bits.shape[-1]} is not a multiple of {b}")
        groups = bits.reshape(bits.shape[:-1] + (-1, b))
        weights = 1 << np.arange(b - 1, -1, -1)
        return self.points[self._index_of_value[groups @ weights]]

    def indices_to_bits(self, idx) -> np.ndarray:
        idx = np.asarray(idx)
        out = self.bits[idx]
        return out.reshape(idx.shape[:-1] + (-1,)) if idx.ndim else out

    def demap(self, v) -> np.ndarray:
        """Hard decision followed by Gray demapping; returns a flat bit array per vector."""
        return self.indices_to_bits(self.nearest(v))

    @property
    def _index_of_value(self) -> np.ndarray:
        weights = 1 << np.arange(self.bits_per_symbol - 1, -1, -1)
        lut = np.empty(self.size, dtype=np.int64)
        lut[self.bits @ weights] = np.arange(self.size)
        return lut


_S = 1 / np.sqrt(2)
QPSK = Constellation(
    "QPSK",
    np.array([_S + 1j * _S, -_S + 1j * _S, -_S - 1j * _S, _S - 1j * _S]),
    np.array([[0, 0], [0, 1], [1, 1], [1, 0]]),
)
BPSK = Constellation("BPSK", np.array([1.0 + 0j, -1.0 + 0j]), np.array([[0], [1]]))
CONSTELLATIONS = {"QPSK": QPSK, "BPSK": BPSK}


def random_symbols(rng: np.random.Generator, shape, const: Constellation = QPSK):
    """Draw uniform constellation symbols; returns ``(symbols, indices)``."""
    idx = rng.integers(0, const.size, size=shape)
    return const.points[idx], idx


def _check_len(x, n, what):
    x = np.asarray(x, dtype=complex)
    if x.shape[-1:] != (n,):
        raise ValueError(f"{what} must have length {n} on its last axis, got shape {x.shape}")
    return x


def subcarrier_matrix(cfg: SefdmConfig, alpha: float | None = None) -> np.ndarray:
    """Q x N matrix with entries ``exp(j 2 pi n k alpha / Q) / sqrt(Q)``."""
    a = cfg.effective_bcf if alpha is None else alpha
    q, n = cfg.n_samples, cfg.n_subcarriers
    # integer product first, reduced modulo Q/a would lose exactness for non-integer a
    phase = np.outer(np.arange(q), np.arange(n)).astype(float) * (a / q)
    return np.exp(2j * np.pi * phase) / np.sqrt(q)


def modulate_direct(cfg: SefdmConfig, s, alpha: float | None = None) -> np.ndarray:
    """Reference O(NQ) modulator: ``X = F s``. Uses the effective BCF unless ``alpha`` is given."""
    s = _check_len(s, cfg.n_subcarriers, "symbol vector")
    return s @ subcarrier_matrix(cfg, alpha).T


def modulate(cfg: SefdmConfig, s) -> np.ndarray:
    """Zero-padded M-point IDFT, truncated to Q samples and scaled to the 1/sqrt(Q) convention."""
    s = _check_len(s, cfg.n_subcarriers, "symbol vector")
    m, q = cfg.dft_size, cfg.n_samples
    # np.fft.ifft carries 1/M; the target scale is 1/sqrt(Q)
    x = np.fft.ifft(s, n=m, axis=-1)[..., :q]
    return x * (m / np.sqrt(q))


def demodulate(cfg: SefdmConfig, y) -> np.ndarray:
    """Conjugate sub-carrier projection ``R = F^H y`` via a zero-padded M-point DFT."""
    y = _check_len(y, cfg.n_samples, "sample vector")
    r = np.fft.fft(y, n=cfg.dft_size, axis=-1)[..., : cfg.n_subcarriers]
    return r / np.sqrt(cfg.n_samples)


def correlation_matrix(cfg: SefdmConfig, alpha: float | None = None) -> np.ndarray:
    """``C = F^H F``, built from the closed-form geometric sum so the diagonal is exactly 1."""
    a = cfg.effective_bcf if alpha is None else alpha
    q, n = cfg.n_samples, cfg.n_subcarriers
    # C[m, n] = g(n - m) with g(d) = (1/Q) sum_k exp(j 2 pi d k a / Q); g(-d) = conj(g(d))
    g = np.exp(2j * np.pi * np.outer(np.arange(n), np.arange(q)) * (a / q)).sum(axis=1) / q
    g[0] = 1.0
    d = np.subtract.outer(np.arange(n), np.arange(n))  # m - n
    return np.where(d <= 0, g[np.abs(d)], g[np.abs(d)].conj())


def power_decomposition(cfg: SefdmConfig, s, k: int, alpha: float | None = None):
    """Split ``|X_k|^2`` into its signal term and inter-carrier interference term."""
    s = _check_len(s, cfg.n_subcarriers, "symbol vector")
    if s.ndim != 1:
        raise ValueError("power_decomposition takes a single symbol vector")
    if not 0 <= k < cfg.n_samples:
        raise IndexError(f"sample index {k} outside [0, {cfg.n_samples})")
    a = cfg.effective_bcf if alpha is None else alpha
    q = cfg.n_samples
    signal = float(np.sum(np.abs(s) ** 2) / q)
    n = np.arange(len(s))
    ph = np.exp(2j * np.pi * np.subtract.outer(n, n) * k * a / q)
    cross = np.outer(s, s.conj()) * ph
    np.fill_diagonal(cross, 0)
    # the off-diagonal double sum is real: terms pair up as conjugates
    ici = float(np.real(cross.sum()) / q)
    return signal, ici


def energy_decomposition(cfg: SefdmConfig, s, alpha: float | None = None):
    """Symbol energy ``sum_k |X_k|^2 = s^H C s`` split into ``s^H s`` and the ICI part ``s^H (C - I) s``.

    Per sample the cross terms are nonzero even for OFDM (the envelope
    fluctuates); summed over the symbol they cancel exactly when ``alpha = 1``.
    """
    s = _check_len(s, cfg.n_subcarriers, "symbol vector")
    C = correlation_matrix(cfg, alpha)
    signal = float(np.real(np.vdot(s, s)))
    off = C - np.eye(len(C))
    ici = float(np.real(np.vdot(s, off @ s)))
    return signal, ici
