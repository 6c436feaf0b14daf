"""802.11a-shaped frames with a scheduled SEFDM/OFDM PSDU, and the three receive chains.

Sub-carrier layout: the 52 occupied logical bins ``-26..-1, 1..26`` are packed
onto SEFDM sub-carriers ``0..51`` in ascending order, so the same 52-carrier
modulator produces the preamble (``alpha = 1``) and every PSDU symbol. Each
PSDU symbol is a Q = 64 sample SEFDM symbol (``M = round(64 / alpha)``)
preceded by a 16-sample cyclic extension.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.signal import correlate

from .classify import ConfusionMatrix, EcocModel, extract_features
from .detect import detect_id
from .patterns import Schedule
from .sefdm import BPSK, QPSK, SefdmConfig, correlation_matrix, demodulate, modulate

STF_FREQ = {k: v for k, v in zip(
    range(-24, 25, 4),
    [1 + 1j, -1 - 1j, 1 + 1j, -1 - 1j, -1 - 1j, 1 + 1j, 0,
     -1 - 1j, -1 - 1j, 1 + 1j, 1 + 1j, 1 + 1j, 1 + 1j])}
LTF_FREQ = dict(zip(range(-26, 27), [
    1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 0,
    1, -1, -1, 1, 1, -1, 1, -1, 1, -1, -1, -1, -1, -1, 1, 1, -1, -1, 1, -1, 1, -1, 1, 1, 1, 1]))
PILOT_BASE = np.array([1, 1, 1, -1])
# RATE=1101 (6 Mb/s), reserved, LENGTH=0, even parity, 6 tail bits; repeated to 48 coded bits
LSIG_BITS = np.tile([1, 1, 0, 1, 0] + [0] * 12 + [1] + [0] * 6, 2)

SYNC_THRESHOLD = 0.5


class NoFrameError(RuntimeError):
    pass


def pilot_polarity() -> np.ndarray:
    """127-long pilot polarity sequence: scrambler x^7 + x^4 + 1 from the all-ones state, 0 -> +1, 1 -> -1."""
    state = [1] * 7
    out = []
    for _ in range(127):
        b = state[3] ^ state[6]
        out.append(b)
        state = [b] + state[:-1]
    return 1 - 2 * np.array(out)


POLARITY = pilot_polarity()


@dataclass(frozen=True)
class WlanConfig:
    fft_size: int = 64
    n_data: int = 48
    pilot_bins: tuple[int, ...] = (-21, -7, 7, 21)
    n_occupied: int = 52
    cp_length: int = 16
    sample_rate: float = 20e6

    def __post_init__(self):
        if self.n_data + len(self.pilot_bins) != self.n_occupied:
            raise ValueError("data and pilot bins must fill the occupied bins")

    @property
    def oversampling(self) -> Fraction:
        return Fraction(self.fft_size, self.n_occupied)

    @property
    def logical_bins(self) -> np.ndarray:
        half = self.n_occupied // 2
        return np.r_[np.arange(-half, 0), np.arange(1, half + 1)]

    @property
    def pilot_positions(self) -> np.ndarray:
        lb = list(self.logical_bins)
        return np.array([lb.index(k) for k in self.pilot_bins])

    @property
    def data_positions(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.n_occupied), self.pilot_positions)

    @property
    def symbol_length(self) -> int:
        return self.fft_size + self.cp_length

    @property
    def bits_per_symbol(self) -> int:
        return self.n_data * QPSK.bits_per_symbol

    def sefdm(self, alpha: float = 1.0) -> SefdmConfig:
        return SefdmConfig(self.n_occupied, self.oversampling, alpha, self.sample_rate)

    def pilots(self, symbol_index: int) -> np.ndarray:
        """Pilot values of PSDU symbol ``symbol_index`` (the SIGNAL field is index -1)."""
        return PILOT_BASE * POLARITY[(symbol_index + 1) % 127]

    def freq_vector(self, table: dict) -> np.ndarray:
        return np.array([table.get(k, 0) for k in self.logical_bins], dtype=complex)


def _ofdm(cfg: WlanConfig, vec) -> np.ndarray:
    return modulate(cfg.sefdm(1.0), vec)


def preamble(cfg: WlanConfig = WlanConfig()) -> np.ndarray:
    """L-STF (160) + L-LTF (160) + L-SIG (80) samples; identical for every schedule."""
    stf = _ofdm(cfg, np.sqrt(13 / 6) * cfg.freq_vector(STF_FREQ))
    stf = stf[np.arange(160) % cfg.fft_size]
    ltf_sym = _ofdm(cfg, cfg.freq_vector(LTF_FREQ))
    ltf = np.r_[ltf_sym[-32:], ltf_sym, ltf_sym]
    sig = np.zeros(cfg.n_occupied, dtype=complex)
    sig[cfg.data_positions] = BPSK.map_bits(LSIG_BITS)
    sig[cfg.pilot_positions] = cfg.pilots(-1)
    sig_t = _ofdm(cfg, sig)
    return np.r_[stf, ltf, sig_t[-cfg.cp_length :], sig_t]


@dataclass
class WdsFrame:
    preamble: np.ndarray
    psdu: np.ndarray  # (symbols, fft_size + cp_length)
    schedule: Schedule
    bits: np.ndarray = field(repr=False)

    @property
    def n_bits(self) -> int:
        return len(self.bits)

    @property
    def samples(self) -> np.ndarray:
        return np.r_[self.preamble, self.psdu.ravel()]


def psdu_symbol_vectors(cfg: WlanConfig, bits) -> np.ndarray:
    """Occupied-bin vectors (data + pilots) for every PSDU symbol."""
    bits = np.asarray(bits).reshape(-1, cfg.bits_per_symbol)
    vec = np.zeros((len(bits), cfg.n_occupied), dtype=complex)
    vec[:, cfg.data_positions] = QPSK.map_bits(bits)
    vec[:, cfg.pilot_positions] = np.array([cfg.pilots(i) for i in range(len(bits))])
    return vec


def build_frame(cfg: WlanConfig, sched: Schedule, bits) -> WdsFrame:
    bits = np.asarray(bits, dtype=np.int64)
    need = cfg.bits_per_symbol * len(sched)
    if bits.shape != (need,):
        raise ValueError(f"frame with {len(sched)} PSDU symbols carries {need} bits, got {bits.size}")
    vec = psdu_symbol_vectors(cfg, bits)
    psdu = np.empty((len(sched), cfg.symbol_length), dtype=complex)
    for i, alpha in enumerate(sched.alphas):
        x = modulate(cfg.sefdm(alpha), vec[i])
        psdu[i] = np.r_[x[-cfg.cp_length :], x]
    return WdsFrame(preamble(cfg), psdu, sched, bits)


def write_iq(path, samples) -> None:
    """Interleaved little-endian float64 I/Q."""
    x = np.asarray(samples, dtype=np.complex128)
    np.stack([x.real, x.imag], axis=-1).astype("<f8").tofile(path)


def read_iq(path) -> np.ndarray:
    raw = np.fromfile(path, dtype="<f8")
    return raw[0::2] + 1j * raw[1::2]


# --- receive side -----------------------------------------------------------------


@dataclass
class FrontEnd:
    """Synchronized, CFO-corrected PSDU samples plus LTF channel and noise estimates."""

    start: int
    psdu: np.ndarray  # (symbols, fft_size) post-CP samples
    channel: np.ndarray  # per occupied bin
    noise_var: float  # per-bin noise variance after equalization
    cfo: float  # cycles per sample removed


def synchronize(stream, cfg: WlanConfig = WlanConfig()) -> int:
    """Frame start from the normalized cross-correlation against the known preamble."""
    stream = np.asarray(stream, dtype=complex)
    ref = preamble(cfg)
    if len(stream) < len(ref):
        raise NoFrameError("stream shorter than the preamble")
    corr = np.abs(correlate(stream, ref, mode="valid", method="fft"))
    energy = np.convolve(np.abs(stream) ** 2, np.ones(len(ref)), mode="valid")
    norm = corr / (np.linalg.norm(ref) * np.sqrt(np.maximum(energy, 1e-300)))
    peak = int(np.argmax(norm))
    if norm[peak] < SYNC_THRESHOLD:
        raise NoFrameError(f"no preamble found (peak normalized correlation {norm[peak]:.3f})")
    return peak


def front_end(stream, cfg: WlanConfig = WlanConfig(), n_symbols: int | None = None,
              ideal: bool = False, correct_cfo: bool = True) -> FrontEnd:
    """Synchronize, remove CFO (from the LTF repetition) and estimate the channel.

    ``ideal=True`` assumes perfect channel knowledge of a flat, offset-free
    link: unit channel and no CFO correction.
    """
    stream = np.asarray(stream, dtype=complex)
    start = synchronize(stream, cfg)
    pre = len(preamble(cfg))
    avail = (len(stream) - start - pre) // cfg.symbol_length
    n = avail if n_symbols is None else n_symbols
    if n > avail:
        raise NoFrameError(f"frame truncated: {avail} of {n} PSDU symbols present")
    nfft = cfg.fft_size
    l1 = stream[start + 192 : start + 192 + nfft]
    l2 = stream[start + 256 : start + 256 + nfft]
    cfo = 0.0
    if correct_cfo and not ideal:
        cfo = float(np.angle(np.vdot(l1, l2)) / (2 * np.pi * nfft))
        k = np.arange(len(stream)) - start
        stream = stream * np.exp(-2j * np.pi * cfo * k)
        l1 = stream[start + 192 : start + 192 + nfft]
        l2 = stream[start + 256 : start + 256 + nfft]
    ocfg = cfg.sefdm(1.0)
    d1, d2 = demodulate(ocfg, l1), demodulate(ocfg, l2)
    ref = cfg.freq_vector(LTF_FREQ)
    h = np.ones(cfg.n_occupied, dtype=complex) if ideal else (d1 + d2) / (2 * ref)
    # the two LTF copies differ only by noise: E|d1 - d2|^2 = 2 sigma^2
    noise = float(np.mean(np.abs(d1 - d2) ** 2 / (2 * np.abs(h) ** 2)))
    body = stream[start + pre : start + pre + n * cfg.symbol_length]
    psdu = body.reshape(n, cfg.symbol_length)[:, cfg.cp_length :]
    return FrontEnd(start, psdu, h, noise, cfo)


def _pilot_corr(cfg, v):
    ref = np.array([cfg.pilots(i) for i in range(len(v))]).reshape(len(v), -1)
    return np.sum(v[:, cfg.pilot_positions] * ref.conj(), axis=1)


def _linear_phase(c) -> np.ndarray:
    """Per-symbol phase ``phi + omega * i`` fitted to pilot correlations ``c``.

    ``omega`` maximizes ``|sum c_i exp(-j omega i)|`` (the least-squares fit
    for a linear phase): a zero-padded FFT peak, refined within one bin.
    """
    n = len(c)
    i = np.arange(n)
    if n == 1:
        return np.angle(c)
    nfft = max(1024, 16 * n)
    k = int(np.argmax(np.abs(np.fft.fft(c, nfft))))
    w0 = 2 * np.pi * k / nfft
    step = 2 * np.pi / nfft
    res = minimize_scalar(lambda w: -abs(np.sum(c * np.exp(-1j * w * i))),
                          bounds=(w0 - step, w0 + step), method="bounded")
    omega = float(res.x)
    phi = np.angle(np.sum(c * np.exp(-1j * omega * i)))
    return phi + omega * i


def _receive(cfg, fe, alphas, detector="id", max_iter=20, track_phase=True, feedback="tanh"):
    """Per-BCF demodulation and equalization, frame-level phase tracking, then detection."""
    alphas = np.asarray(alphas, dtype=float)
    R = np.empty((len(alphas), cfg.n_occupied), dtype=complex)
    for a in np.unique(alphas):
        rows = np.flatnonzero(alphas == a)
        R[rows] = demodulate(cfg.sefdm(a), fe.psdu[rows]) / fe.channel
    if track_phase and len(R):
        # pilot bins carry ICI before cancellation, which averages out over the frame
        R = R * np.exp(-1j * _linear_phase(_pilot_corr(cfg, R)))[:, None]
    soft = R.copy()
    if detector != "mf":
        for a in np.unique(alphas):
            scfg = cfg.sefdm(a)
            if scfg.dft_size == scfg.n_samples:
                continue
            rows = np.flatnonzero(alphas == a)
            soft[rows] = detect_id(correlation_matrix(scfg), R[rows], QPSK, max_iter=max_iter,
                                   feedback=feedback, noise_var=fe.noise_var).soft
    return QPSK.demap(soft[:, cfg.data_positions]).ravel()


def legit_receive(stream, cfg: WlanConfig, sched: Schedule, ideal_channel: bool = False,
                  max_iter: int = 20, track_phase: bool = True, feedback: str = "tanh") -> np.ndarray:
    """Bob: pre-shared schedule, per-symbol BCF demodulation and ID detection."""
    fe = front_end(stream, cfg, len(sched), ideal=ideal_channel)
    return _receive(cfg, fe, sched.alphas, "id", max_iter, track_phase and not ideal_channel, feedback)


def eve_scenario1_receive(stream, cfg: WlanConfig = WlanConfig(), n_symbols: int | None = None,
                          ideal_channel: bool = False, track_phase: bool = True) -> np.ndarray:
    """Eve, scenario I: every PSDU symbol demodulated as standard OFDM with MF detection."""
    fe = front_end(stream, cfg, n_symbols, ideal=ideal_channel)
    return _receive(cfg, fe, np.ones(len(fe.psdu)), "mf", track_phase=track_phase and not ideal_channel)


def eve_scenario2_receive(stream, cfg: WlanConfig, model: EcocModel | None, bank=None,
                          true_labels=None, oracle: bool = False, alphas=None,
                          n_symbols: int | None = None, ideal_channel: bool = False,
                          max_iter: int = 20, track_phase: bool = True, feedback: str = "tanh"):
    """Eve, scenario II: classify each PSDU symbol's BCF, then demodulate and ID-detect with it.

    Returns ``(bits, confusion)``; ``confusion`` is ``None`` unless ``true_labels`` is given.
    ``oracle=True`` replaces the classifier with the true labels (an upper bound).
    ``alphas`` maps class index to BCF and defaults to the model's class labels.
    """
    if alphas is None:
        if model is None:
            raise ValueError("pass a model or an explicit alphas list")
        alphas = model.class_labels
    fe = front_end(stream, cfg, n_symbols, ideal=ideal_channel)
    if oracle:
        if true_labels is None:
            raise ValueError("the oracle classifier needs the true labels")
        pred = np.asarray(true_labels)
    else:
        bank = bank or model.bank
        pred = model.predict_features(extract_features(fe.psdu, bank))
    alphas = np.asarray(alphas, dtype=float)
    bits = _receive(cfg, fe, alphas[pred], "id", max_iter,
                    track_phase and not ideal_channel, feedback)
    cm = None
    if true_labels is not None:
        k = len(alphas)
        cm = ConfusionMatrix.from_pairs(true_labels, pred, k, list(alphas))
    return bits, cm


def ber(tx_bits, rx_bits) -> float:
    tx, rx = np.asarray(tx_bits), np.asarray(rx_bits)
    if tx.shape != rx.shape:
        raise ValueError(f"bit arrays differ in shape: {tx.shape} vs {rx.shape}")
    if tx.size == 0:
        raise ValueError("no bits to compare")
    return float(np.count_nonzero(tx != rx) / tx.size)
