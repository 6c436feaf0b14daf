"""BCF patterns, per-symbol schedules and labelled dataset generation.

Two generation modes are supported:

* ``DD`` (data diversity): every record is a fresh random symbol through its
  own channel realization.
* ``DA`` (data augmentation): one source symbol per class, expanded through
  many independent channel realizations.

Each record draws from its own generator seeded by ``(master_seed, stream,
record_index)``, so results do not depend on generation order.
"""

from __future__ import annotations

import csv
import io
import json
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .channel import ChannelProfile, impair
from .sefdm import QPSK, SefdmConfig, modulate, random_symbols

ES_N0_GRID_DB = tuple(range(-20, 51, 10))
DATASET_MAGIC = b"WDSDSET1"


@dataclass(frozen=True)
class BcfPattern:
    name: str
    alphas: tuple[float, ...]
    delta: float

    def __post_init__(self):
        a = self.alphas
        if not a or a[0] != 1.0:
            raise ValueError("a BCF pattern starts at 1.0")
        if any(not 0 < x <= 1 for x in a) or any(x <= y for x, y in zip(a, a[1:])):
            raise ValueError(f"BCF values must be strictly decreasing in (0, 1]: {a}")

    @property
    def n_classes(self) -> int:
        return len(self.alphas)


def builtin_patterns() -> dict[str, BcfPattern]:
    type1 = BcfPattern("type-i", (1.0, 0.9, 0.8, 0.7), 0.1)
    type2 = BcfPattern("type-ii", (1.0, 0.95, 0.9, 0.85, 0.8, 0.75, 0.7), 0.05)
    type3 = BcfPattern("type-iii", (1.0, 0.985, 0.97, 0.955, 0.94), 0.015)
    wlan3 = BcfPattern("wlan-type-iii", type3.alphas, type3.delta)
    return {p.name: p for p in (type1, type2, type3, wlan3)}


def get_pattern(name: str) -> BcfPattern:
    pats = builtin_patterns()
    key = name.lower().replace("_", "-")
    if key not in pats:
        raise KeyError(f"unknown pattern {name!r}; choose from {sorted(pats)}")
    return pats[key]


@dataclass(frozen=True)
class Schedule:
    labels: tuple[int, ...]
    pattern: BcfPattern
    seed: int | None = None

    @property
    def alphas(self) -> tuple[float, ...]:
        return tuple(self.pattern.alphas[i] for i in self.labels)

    def __len__(self):
        return len(self.labels)


def schedule(p: BcfPattern, n_symbols: int, seed: int) -> Schedule:
    """I.i.d. uniform class draw per symbol."""
    rng = np.random.default_rng([seed, 0x5C4ED])
    labels = rng.integers(0, p.n_classes, size=n_symbols)
    return Schedule(tuple(int(i) for i in labels), p, seed)


@dataclass
class LabeledDataset:
    samples: np.ndarray  # (records, Q) complex
    labels: np.ndarray
    es_n0_db: np.ndarray
    pattern: BcfPattern
    cfg: SefdmConfig
    mode: str
    seed: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.es_n0_db = np.asarray(self.es_n0_db, dtype=float)
        if self.samples.ndim != 2 or len(self.samples) != len(self.labels):
            raise ValueError("samples must be (records, Q) and match the label count")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.pattern.n_classes):
            raise ValueError("label out of range for the pattern")

    def __len__(self):
        return len(self.labels)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def n_classes(self) -> int:
        return self.pattern.n_classes

    @property
    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def subset(self, mask) -> "LabeledDataset":
        return LabeledDataset(self.samples[mask], self.labels[mask], self.es_n0_db[mask],
                              self.pattern, self.cfg, self.mode, self.seed)

    def header(self) -> dict:
        return {
            "pattern": self.pattern.name,
            "alphas": list(self.pattern.alphas),
            "delta": self.pattern.delta,
            "n_subcarriers": self.cfg.n_subcarriers,
            "oversampling": str(self.cfg.oversampling),
            "sample_rate": self.cfg.sample_rate,
            "n_samples": self.n_samples,
            "mode": self.mode,
            "seed": self.seed,
            "count": len(self),
        }

    def save(self, path) -> None:
        """Binary file: magic, uint32 header length, JSON header, then fixed-size records.

        Each record is ``<i4 label, <f8 Es/N0, Q x (<f8 real, <f8 imag)``.
        """
        head = json.dumps(self.header(), sort_keys=True).encode()
        rec = np.zeros(len(self), dtype=[("label", "<i4"), ("es_n0", "<f8"),
                                          ("iq", "<f8", (2 * self.n_samples,))])
        rec["label"] = self.labels
        rec["es_n0"] = self.es_n0_db
        rec["iq"] = self.samples.view(np.float64).reshape(len(self), -1) if len(self) else 0
        with open(path, "wb") as f:
            f.write(DATASET_MAGIC)
            f.write(struct.pack("<I", len(head)))
            f.write(head)
            f.write(rec.tobytes())

    @classmethod
    def load(cls, path) -> "LabeledDataset":
        raw = Path(path).read_bytes()
        if raw[:8] != DATASET_MAGIC:
            raise ValueError(f"{path} is not a WDS dataset file")
        (hlen,) = struct.unpack("<I", raw[8:12])
        head = json.loads(raw[12 : 12 + hlen])
        q = head["n_samples"]
        dt = np.dtype([("label", "<i4"), ("es_n0", "<f8"), ("iq", "<f8", (2 * q,))])
        rec = np.frombuffer(raw[12 + hlen :], dtype=dt, count=head["count"])
        iq = rec["iq"].reshape(len(rec), q, 2)
        pattern = BcfPattern(head["pattern"], tuple(head["alphas"]), head["delta"])
        cfg = SefdmConfig(head["n_subcarriers"], Fraction(head["oversampling"]), 1.0,
                          head["sample_rate"])
        return cls(iq[..., 0] + 1j * iq[..., 1], rec["label"].astype(np.int64),
                   rec["es_n0"].copy(), pattern, cfg, head["mode"], head["seed"])

    def manifest_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "label", "alpha", "es_n0_db", "mean_power"])
        power = np.mean(np.abs(self.samples) ** 2, axis=1)
        for i, (lab, e, p) in enumerate(zip(self.labels, self.es_n0_db, power)):
            w.writerow([i, int(lab), self.pattern.alphas[lab], repr(float(e)), f"{p:.12g}"])
        return buf.getvalue()


def _noise_level(noise, rng):
    if np.isscalar(noise):
        return float(noise)
    grid = np.asarray(noise, dtype=float)
    return float(grid[rng.integers(0, len(grid))])


def _record_rng(seed, stream, index):
    return np.random.default_rng([seed, stream, index])


def generate_dd(p: BcfPattern, per_class: int, cfg: SefdmConfig,
                profile: ChannelProfile | None = ChannelProfile(),
                noise=ES_N0_GRID_DB, seed: int = 0) -> LabeledDataset:
    """``per_class`` fresh random QPSK symbols per BCF class, each through its own channel.

    ``noise`` is either one Es/N0 (dB) or a grid drawn from uniformly per record.
    """
    samples, labels, snrs = [], [], []
    for c, alpha in enumerate(p.alphas):
        ccfg = cfg.with_bcf(alpha)
        for i in range(per_class):
            rng = _record_rng(seed, 1, c * per_class + i)
            s, _ = random_symbols(rng, ccfg.n_subcarriers, QPSK)
            e = _noise_level(noise, rng)
            samples.append(impair(modulate(ccfg, s), profile, e, rng))
            labels.append(c)
            snrs.append(e)
    q = cfg.n_samples
    return LabeledDataset(np.reshape(samples, (-1, q)), labels, snrs, p, cfg, "DD", seed)


def generate_da(p: BcfPattern, per_class: int, cfg: SefdmConfig,
                profile: ChannelProfile | None = ChannelProfile(),
                noise=ES_N0_GRID_DB, seed: int = 0) -> LabeledDataset:
    """One source symbol per class, expanded into ``per_class`` impaired copies."""
    samples, labels, snrs = [], [], []
    for c, alpha in enumerate(p.alphas):
        ccfg = cfg.with_bcf(alpha)
        src, _ = random_symbols(_record_rng(seed, 2, c), ccfg.n_subcarriers, QPSK)
        x = modulate(ccfg, src)
        for i in range(per_class):
            rng = _record_rng(seed, 3, c * per_class + i)
            e = _noise_level(noise, rng)
            samples.append(impair(x, profile, e, rng))
            labels.append(c)
            snrs.append(e)
    q = cfg.n_samples
    return LabeledDataset(np.reshape(samples, (-1, q)), labels, snrs, p, cfg, "DA", seed)
