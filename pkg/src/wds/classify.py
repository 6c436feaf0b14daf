"""Eavesdropper signal-format classifiers.

The manual-feature pipeline is: Morlet scalogram -> per-scale variance and
interquartile range -> z-score -> one-vs-one ECOC bank of linear max-margin
learners. The single-carrier likelihood classifier for modulation formats
lives here as well.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.special import logsumexp

from .sefdm import Constellation

MODEL_FORMAT = "wds-ecoc/1"


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class WaveletBank:
    """Complex Morlet filter bank on a geometric scale grid.

    Scales run from the one centred on normalized frequency 1/2 up to the one
    centred on 1/Q (strictly increasing scale, decreasing frequency).
    """

    n_samples: int
    n_scales: int = 32
    omega0: float = 6.0

    def __post_init__(self):
        if self.n_scales < 2:
            raise ValueError("a wavelet bank needs at least two scales")
        if self.n_samples < 8:
            raise ValueError("a wavelet bank needs at least 8 samples")

    @property
    def frequencies(self) -> np.ndarray:
        """Centre frequency of each scale in cycles per sample."""
        return np.geomspace(0.5, 1.0 / self.n_samples, self.n_scales)

    @property
    def scales(self) -> np.ndarray:
        return self.omega0 / (2 * np.pi * self.frequencies)

    def filters(self) -> np.ndarray:
        """Frequency responses, one row per scale, each for a unit-norm atom."""
        return _morlet_filters(self.n_samples, self.n_scales, self.omega0)


_FILTER_CACHE: dict = {}


def _morlet_filters(q, n_scales, omega0):
    key = (q, n_scales, omega0)
    if key not in _FILTER_CACHE:
        bank = WaveletBank(q, n_scales, omega0)
        w = 2 * np.pi * np.fft.fftfreq(q)
        aw = bank.scales[:, None] * w[None, :]
        psi = np.where(w > 0, np.exp(-0.5 * (aw - omega0) ** 2), 0.0)
        # discrete Parseval: sum_t |psi_t|^2 = sum_w |Psi_w|^2 / Q
        psi /= np.sqrt((psi**2).sum(axis=1, keepdims=True) / q)
        _FILTER_CACHE[key] = psi
    return _FILTER_CACHE[key]


def scalogram(x, bank: WaveletBank) -> np.ndarray:
    """Magnitude of the circular wavelet transform, shape ``(..., n_scales, Q)``."""
    x = np.asarray(x, dtype=complex)
    if x.shape[-1] < 8:
        raise ValueError("scalogram needs at least 8 samples")
    if x.shape[-1] != bank.n_samples:
        raise ValueError(f"bank built for {bank.n_samples} samples, got {x.shape[-1]}")
    spec = np.fft.fft(x, axis=-1)
    return np.abs(np.fft.ifft(spec[..., None, :] * bank.filters(), axis=-1))


def reduce_features(sg) -> np.ndarray:
    """Per-scale variance then per-scale interquartile range across time.

    Variance is the population variance; quartiles interpolate linearly
    between order statistics (position ``p * (n - 1)``).
    """
    sg = np.asarray(sg, dtype=float)
    var = sg.var(axis=-1)
    q1, q3 = np.percentile(sg, [25, 75], axis=-1, method="linear")
    return np.concatenate([var, q3 - q1], axis=-1)


def extract_features(x, bank: WaveletBank) -> np.ndarray:
    """Feature vector(s) of raw samples; each record is scaled to unit mean power first."""
    x = np.asarray(x, dtype=complex)
    p = np.mean(np.abs(x) ** 2, axis=-1, keepdims=True)
    x = x / np.sqrt(np.where(p > 0, p, 1.0))
    out = []
    # chunked to bound the (records, scales, Q) intermediate
    flat = x.reshape(-1, x.shape[-1])
    for i in range(0, len(flat), 64):
        out.append(reduce_features(scalogram(flat[i : i + 64], bank)))
    feats = np.concatenate(out) if out else np.empty((0, 2 * bank.n_scales))
    return feats.reshape(x.shape[:-1] + (2 * bank.n_scales,))


def one_vs_one_coding(k: int) -> np.ndarray:
    """K x K(K-1)/2 coding matrix; column (i, j) is +1 for class i and -1 for class j."""
    pairs = list(combinations(range(k), 2))
    m = np.zeros((k, len(pairs)), dtype=int)
    for col, (i, j) in enumerate(pairs):
        m[i, col], m[j, col] = 1, -1
    return m


def train_linear_svm(x, y, lam=1e-3, epochs=50, rng=None):
    """Soft-margin linear SVM by stochastic subgradient descent (step ``1/(lam t)``).

    ``y`` holds +/-1 labels. The bias is learned as the weight of a constant
    feature. Returns ``(w, b)``.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    n, d = x.shape
    xa = np.hstack([x, np.ones((n, 1))])
    w = np.zeros(d + 1)
    radius = 1 / np.sqrt(lam)
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            margin = y[i] * (xa[i] @ w)
            w *= 1 - eta * lam
            if margin < 1:
                w += eta * y[i] * xa[i]
            nrm = np.linalg.norm(w)
            if nrm > radius:
                w *= radius / nrm
    return w[:-1].copy(), float(w[-1])


@dataclass
class EcocModel:
    bank: WaveletBank
    mean: np.ndarray
    scale: np.ndarray
    coding: np.ndarray
    weights: np.ndarray  # (learners, features)
    biases: np.ndarray
    seed: int
    class_labels: list = field(default_factory=list)
    lam: float = 1e-3
    epochs: int = 50

    @property
    def n_classes(self) -> int:
        return self.coding.shape[0]

    def normalize(self, feats):
        return (np.asarray(feats) - self.mean) / self.scale

    def scores(self, feats) -> np.ndarray:
        return self.normalize(feats) @ self.weights.T + self.biases

    def decode(self, scores) -> np.ndarray:
        """Hamming-style ECOC decoding; ties resolve to the lowest class index."""
        s = np.sign(scores)
        loss = (np.abs(self.coding)[None] * (1 - self.coding[None] * s[:, None, :]) / 2).sum(-1)
        return np.argmin(loss, axis=1)

    def predict_features(self, feats) -> np.ndarray:
        feats = np.atleast_2d(feats)
        return self.decode(self.scores(feats))

    def to_json(self) -> str:
        doc = {
            "format": MODEL_FORMAT,
            "bank": {"n_samples": self.bank.n_samples, "n_scales": self.bank.n_scales,
                     "omega0": self.bank.omega0},
            "seed": self.seed,
            "lam": self.lam,
            "epochs": self.epochs,
            "class_labels": list(self.class_labels),
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "coding": self.coding.tolist(),
            "weights": self.weights.tolist(),
            "biases": self.biases.tolist(),
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EcocModel":
        doc = json.loads(text)
        if doc.get("format") != MODEL_FORMAT:
            raise ValueError(f"unsupported model format {doc.get('format')!r}")
        return cls(
            bank=WaveletBank(**doc["bank"]),
            mean=np.array(doc["mean"]),
            scale=np.array(doc["scale"]),
            coding=np.array(doc["coding"], dtype=int),
            weights=np.array(doc["weights"]),
            biases=np.array(doc["biases"]),
            seed=doc["seed"],
            class_labels=doc["class_labels"],
            lam=doc["lam"],
            epochs=doc["epochs"],
        )


def train_on_features(feats, labels, n_classes, bank, seed=0, lam=1e-3, epochs=50,
                      class_labels=None) -> EcocModel:
    feats = np.asarray(feats, dtype=float)
    labels = np.asarray(labels)
    if n_classes < 2:
        raise TrainingError("need at least two classes")
    for c in range(n_classes):
        fc = feats[labels == c]
        if len(fc) < 20:
            raise TrainingError(f"class {c} has {len(fc)} records; at least 20 are required")
        if np.ptp(fc, axis=0).max() == 0:
            raise TrainingError(f"class {c} is degenerate: all of its feature vectors are identical")
    mean = feats.mean(axis=0)
    scale = feats.std(axis=0)
    scale[scale == 0] = 1.0
    z = (feats - mean) / scale
    coding = one_vs_one_coding(n_classes)
    rng = np.random.default_rng(seed)
    w = np.zeros((coding.shape[1], feats.shape[1]))
    b = np.zeros(coding.shape[1])
    for col in range(coding.shape[1]):
        code = coding[labels, col]
        sel = code != 0
        w[col], b[col] = train_linear_svm(z[sel], code[sel].astype(float), lam, epochs, rng)
    return EcocModel(bank, mean, scale, coding, w, b, seed,
                     list(class_labels) if class_labels is not None else list(range(n_classes)),
                     lam, epochs)


def train(ds, bank: WaveletBank | None = None, seed: int = 0, lam: float = 1e-3,
          epochs: int = 50) -> EcocModel:
    """Train the wavelet/ECOC classifier on a :class:`~wds.patterns.LabeledDataset`."""
    bank = bank or WaveletBank(ds.n_samples)
    feats = extract_features(ds.samples, bank)
    return train_on_features(feats, ds.labels, ds.n_classes, bank, seed, lam, epochs,
                             class_labels=ds.pattern.alphas)


def predict(model: EcocModel, x, bank: WaveletBank | None = None):
    """Class index for one record, or an index array for a batch of records."""
    bank = bank or model.bank
    x = np.asarray(x)
    out = model.predict_features(extract_features(np.atleast_2d(x), bank))
    return int(out[0]) if x.ndim == 1 else out


@dataclass
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    counts: np.ndarray
    class_labels: list = field(default_factory=list)

    @classmethod
    def from_pairs(cls, true, pred, k, class_labels=None):
        counts = np.zeros((k, k), dtype=np.int64)
        np.add.at(counts, (np.asarray(true), np.asarray(pred)), 1)
        return cls(counts, list(class_labels) if class_labels is not None else list(range(k)))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total) if self.total else float("nan")

    @property
    def per_class_accuracy(self) -> np.ndarray:
        rows = self.counts.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.diag(self.counts) / rows

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts, self.class_labels)

    def to_dict(self) -> dict:
        return {
            "class_labels": list(self.class_labels),
            "counts": self.counts.tolist(),
            "per_class_accuracy": [None if np.isnan(a) else float(a) for a in self.per_class_accuracy],
            "accuracy": self.accuracy,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConfusionMatrix":
        return cls(np.array(d["counts"], dtype=np.int64), d.get("class_labels", []))


def evaluate(model: EcocModel, test, bank: WaveletBank | None = None) -> ConfusionMatrix:
    pred = predict(model, test.samples, bank)
    return ConfusionMatrix.from_pairs(test.labels, np.atleast_1d(pred), model.n_classes,
                                      model.class_labels)


def modulation_log_likelihood(r, const: Constellation, sigma2: float) -> float:
    """Log-likelihood of single-carrier symbols ``r`` under an equiprobable constellation.

    ``sigma2`` is the per-dimension noise variance of the Gaussian kernel.
    """
    r = np.asarray(r, dtype=complex)
    d2 = np.abs(r[:, None] - const.points[None, :]) ** 2
    per_symbol = logsumexp(-d2 / (2 * sigma2), axis=1) - np.log(const.size)
    return float(per_symbol.sum() - len(r) * np.log(2 * np.pi * sigma2))


def classify_modulation_ml(r, candidates: list[Constellation], sigma2: float) -> str:
    """Label of the candidate constellation with the highest likelihood (first wins on ties)."""
    if not candidates:
        raise ValueError("no modulation candidates given")
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    r = np.asarray(r)
    if r.size == 0:
        raise ValueError("no symbols to classify")
    ll = [modulation_log_likelihood(r, c, sigma2) for c in candidates]
    return candidates[int(np.argmax(ll))].label
