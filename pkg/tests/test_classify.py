from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wds.classify import (ConfusionMatrix, EcocModel, TrainingError, WaveletBank, classify_modulation_ml,
                          evaluate, extract_features, modulation_log_likelihood, one_vs_one_coding,
                          predict, reduce_features, scalogram, train, train_on_features)
from wds.patterns import generate_dd, get_pattern
from wds.sefdm import BPSK, QPSK, SefdmConfig


def blobs(k=3, per=60, dim=6, sep=6.0, seed=0):
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((k, dim)) * sep
    x = np.concatenate([c + rng.standard_normal((per, dim)) for c in centers])
    y = np.repeat(np.arange(k), per)
    return x, y


def test_bank_grid():
    b = WaveletBank(64)
    assert len(b.scales) == 32
    assert np.all(np.diff(b.scales) > 0)
    assert b.frequencies[0] == pytest.approx(0.5)
    assert b.frequencies[-1] == pytest.approx(1 / 64)
    with pytest.raises(ValueError):
        WaveletBank(64, n_scales=1)


def test_scalogram_zero_and_length_guard():
    b = WaveletBank(32)
    assert np.all(scalogram(np.zeros(32, complex), b) == 0)
    with pytest.raises(ValueError):
        scalogram(np.zeros(4), WaveletBank(32))


@pytest.mark.parametrize("f", [0.3, 0.1, 0.05])
def test_scalogram_tone_peaks_at_nearest_scale(f):
    b = WaveletBank(256)
    x = np.exp(2j * np.pi * f * np.arange(256))
    energy = np.sum(scalogram(x, b) ** 2, axis=1)
    assert np.argmax(energy) == np.argmin(np.abs(np.log(b.frequencies / f)))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), theta=st.floats(0, 2 * np.pi), c=st.floats(0.01, 100))
def test_scalogram_scale_and_phase(seed, theta, c):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    b = WaveletBank(64)
    base = scalogram(x, b)
    assert np.allclose(scalogram(c * np.exp(1j * theta) * x, b), c * base, rtol=1e-9, atol=1e-12)


def test_reduce_features_examples():
    sg = np.vstack([np.full(100, 3.0), np.arange(100.0)])
    f = reduce_features(sg)
    assert list(f[:2]) == [0.0, pytest.approx(833.25)]
    # linear interpolation between order statistics: Q3 = 74.25, Q1 = 24.75
    assert f[2] == 0.0
    assert f[3] == pytest.approx(49.5)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_reduce_features_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    sg = rng.random((5, 40))
    perm = rng.permutation(40)
    assert np.allclose(reduce_features(sg), reduce_features(sg[:, perm]))


def test_extract_features_power_normalized():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((3, 64)) + 1j * rng.standard_normal((3, 64))
    b = WaveletBank(64)
    f = extract_features(x, b)
    assert f.shape == (3, 64)
    assert np.allclose(extract_features(7 * x, b), f)
    assert np.all(np.isfinite(extract_features(np.zeros((1, 64), complex), b)))


def test_one_vs_one_coding():
    m = one_vs_one_coding(4)
    assert m.shape == (4, 6)
    assert np.all(np.sum(np.abs(m), axis=0) == 2)
    assert np.all(m.sum(axis=0) == 0)


def test_separable_training_and_prediction():
    x, y = blobs()
    model = train_on_features(x, y, 3, WaveletBank(16), seed=1)
    pred = model.predict_features(x)
    assert np.all(pred == y)
    assert model.predict_features(x[5])[0] == y[5]


def test_zero_scores_decode_to_class_zero():
    x, y = blobs()
    model = train_on_features(x, y, 3, WaveletBank(16))
    assert model.decode(np.zeros((1, model.coding.shape[1])))[0] == 0


def test_shuffled_labels_near_chance():
    x, y = blobs(k=4, per=150, sep=0.0, seed=2)
    rng = np.random.default_rng(3)
    model = train_on_features(x, rng.permutation(y), 4, WaveletBank(16), seed=3)
    xt, yt = blobs(k=4, per=125, sep=0.0, seed=4)
    acc = np.mean(model.predict_features(xt) == yt)
    assert abs(acc - 0.25) <= 0.10


def test_training_errors():
    x, y = blobs(per=30)
    with pytest.raises(TrainingError):
        train_on_features(x, np.zeros_like(y), 1, WaveletBank(16))
    with pytest.raises(TrainingError, match="at least 20"):
        train_on_features(x[:50], y[:50], 3, WaveletBank(16))
    x2 = x.copy()
    x2[y == 1] = 1.0
    with pytest.raises(TrainingError, match="class 1"):
        train_on_features(x2, y, 3, WaveletBank(16))


def test_model_determinism_and_json_roundtrip():
    x, y = blobs()
    a = train_on_features(x, y, 3, WaveletBank(16), seed=5)
    b = train_on_features(x, y, 3, WaveletBank(16), seed=5)
    assert a.to_json() == b.to_json()
    c = EcocModel.from_json(a.to_json())
    assert np.array_equal(c.predict_features(x), a.predict_features(x))
    assert c.seed == 5
    with pytest.raises(ValueError):
        EcocModel.from_json('{"format": "other"}')


def test_confusion_matrix():
    cm = ConfusionMatrix.from_pairs([0, 0, 1, 1, 2], [0, 1, 1, 1, 0], 3, [1.0, 0.9, 0.8])
    assert cm.counts.tolist() == [[1, 1, 0], [0, 2, 0], [1, 0, 0]]
    assert cm.accuracy == pytest.approx(3 / 5)
    assert cm.per_class_accuracy.tolist() == [0.5, 1.0, 0.0]
    assert (cm + cm).total == 10
    assert ConfusionMatrix.from_dict(cm.to_dict()).counts.tolist() == cm.counts.tolist()


def test_uniform_random_predictor_accuracy():
    rng = np.random.default_rng(6)
    cm = ConfusionMatrix.from_pairs(rng.integers(0, 5, 1000), rng.integers(0, 5, 1000), 5)
    assert abs(cm.accuracy - 0.2) <= 0.05


def test_train_on_generated_dataset_type_i():
    cfg = SefdmConfig(32, Fraction(8))
    p = get_pattern("type-i")
    ds = generate_dd(p, 60, cfg, profile=None, noise=30.0, seed=1)
    model = train(ds, seed=2)
    assert model.class_labels == list(p.alphas)
    test = generate_dd(p, 30, cfg, profile=None, noise=30.0, seed=99)
    cm = evaluate(model, test)
    assert cm.total == 120
    assert cm.accuracy > 0.7
    assert predict(model, test.samples[0]) in range(4)


def test_modulation_likelihood_examples():
    r = BPSK.points[np.random.default_rng(7).integers(0, 2, 64)]
    assert classify_modulation_ml(r, [BPSK, QPSK], 1e-3) == "BPSK"
    assert classify_modulation_ml(r, [QPSK], 1e-3) == "QPSK"
    with pytest.raises(ValueError):
        classify_modulation_ml(r, [], 1.0)
    with pytest.raises(ValueError):
        classify_modulation_ml(np.array([]), [BPSK], 1.0)
    with pytest.raises(ValueError):
        classify_modulation_ml(r, [BPSK], 0.0)
    # log-sum-exp form stays finite far from every point
    assert np.isfinite(modulation_log_likelihood(np.array([1e3 + 0j]), QPSK, 1e-6))


def test_modulation_classifier_qpsk_at_10db():
    correct = 0
    sigma2 = 10 ** (-10 / 10)
    for seed in range(100):
        rng = np.random.default_rng(seed)
        s = QPSK.points[rng.integers(0, 4, 256)]
        r = s + np.sqrt(sigma2 / 2) * (rng.standard_normal(256) + 1j * rng.standard_normal(256))
        correct += classify_modulation_ml(r, [BPSK, QPSK], sigma2 / 2) == "QPSK"
    assert correct >= 99
