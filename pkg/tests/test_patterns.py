from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from wds.classify import WaveletBank, extract_features
from wds.detect import detect_id
from wds.patterns import (ES_N0_GRID_DB, BcfPattern, LabeledDataset, generate_da, generate_dd,
                          get_pattern, schedule)
from wds.sefdm import QPSK, SefdmConfig, correlation_matrix, demodulate, modulate


def test_builtin_patterns():
    assert get_pattern("type-i").alphas == (1.0, 0.9, 0.8, 0.7)
    assert get_pattern("type-ii").alphas == (1.0, 0.95, 0.9, 0.85, 0.8, 0.75, 0.7)
    assert get_pattern("type-iii").alphas == (1.0, 0.985, 0.97, 0.955, 0.94)
    assert get_pattern("WLAN_Type_III").alphas == get_pattern("type-iii").alphas
    assert [get_pattern(n).delta for n in ("type-i", "type-ii", "type-iii")] == [0.1, 0.05, 0.015]
    with pytest.raises(KeyError):
        get_pattern("type-iv")


@pytest.mark.parametrize("alphas", [(0.9, 0.8), (1.0, 1.0), (1.0, 0.8, 0.9), (1.0, 0.0)])
def test_pattern_validation(alphas):
    with pytest.raises(ValueError):
        BcfPattern("bad", alphas, 0.1)


def test_schedule_basics():
    p = get_pattern("type-iii")
    assert len(schedule(p, 0, 1)) == 0
    one = BcfPattern("single", (1.0,), 0.0)
    assert set(schedule(one, 50, 2).labels) == {0}
    a, b = schedule(p, 100, 3), schedule(p, 100, 3)
    assert a == b
    assert set(a.alphas) <= set(p.alphas)


def test_schedule_uniformity():
    s = schedule(get_pattern("type-iii"), 10_000, 4)
    freq = np.bincount(s.labels, minlength=5) / 10_000
    assert np.all(np.abs(freq - 0.2) <= 0.02)


def test_dd_generation_shapes_and_determinism():
    p = get_pattern("type-i")
    cfg = SefdmConfig(16, Fraction(4))
    ds = generate_dd(p, 1, cfg, profile=None, seed=5)
    assert len(ds) == 4 and ds.n_samples == 64
    assert list(ds.labels) == [0, 1, 2, 3]
    ds2 = generate_dd(p, 1, cfg, profile=None, seed=5)
    assert np.array_equal(ds.samples, ds2.samples)
    assert set(generate_dd(p, 30, cfg, profile=None, seed=6).es_n0_db) <= set(ES_N0_GRID_DB)


def test_dd_generation_with_fading():
    p = get_pattern("type-i")
    cfg = SefdmConfig(64, Fraction(8))  # 512 samples cover the 341-sample channel span
    ds = generate_dd(p, 3, cfg, seed=7)
    assert ds.samples.shape == (12, 512)
    assert np.all(np.isfinite(ds.samples))


def test_da_generation():
    p = get_pattern("type-i")
    cfg = SefdmConfig(16, Fraction(4))
    one = generate_da(p, 1, cfg, profile=None, noise=float("inf"), seed=8)
    assert len(one) == 4
    clean = generate_da(p, 5, cfg, profile=None, noise=float("inf"), seed=8)
    for c in range(4):
        rec = clean.samples[clean.labels == c]
        assert np.all(rec == rec[0])
    assert np.array_equal(clean.samples[clean.labels == 0][0], one.samples[0])


def test_first_feature_differs_between_extreme_classes():
    p = get_pattern("type-i")
    cfg = SefdmConfig(32, Fraction(8))
    ds = generate_dd(p, 80, cfg, profile=None, noise=30.0, seed=9)
    f = extract_features(ds.samples, WaveletBank(ds.n_samples))[:, 0]
    assert stats.ttest_ind(f[ds.labels == 0], f[ds.labels == 3]).pvalue < 0.05


@pytest.mark.parametrize("c", range(5))
def test_noiseless_records_detect_back_to_source(c):
    p = get_pattern("type-iii")
    base = SefdmConfig(52, Fraction(16, 13))
    ds = generate_dd(p, 2, base, profile=None, noise=float("inf"), seed=10)
    rec = ds.subset(ds.labels == c)
    cfg = base.with_bcf(p.alphas[c])
    res = detect_id(correlation_matrix(cfg), demodulate(cfg, rec.samples), QPSK)
    remod = modulate(cfg, QPSK.points[res.indices])
    assert np.allclose(remod, rec.samples, atol=1e-9)


def test_dataset_file_roundtrip(tmp_path):
    p = get_pattern("type-iii")
    cfg = SefdmConfig(52, Fraction(16, 13))
    ds = generate_dd(p, 3, cfg, profile=None, seed=11)
    path = tmp_path / "d.bin"
    ds.save(path)
    back = LabeledDataset.load(path)
    assert np.array_equal(back.samples, ds.samples)
    assert np.array_equal(back.labels, ds.labels)
    assert np.array_equal(back.es_n0_db, ds.es_n0_db)
    assert back.pattern == ds.pattern and back.cfg == ds.cfg
    assert back.mode == "DD" and back.seed == 11
    raw = path.read_bytes()
    assert raw[:8] == b"WDSDSET1"
    (tmp_path / "bad.bin").write_bytes(b"nope" * 4)
    with pytest.raises(ValueError):
        LabeledDataset.load(tmp_path / "bad.bin")


def test_manifest_and_counts():
    p = get_pattern("type-i")
    ds = generate_dd(p, 2, SefdmConfig(8, Fraction(2)), profile=None, seed=12)
    lines = ds.manifest_csv().splitlines()
    assert lines[0] == "index,label,alpha,es_n0_db,mean_power"
    assert len(lines) == 9
    assert list(ds.class_counts) == [2, 2, 2, 2]
    with pytest.raises(ValueError):
        LabeledDataset(ds.samples, np.full(8, 7), ds.es_n0_db, p, ds.cfg, "DD", 0)
