import math

import numpy as np
import pytest

from eegtrust.bands import ALPHA, FEATURE_BANDS, GAMMA, THETA, BandDef
from eegtrust.errors import DataError
from eegtrust.features import (
    FeatureTable,
    FloorStats,
    band_variance,
    de_features,
    de_gaussian,
    power_spectrum_512,
)

RATE = 250
FULL = BandDef("full", 0.0, 125.0)
DE_UNIT = 0.5 * math.log(2 * math.pi * math.e)  # 1.41894 nats


def test_de_closed_form():
    assert de_gaussian(1.0) == pytest.approx(1.4189385332, abs=1e-9)
    assert de_gaussian(4.0) - de_gaussian(1.0) == pytest.approx(math.log(2), abs=1e-12)


def test_de_floor_counts_and_warns():
    stats = FloorStats()
    with pytest.warns(RuntimeWarning):
        out = de_gaussian(np.array([0.0, 1.0, -1.0]), stats=stats)
    assert stats.count == 2 and stats.total == 3
    assert out[0] == pytest.approx(0.5 * math.log(2 * math.pi * math.e * 1e-10))
    assert np.all(np.isfinite(out))


def test_parseval_window_energy(rng):
    x = rng.normal(size=(5, RATE))
    spec = power_spectrum_512(x, RATE)
    w = np.hanning(RATE + 1)[:-1]
    expected = np.sum((x * w) ** 2, axis=-1) / np.sum(w ** 2)
    np.testing.assert_allclose(spec.power.sum(axis=-1) * spec.df, expected, rtol=1e-12)
    assert spec.power.shape[-1] == 257 and spec.df == pytest.approx(250 / 512)


def test_tone_lands_in_its_band():
    t = np.arange(RATE) / RATE
    x = math.sqrt(2) * np.sin(2 * np.pi * 10.3 * t)  # unit variance alpha tone
    spec = power_spectrum_512(x, RATE)
    assert band_variance(spec, ALPHA) == pytest.approx(1.0, rel=0.02)
    assert band_variance(spec, GAMMA) < 1e-3
    assert band_variance(spec, THETA) < 1e-2


def test_white_noise_gamma_fraction(rng):
    # bins in [31, 50) Hz: 39 of the 256 one-sided bins -> 39 * 2 / 512
    x = rng.normal(size=(2000, RATE))
    frac = band_variance(power_spectrum_512(x, RATE), GAMMA).mean()
    assert frac == pytest.approx(39 * 2 / 512, rel=0.03)


def test_white_noise_full_band_de(rng):
    x = rng.normal(size=(100, RATE))
    de = de_features(x, RATE, (FULL,), FloorStats())[:, 0]
    assert abs(de.mean() - DE_UNIT) < 0.1


def test_variance_scaling_shifts_de_by_ln2(rng):
    x = rng.normal(size=(100, RATE))
    stats = FloorStats()
    d1 = de_features(x, RATE, FEATURE_BANDS, stats)
    d4 = de_features(2 * x, RATE, FEATURE_BANDS, stats)
    np.testing.assert_allclose(d4 - d1, math.log(2), atol=1e-12)


def test_wrong_window_length_and_bad_band(rng):
    with pytest.raises(DataError):
        power_spectrum_512(rng.normal(size=200), RATE)
    spec = power_spectrum_512(rng.normal(size=RATE), RATE)
    with pytest.raises(DataError):
        band_variance(spec, BandDef("ultra", 100.0, 200.0))
    with pytest.raises(DataError):
        band_variance(spec, BandDef("narrow", 10.0, 10.1))


def test_de_features_shape(rng):
    out = de_features(rng.normal(size=(3, 64, RATE)), RATE, FEATURE_BANDS, FloorStats())
    assert out.shape == (3, 64, 4)


def _table(rng, n=12):
    return FeatureTable(
        features=rng.normal(size=(n, 64, 4)).astype(np.float32),
        subject_ids=np.array(["sub01"] * (n // 2) + ["sub02"] * (n - n // 2)),
        trial_indices=np.arange(n) // 3,
        slice_indices=np.arange(n) % 3,
        labels=np.arange(n) % 2,
        scores=np.linspace(1, 5, n),
        channel_names=tuple(f"C{i}" for i in range(64)),
        bands=tuple(b.name for b in FEATURE_BANDS),
        provenance={"seed": 3},
    )


def test_feature_table_round_trip(tmp_path, rng):
    table = _table(rng)
    table.save(tmp_path / "f.bin")
    raw = (tmp_path / "f.bin").read_bytes()
    assert len(raw) == 12 * 64 * 4 * 4
    back = FeatureTable.load(tmp_path / "f.bin")
    np.testing.assert_array_equal(back.features, table.features)
    np.testing.assert_array_equal(back.labels, table.labels)
    np.testing.assert_array_equal(back.subject_ids, table.subject_ids)
    assert back.provenance["seed"] == 3
    assert np.frombuffer(raw[:4], "<f4")[0] == table.features[0, 0, 0]


def test_feature_table_missing(tmp_path):
    with pytest.raises(DataError, match="features not found at"):
        FeatureTable.load(tmp_path / "nope.bin")


def test_feature_table_subset(rng):
    table = _table(rng)
    sub = table.subset(table.subject_ids == "sub02")
    assert len(sub.labels) == 6 and set(sub.subject_ids) == {"sub02"}
