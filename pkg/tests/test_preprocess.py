import math

import numpy as np
import pytest
from scipy import signal

from eegtrust.dataset_io import RawRecording, TrialMeta
from eegtrust.errors import ConfigError, DataError
from eegtrust.preprocess import (
    FilterSpec,
    PreprocessOptions,
    apply_filter,
    common_average_reference,
    epoch_slices,
    preprocess_recording,
)

RATE = 250.0


def rec_of(data):
    return RawRecording(TrialMeta("sub01", 0, sample_rate_hz=RATE), np.asarray(data, dtype=np.float64),
                        tuple(f"C{i}" for i in range(len(data))))


def tone(freq, seconds=10.0, amp=1.0):
    t = np.arange(int(seconds * RATE)) / RATE
    return amp * np.sin(2 * np.pi * freq * t)


def rms_interior(x):
    k = int(RATE)  # one second of edge is discarded
    return float(np.sqrt(np.mean(x[..., k:-k] ** 2)))


def test_car_zero_mean_and_idempotent(rng):
    rec = rec_of(rng.normal(size=(8, 500)))
    out = common_average_reference(rec)
    np.testing.assert_allclose(out.data.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(common_average_reference(out).data, out.data, atol=1e-12)


def test_car_removes_common_signal(rng):
    common = rng.normal(size=500)
    local = rng.normal(size=(4, 500))
    local -= local.mean(axis=0)
    out = common_average_reference(rec_of(local + common))
    np.testing.assert_allclose(out.data, local, atol=1e-12)


def test_bandpass_passes_alpha_and_rejects_edges():
    spec = FilterSpec.bandpass(0.5, 60.0)
    data = np.stack([tone(10.0), tone(0.05), tone(100.0)])
    out = apply_filter(rec_of(data), spec).data
    ref = rms_interior(data[0])
    assert rms_interior(out[0]) == pytest.approx(ref, rel=0.01)
    # forward-backward doubles the dB attenuation of a 4th-order design
    assert rms_interior(out[1]) < 0.05 * ref
    assert rms_interior(out[2]) < 0.05 * ref


def test_bandpass_magnitude_is_squared_butterworth():
    sos = FilterSpec.bandpass(0.5, 60.0).design(RATE)
    w, h = signal.sosfreqz(sos, worN=[60.0], fs=RATE)
    # single-pass gain at the cutoff is -3 dB, so forward-backward is -6 dB
    assert 20 * math.log10(abs(h[0]) ** 2) == pytest.approx(-6.02, abs=0.1)


def test_notch_removes_mains_only():
    spec = FilterSpec.notch(50.0, 30.0)
    data = np.stack([tone(50.0), tone(40.0)])
    out = apply_filter(rec_of(data), spec).data
    assert rms_interior(out[0]) < 0.01 * rms_interior(data[0])
    assert rms_interior(out[1]) == pytest.approx(rms_interior(data[1]), rel=0.01)


def test_zero_phase_has_no_lag():
    x = tone(10.0)
    y = apply_filter(rec_of(x[None]), FilterSpec.bandpass(0.5, 60.0)).data[0]
    k = int(RATE)
    corr = [np.dot(x[k:-k], np.roll(y, s)[k:-k]) for s in range(-5, 6)]
    assert int(np.argmax(corr)) == 5


@pytest.mark.parametrize("spec", [FilterSpec.bandpass(60.0, 0.5), FilterSpec.bandpass(0.5, 200.0),
                                  FilterSpec.notch(150.0), FilterSpec("lowpass"),
                                  FilterSpec("bandpass", 1.0, 40.0, order=3)])
def test_invalid_filter_specs(spec):
    with pytest.raises(ConfigError):
        spec.design(RATE)


def test_epoching_drops_remainder(rng):
    rec = rec_of(rng.normal(size=(3, 1100)))
    ep = epoch_slices(rec, 1.0)
    assert ep.slices.shape == (4, 3, 250)
    np.testing.assert_array_equal(ep.slices[2, 1], rec.data[1, 500:750])


def test_epoching_too_short(rng):
    with pytest.raises(DataError):
        epoch_slices(rec_of(rng.normal(size=(2, 100))), 1.0)


def test_pipeline_order_and_skip(rng):
    rec = rec_of(rng.normal(size=(4, 1000)))
    skip = preprocess_recording(rec, PreprocessOptions(band=None, notch_hz=None))
    np.testing.assert_allclose(skip.data, common_average_reference(rec).data)
    full = preprocess_recording(rec)
    assert set(full.provenance) >= {"car", "bandpass", "notch"}
