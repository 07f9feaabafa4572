"""Re-referencing, zero-phase filtering and 1-second epoching."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy import signal

from .dataset_io import (
    DatasetManifest,
    RawRecording,
    TrialMeta,
    load_manifest,
    load_trial,
    write_manifest,
    write_trial,
)
from .errors import ConfigError, DataError, NumericalError


@dataclass(frozen=True)
class FilterSpec:
    kind: str
    low_hz: float | None = None
    high_hz: float | None = None
    center_hz: float | None = None
    q_factor: float = 30.0
    order: int = 4
    zero_phase: bool = True

    @classmethod
    def bandpass(cls, low_hz=0.5, high_hz=60.0, order=4):
        return cls("bandpass", low_hz=low_hz, high_hz=high_hz, order=order)

    @classmethod
    def notch(cls, center_hz=50.0, q_factor=30.0):
        return cls("notch", center_hz=center_hz, q_factor=q_factor, order=2)

    def validate(self, rate):
        nyq = rate / 2.0
        if self.order < 2 or self.order % 2:
            raise ConfigError(f"filter order must be even and >= 2, got {self.order}")
        if self.kind == "bandpass":
            if self.low_hz is None or self.high_hz is None or not 0 < self.low_hz < self.high_hz < nyq:
                raise ConfigError(f"bandpass needs 0 < low < high < {nyq} Hz, got {self.low_hz}, {self.high_hz}")
        elif self.kind == "notch":
            if self.center_hz is None or not 0 < self.center_hz < nyq or self.q_factor <= 0:
                raise ConfigError(f"notch needs 0 < center < {nyq} Hz and Q > 0")
        else:
            raise ConfigError(f"unknown filter kind {self.kind!r}")
        return self

    def design(self, rate):
        """Second-order sections for this filter at ``rate`` Hz."""
        self.validate(rate)
        if self.kind == "bandpass":
            # butter() doubles the order for band filters
            sos = signal.butter(self.order // 2, [self.low_hz, self.high_hz], btype="bandpass", fs=rate, output="sos")
        else:
            b, a = signal.iirnotch(self.center_hz, self.q_factor, fs=rate)
            sos = signal.tf2sos(b, a)
        poles = np.concatenate([np.roots(sec[3:]) for sec in sos])
        if np.any(np.abs(poles) >= 1.0):
            raise NumericalError(f"unstable {self.kind} design: max pole magnitude {np.abs(poles).max():.6f}")
        return sos


@dataclass
class EpochedTrial:
    meta: TrialMeta
    slices: np.ndarray  # [n_slices, n_channels, samples_per_slice]
    channel_names: tuple

    def __len__(self):
        return len(self.slices)


def common_average_reference(rec):
    data = np.asarray(rec.data, dtype=np.float64)
    if data.shape[0] < 2:
        raise DataError("common average reference needs at least two channels")
    return rec.with_data(data - data.mean(axis=0, keepdims=True), car=True)


def apply_filter(rec, spec):
    sos = spec.design(rec.sample_rate)
    data = np.asarray(rec.data, dtype=np.float64)
    if spec.zero_phase:
        out = signal.sosfiltfilt(sos, data, axis=-1)
    else:
        out = signal.sosfilt(sos, data, axis=-1)
    return rec.with_data(out, **{spec.kind: asdict(spec)})


def epoch_slices(rec, slice_seconds=1.0):
    """Cut into non-overlapping windows; a trailing partial window is dropped."""
    size = int(round(slice_seconds * rec.sample_rate))
    if size <= 0:
        raise ConfigError("slice length must be positive")
    n = rec.n_samples // size
    if n == 0:
        raise DataError(f"slice of {size} samples is longer than the recording ({rec.n_samples} samples)")
    data = np.asarray(rec.data)[:, : n * size]
    slices = data.reshape(rec.n_channels, n, size).transpose(1, 0, 2).copy()
    return EpochedTrial(rec.meta, slices, tuple(rec.channel_names))


@dataclass(frozen=True)
class PreprocessOptions:
    car: bool = True
    band: tuple | None = (0.5, 60.0)
    notch_hz: float | None = 50.0
    bandpass_order: int = 4
    notch_q: float = 30.0

    def to_dict(self):
        return asdict(self)


def preprocess_recording(rec, opts=PreprocessOptions()):
    """CAR, then bandpass, then notch (each optional)."""
    if opts.car:
        rec = common_average_reference(rec)
    if opts.band is not None:
        rec = apply_filter(rec, FilterSpec.bandpass(opts.band[0], opts.band[1], opts.bandpass_order))
    if opts.notch_hz is not None:
        rec = apply_filter(rec, FilterSpec.notch(opts.notch_hz, opts.notch_q))
    return rec


def preprocess_dataset(in_root, out_root, opts=PreprocessOptions()):
    """Preprocess every trial of a dataset into a new root with the same layout."""
    manifest = load_manifest(in_root)
    out_root = Path(out_root)
    entries = []
    for e in manifest.entries:
        rec = preprocess_recording(load_trial(manifest, *e.key), opts)
        new = write_trial(out_root, RawRecording(e.meta, rec.data, manifest.channel_names), e.file)
        entries.append(type(e)(new.meta, new.file, new.n_channels, new.n_samples, e.label))
    provenance = dict(manifest.provenance)
    provenance["preprocess"] = {"source": str(Path(in_root)), **opts.to_dict()}
    out = DatasetManifest(out_root, entries, manifest.channel_names, manifest.format_version, provenance)
    write_manifest(out, out_root)
    return out
