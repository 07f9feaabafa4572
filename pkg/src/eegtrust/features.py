"""Differential-entropy features per 1-second slice.

Each slice channel is Hann-windowed, zero-padded to 512 points and
transformed; the one-sided spectrum is scaled as a power spectral density so
that summing it over a band (times the bin width) gives the variance of the
band-limited signal.  Under a Gaussian model the band's differential entropy
is then ``0.5 * ln(2 * pi * e * var)``.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import get_window

from .bands import FEATURE_BANDS, BandDef
from .dataset_io import DEFAULT_WEIGHTS, derive_labels, load_manifest, load_trial
from .errors import DataError
from .preprocess import epoch_slices

NFFT = 512
VARIANCE_FLOOR = 1e-10
_LOG_2PIE = math.log(2.0 * math.pi * math.e)


@dataclass
class Spectrum:
    freqs: np.ndarray
    power: np.ndarray  # [..., n_bins], units^2 / Hz
    df: float


@dataclass
class FloorStats:
    """Running count of variances clamped to the floor before the log."""

    count: int = 0
    total: int = 0

    def reset(self):
        self.count = self.total = 0


FLOOR_STATS = FloorStats()


def power_spectrum_512(x, rate=250.0, nfft=NFFT):
    """One-sided PSD of a single 1-second window (or a stack of them, last axis).

    ``sum(power) * df`` equals ``sum((x*w)**2) / sum(w**2)``, the
    window-energy-normalised signal power.
    """
    x = np.asarray(x, dtype=np.float64)
    n = int(round(rate))
    if x.shape[-1] != n:
        raise DataError(f"expected a 1 s window of {n} samples, got {x.shape[-1]}")
    if n > nfft:
        raise DataError(f"window of {n} samples exceeds the {nfft}-point transform")
    w = get_window("hann", n)
    X = np.fft.rfft(x * w, n=nfft, axis=-1)
    p = (X.real ** 2 + X.imag ** 2) * (2.0 / (rate * np.sum(w * w)))
    p[..., 0] /= 2.0
    if nfft % 2 == 0:
        p[..., -1] /= 2.0
    return Spectrum(np.fft.rfftfreq(nfft, 1.0 / rate), p, rate / nfft)


def band_mask(spectrum, band):
    nyq = spectrum.freqs[-1]
    if band.high_hz > nyq + 1e-9:
        raise DataError(f"band {band.name} ({band.low_hz}-{band.high_hz} Hz) exceeds Nyquist {nyq} Hz")
    mask = (spectrum.freqs >= band.low_hz) & (spectrum.freqs < band.high_hz)
    if not mask.any():
        raise DataError(f"band {band.name} contains no frequency bins")
    return mask


def band_variance(spectrum, band):
    """Variance of the ``[low, high)`` Hz component."""
    mask = band_mask(spectrum, band)
    return spectrum.power[..., mask].sum(axis=-1) * spectrum.df


def de_gaussian(sigma_sq, eps=VARIANCE_FLOOR, stats=FLOOR_STATS):
    """``0.5 * ln(2 pi e sigma^2)`` in nats; variances below ``eps`` are clamped."""
    s = np.asarray(sigma_sq, dtype=np.float64)
    low = ~(s > eps)
    n_low = int(np.count_nonzero(low))
    stats.total += s.size
    if n_low:
        stats.count += n_low
        warnings.warn(f"{n_low} band variance(s) below {eps:g} clamped before log", RuntimeWarning, stacklevel=2)
        s = np.where(low, eps, s)
    out = 0.5 * (_LOG_2PIE + np.log(s))
    return float(out) if out.ndim == 0 else out


@dataclass
class DESlice:
    subject_id: str
    trial_index: int
    slice_index: int
    features: np.ndarray  # [n_channels, n_bands]
    label: int | None = None


def de_features(slices, rate=250.0, bands=FEATURE_BANDS, stats=FLOOR_STATS):
    """Vectorised DE for ``[..., n_samples]`` windows -> ``[..., n_bands]``."""
    spec = power_spectrum_512(slices, rate)
    var = np.stack([band_variance(spec, b) for b in bands], axis=-1)
    return de_gaussian(var, stats=stats)


def extract_de(trial, bands=FEATURE_BANDS, label=None, stats=FLOOR_STATS):
    """One :class:`DESlice` per 1 s slice of an epoched trial."""
    rate = trial.meta.sample_rate_hz
    feats = de_features(trial.slices, rate, bands, stats)
    return [
        DESlice(trial.meta.subject_id, trial.meta.trial_index, i, feats[i], label)
        for i in range(len(trial.slices))
    ]


@dataclass
class FeatureTable:
    """DE features for a whole dataset plus slice identities and labels."""

    features: np.ndarray  # [N, n_channels, n_bands]
    subject_ids: np.ndarray
    trial_indices: np.ndarray
    slice_indices: np.ndarray
    labels: np.ndarray
    scores: np.ndarray
    channel_names: tuple
    bands: tuple = tuple(b.name for b in FEATURE_BANDS)
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.labels)

    @property
    def subjects(self):
        return sorted(set(self.subject_ids.tolist()))

    def subset(self, index):
        return FeatureTable(
            self.features[index], self.subject_ids[index], self.trial_indices[index],
            self.slice_indices[index], self.labels[index], self.scores[index],
            self.channel_names, self.bands, dict(self.provenance),
        )

    @classmethod
    def from_slices(cls, slices, channel_names, scores=None, provenance=None):
        if not slices:
            raise DataError("no slices")
        return cls(
            features=np.stack([s.features for s in slices]),
            subject_ids=np.array([s.subject_id for s in slices]),
            trial_indices=np.array([s.trial_index for s in slices], dtype=np.int64),
            slice_indices=np.array([s.slice_index for s in slices], dtype=np.int64),
            labels=np.array([-1 if s.label is None else s.label for s in slices], dtype=np.int64),
            scores=np.asarray(scores if scores is not None else np.full(len(slices), np.nan), dtype=np.float64),
            channel_names=tuple(channel_names),
            provenance=provenance or {},
        )

    def save(self, path):
        """Write ``<path>`` (little-endian float32 table) and ``<path>.json`` (index)."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(np.ascontiguousarray(self.features, dtype="<f4").tobytes())
        index = {
            "format_version": "1.0",
            "shape": list(self.features.shape),
            "channel_names": list(self.channel_names),
            "bands": list(self.bands),
            "provenance": self.provenance,
            "slices": [
                {"subject_id": s, "trial_index": int(t), "slice_index": int(i), "label": int(lab), "score": float(sc)}
                for s, t, i, lab, sc in zip(
                    self.subject_ids.tolist(), self.trial_indices, self.slice_indices, self.labels, self.scores
                )
            ],
        }
        index_path(path).write_text(json.dumps(index, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, path):
        path = Path(path)
        ipath = index_path(path)
        if not path.is_file() or not ipath.is_file():
            raise DataError(f"features not found at {path}")
        try:
            index = json.loads(ipath.read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"feature index {ipath} is not valid JSON: {exc}") from exc
        shape = tuple(index["shape"])
        raw = path.read_bytes()
        if len(raw) != 4 * int(np.prod(shape)):
            raise DataError(f"shape mismatch in {path}: {len(raw)} bytes for shape {shape}")
        feats = np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float64)
        sl = index["slices"]
        if len(sl) != shape[0]:
            raise DataError(f"feature index lists {len(sl)} slices, table has {shape[0]}")
        return cls(
            features=feats,
            subject_ids=np.array([s["subject_id"] for s in sl]),
            trial_indices=np.array([s["trial_index"] for s in sl], dtype=np.int64),
            slice_indices=np.array([s["slice_index"] for s in sl], dtype=np.int64),
            labels=np.array([s["label"] for s in sl], dtype=np.int64),
            scores=np.array([s["score"] for s in sl], dtype=np.float64),
            channel_names=tuple(index["channel_names"]),
            bands=tuple(index["bands"]),
            provenance=index.get("provenance", {}),
        )


def index_path(path):
    path = Path(path)
    return path.with_name(path.name + ".json")


def extract_dataset(root, weights=DEFAULT_WEIGHTS, bands=FEATURE_BANDS, slice_seconds=1.0):
    """DE features for every trial of an (already preprocessed) dataset."""
    manifest = load_manifest(root)
    labels = derive_labels(manifest, weights)
    stats = FloorStats()
    slices, scores = [], []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for e in manifest.entries:
            score, label = labels[e.key]
            trial = epoch_slices(load_trial(manifest, *e.key), slice_seconds)
            new = extract_de(trial, bands, label, stats)
            slices.extend(new)
            scores.extend([score] * len(new))
    provenance = dict(manifest.provenance)
    provenance["extract"] = {
        "source": str(Path(root)),
        "weights": list(weights),
        "bands": [[b.name, b.low_hz, b.high_hz] for b in bands],
        "nfft": NFFT,
        "variance_floor": VARIANCE_FLOOR,
        "floored": stats.count,
    }
    return FeatureTable.from_slices(slices, manifest.channel_names, scores, provenance)
