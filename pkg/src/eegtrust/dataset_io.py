"""On-disk dataset layout, trust labels and the synthetic generator.

Layout of a dataset root::

    manifest.json          subjects -> trials (metadata + payload path)
    channels.json          ordered list of electrode labels
    subXX/trialYY.f32      little-endian float32, channel-major

Labels are trial-level: the three questionnaire scores are averaged with
fixed weights and compared against a per-subject threshold (the median of
that subject's trial scores by default).
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .bands import ALL_BANDS
from .errors import ConfigError, DataError, ManifestError, NonFiniteError, ShapeMismatchError
from .seeding import derive_rng
from .spatial import CHANNEL_NAMES, ELECTRODE_MAP, GRID_SIZE

FORMAT_VERSION = "1.0"
MANIFEST_NAME = "manifest.json"
CHANNELS_NAME = "channels.json"
ROBOT_ABILITIES = ("HAR", "MAR", "LAR")
DEFAULT_WEIGHTS = (1 / 3, 1 / 3, 1 / 3)


@dataclass(frozen=True)
class TrialMeta:
    subject_id: str
    trial_index: int
    layout: int = 1
    robot_ability: str = "HAR"
    scores: tuple = (3, 3, 3)
    sample_rate_hz: float = 250.0

    def validate(self):
        if not isinstance(self.trial_index, int) or self.trial_index < 0:
            raise ManifestError(f"trial_index must be a non-negative integer, got {self.trial_index!r}", "trial_index")
        if not 1 <= int(self.layout) <= 5:
            raise ManifestError(f"layout must be in 1..5, got {self.layout!r}", "layout")
        if self.robot_ability not in ROBOT_ABILITIES:
            raise ManifestError(f"robot_ability must be one of {ROBOT_ABILITIES}, got {self.robot_ability!r}", "robot_ability")
        if len(self.scores) != 3 or any(not 1 <= s <= 5 for s in self.scores):
            raise ManifestError(f"scores must be three Likert values in 1..5, got {self.scores!r}", "scores")
        if not self.sample_rate_hz > 0:
            raise ManifestError(f"sample_rate_hz must be positive, got {self.sample_rate_hz!r}", "sample_rate_hz")
        return self


@dataclass
class RawRecording:
    meta: TrialMeta
    data: np.ndarray
    channel_names: tuple = CHANNEL_NAMES
    provenance: dict = field(default_factory=dict)

    @property
    def n_channels(self):
        return self.data.shape[0]

    @property
    def n_samples(self):
        return self.data.shape[1]

    @property
    def sample_rate(self):
        return self.meta.sample_rate_hz

    def with_data(self, data, **provenance):
        prov = dict(self.provenance)
        prov.update(provenance)
        return RawRecording(self.meta, data, self.channel_names, prov)


@dataclass(frozen=True)
class ManifestEntry:
    meta: TrialMeta
    file: str
    n_channels: int
    n_samples: int
    label: int | None = None

    @property
    def key(self):
        return (self.meta.subject_id, self.meta.trial_index)


@dataclass
class DatasetManifest:
    root: Path
    entries: list
    channel_names: tuple = CHANNEL_NAMES
    format_version: str = FORMAT_VERSION
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.root = Path(self.root)
        self.entries = sorted(self.entries, key=lambda e: (e.meta.subject_id, e.meta.trial_index))
        seen = set()
        for e in self.entries:
            if e.key in seen:
                raise ManifestError(f"duplicate trial identity {e.key}", "trial_index")
            seen.add(e.key)

    @property
    def subjects(self):
        return sorted({e.meta.subject_id for e in self.entries})

    def entry(self, subject_id, trial_index):
        for e in self.entries:
            if e.key == (subject_id, trial_index):
                return e
        raise DataError(f"no trial ({subject_id!r}, {trial_index}) in manifest")

    def to_json(self):
        subjects = {}
        for e in self.entries:
            m = e.meta
            item = {
                "trial_index": m.trial_index,
                "layout": m.layout,
                "robot_ability": m.robot_ability,
                "scores": list(m.scores),
                "file": e.file,
                "n_channels": e.n_channels,
                "n_samples": e.n_samples,
                "sample_rate_hz": m.sample_rate_hz,
            }
            if e.label is not None:
                item["label"] = e.label
            subjects.setdefault(m.subject_id, []).append(item)
        out = {
            "format_version": self.format_version,
            "subjects": [{"subject_id": s, "trials": t} for s, t in subjects.items()],
        }
        if self.provenance:
            out["provenance"] = self.provenance
        return out


def _require(obj, key, where, types=None):
    if not isinstance(obj, dict) or key not in obj:
        raise ManifestError(f"missing required field in {where}", key)
    value = obj[key]
    if types is not None and not isinstance(value, types):
        raise ManifestError(f"field has wrong type in {where}: {type(value).__name__}", key)
    return value


def _number(value, key, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ManifestError(f"expected a number in {where}", key)
    return value


def parse_manifest(doc, root, channel_names=CHANNEL_NAMES, check_files=True):
    version = _require(doc, "format_version", "manifest", str)
    if version.split(".")[0] != FORMAT_VERSION.split(".")[0]:
        raise ManifestError(f"unsupported format_version {version!r}", "format_version")
    subjects = _require(doc, "subjects", "manifest", list)
    root = Path(root)
    entries, missing = [], []
    for si, subj in enumerate(subjects):
        where = f"subjects[{si}]"
        sid = _require(subj, "subject_id", where, str)
        trials = _require(subj, "trials", where, list)
        for ti, tr in enumerate(trials):
            w = f"{where}.trials[{ti}]"
            tidx = _require(tr, "trial_index", w, int)
            scores = _require(tr, "scores", w, list)
            for s in scores:
                _number(s, "scores", w)
            rate = _number(_require(tr, "sample_rate_hz", w), "sample_rate_hz", w)
            meta = TrialMeta(
                subject_id=sid,
                trial_index=tidx,
                layout=_require(tr, "layout", w, int),
                robot_ability=_require(tr, "robot_ability", w, str),
                scores=tuple(scores),
                sample_rate_hz=float(rate),
            ).validate()
            rel = _require(tr, "file", w, str)
            n_ch = _require(tr, "n_channels", w, int)
            n_s = _require(tr, "n_samples", w, int)
            if n_ch != len(channel_names):
                raise ManifestError(f"{w}: n_channels {n_ch} != {len(channel_names)} channel names", "n_channels")
            label = tr.get("label")
            if label is not None and label not in (0, 1):
                raise ManifestError(f"{w}: label must be 0 or 1", "label")
            if check_files and not (root / rel).is_file():
                missing.append(str(root / rel))
            entries.append(ManifestEntry(meta, rel, n_ch, n_s, label))
    if missing:
        raise DataError("missing trial files: " + ", ".join(missing))
    return DatasetManifest(root, entries, tuple(channel_names), version, doc.get("provenance", {}))


def _read_json(path, what):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise DataError(f"{what} not found at {path}") from None
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{what} at {path} is not valid JSON: {exc}") from exc


def validate_channel_names(names):
    names = tuple(str(n).upper() for n in names)
    if len(set(names)) != len(names):
        raise DataError("channel names are not unique")
    for n in names:
        ELECTRODE_MAP.position(n)
    return names


def load_manifest(root):
    """Read and validate ``manifest.json`` (and ``channels.json``) under ``root``."""
    root = Path(root)
    doc = _read_json(root / MANIFEST_NAME, "manifest")
    ch_path = root / CHANNELS_NAME
    names = validate_channel_names(_read_json(ch_path, "channel list")) if ch_path.exists() else CHANNEL_NAMES
    return parse_manifest(doc, root, names)


def write_manifest(manifest, root=None):
    root = Path(root or manifest.root)
    root.mkdir(parents=True, exist_ok=True)
    (root / MANIFEST_NAME).write_text(json.dumps(manifest.to_json(), indent=1) + "\n")
    (root / CHANNELS_NAME).write_text(json.dumps(list(manifest.channel_names)) + "\n")


def trial_relpath(subject_id, trial_index):
    return f"{subject_id}/trial{trial_index:02d}.f32"


def write_trial(root, rec, rel=None):
    """Write ``rec.data`` as little-endian float32; returns its manifest entry."""
    rel = rel or trial_relpath(rec.meta.subject_id, rec.meta.trial_index)
    path = Path(root) / rel
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.ascontiguousarray(rec.data, dtype="<f4")
    path.write_bytes(data.tobytes(order="C"))
    return ManifestEntry(rec.meta, rel, data.shape[0], data.shape[1])


def read_payload(path, n_channels, n_samples):
    raw = Path(path).read_bytes()
    expected = n_channels * n_samples * 4
    if len(raw) != expected:
        raise ShapeMismatchError(
            f"shape mismatch in {path}: {len(raw)} bytes, expected {expected} for {n_channels}x{n_samples} float32"
        )
    data = np.frombuffer(raw, dtype="<f4").reshape(n_channels, n_samples)
    bad = ~np.isfinite(data)
    if bad.any():
        c, s = np.argwhere(bad)[0]
        raise NonFiniteError(f"non-finite sample in {path} at channel {c} ({n_channels} channels), sample {s}")
    return data.astype(np.float32)


def load_trial(manifest, subject_id, trial_index):
    e = manifest.entry(subject_id, trial_index)
    data = read_payload(manifest.root / e.file, e.n_channels, e.n_samples)
    return RawRecording(e.meta, data, manifest.channel_names, dict(manifest.provenance))


# -- labels -----------------------------------------------------------------

def label_from_scores(scores, weights=DEFAULT_WEIGHTS, threshold=3.0):
    """Weighted questionnaire score and the binary label ``score >= threshold``."""
    scores = [float(s) for s in scores]
    weights = [float(w) for w in weights]
    if len(scores) != 3 or len(weights) != 3:
        raise DataError("expected three scores and three weights")
    if any(w < 0 for w in weights) or abs(sum(weights) - 1.0) > 1e-9:
        raise ConfigError(f"weights must be nonnegative and sum to 1, got {weights}")
    if any(not 1 <= s <= 5 for s in scores):
        raise DataError(f"scores must lie in [1, 5], got {scores}")
    score = math.fsum(w * s for w, s in zip(weights, scores))
    return score, int(score >= threshold)


def subject_threshold(trial_scores):
    """Median of one subject's weighted trial scores."""
    scores = np.asarray(list(trial_scores), dtype=np.float64)
    if scores.size == 0:
        raise DataError("no trial scores to threshold")
    if scores.size < 2:
        raise DataError("need at least two trials to set a subject threshold")
    if np.all(scores == scores[0]):
        warnings.warn("all trial scores are equal; every trial is labelled trust", RuntimeWarning, stacklevel=2)
    return float(np.median(scores))


def derive_labels(manifest, weights=DEFAULT_WEIGHTS):
    """``{(subject, trial): (score, label)}``; explicit manifest labels take precedence."""
    out = {}
    for sid in manifest.subjects:
        entries = [e for e in manifest.entries if e.meta.subject_id == sid]
        scores = [label_from_scores(e.meta.scores, weights)[0] for e in entries]
        thr = subject_threshold(scores) if len(entries) >= 2 else None
        for e, s in zip(entries, scores):
            if e.label is not None:
                out[e.key] = (s, int(e.label))
            elif thr is None:
                raise DataError(f"subject {sid} has a single trial and no explicit label")
            else:
                out[e.key] = label_from_scores(e.meta.scores, weights, thr)
    return out


# -- synthetic generator --------------------------------------------------------

@dataclass
class RovingPattern:
    """A 3x3 power-gain kernel placed at a random patch-aligned grid position.

    ``placement`` is ``"trial"`` (one position per trial) or ``"slice"`` (a new
    position every second).  The distrust class receives the reciprocal
    kernel when ``antisymmetric`` is set, otherwise no pattern.
    """

    kernel: list
    bands: tuple = ("alpha",)
    placement: str = "slice"
    antisymmetric: bool = True
    anchors: list | None = None


@dataclass
class SynthSpec:
    """Class structure of a synthetic dataset.

    All multipliers act on band *power* of the trust class.  ``spatial_mask``
    is a 9x9 grid of per-electrode power multipliers applied to
    ``mask_bands``; ``sigma_trial`` is the standard deviation (in nats of
    differential entropy) of a per-trial, per-channel, per-band offset shared
    by every slice of the trial.
    """

    band_power: dict = field(default_factory=lambda: {"theta": 6.0, "alpha": 8.0, "beta": 3.0, "gamma": 1.5})
    class_band_multipliers: dict = field(default_factory=dict)
    spatial_mask: list | None = None
    mask_bands: tuple = ("alpha",)
    pattern: RovingPattern | None = None
    sigma_trial: float = 0.0
    noise_floor: float = 0.0

    def validate(self):
        for name in list(self.band_power) + list(self.class_band_multipliers) + list(self.mask_bands):
            if name not in ALL_BANDS:
                raise ConfigError(f"unknown band {name!r}")
        if any(v < 0 for v in self.band_power.values()) or any(v <= 0 for v in self.class_band_multipliers.values()):
            raise ConfigError("band powers must be >= 0 and multipliers > 0")
        if self.spatial_mask is not None and np.shape(self.spatial_mask) != (GRID_SIZE, GRID_SIZE):
            raise ConfigError(f"spatial_mask must be {GRID_SIZE}x{GRID_SIZE}")
        if self.pattern is not None:
            if np.shape(self.pattern.kernel) != (3, 3):
                raise ConfigError("pattern kernel must be 3x3")
            if self.pattern.placement not in ("trial", "slice"):
                raise ConfigError("pattern placement must be 'trial' or 'slice'")
        if self.sigma_trial < 0 or self.noise_floor < 0:
            raise ConfigError("sigma_trial and noise_floor must be nonnegative")
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if d.get("pattern") is not None:
            pat = dict(d["pattern"])
            pat["bands"] = tuple(pat.get("bands", ("alpha",)))
            d["pattern"] = RovingPattern(**pat)
        if "mask_bands" in d:
            d["mask_bands"] = tuple(d["mask_bands"])
        return cls(**d).validate()


# Patch-aligned 3x3 anchors whose centre cell holds an electrode.
DEFAULT_ANCHORS = [(r, c) for r in (0, 3, 6) for c in (0, 3, 6) if ELECTRODE_MAP.grid[r + 1][c + 1] is not None]


def _band_noise(rng, band, n_channels, n_samples, rate):
    """Unit-variance Gaussian noise confined to ``[low, high)`` Hz."""
    freqs = np.fft.rfftfreq(n_samples, 1.0 / rate)
    mask = (freqs >= band.low_hz) & (freqs < band.high_hz)
    nb = int(mask.sum())
    if nb == 0:
        raise ConfigError(f"band {band.name} has no frequency bins")
    spec = np.zeros((n_channels, freqs.size), dtype=np.complex128)
    spec[:, mask] = rng.normal(size=(n_channels, nb)) + 1j * rng.normal(size=(n_channels, nb))
    x = np.fft.irfft(spec, n=n_samples, axis=1)
    # unscaled time variance is 4 * nb / n^2
    return x * (n_samples / math.sqrt(4.0 * nb))


def _grid_positions(channel_names):
    return np.array([ELECTRODE_MAP.position(n) for n in channel_names])


def synth_trial(spec, label, rng, duration_s=60, rate=250.0, channel_names=CHANNEL_NAMES):
    """One synthetic ``[n_channels, n_samples]`` recording for class ``label``."""
    n_ch = len(channel_names)
    n = int(round(duration_s * rate))
    slice_len = int(round(rate))
    n_slices = max(1, n // slice_len)
    pos = _grid_positions(channel_names)
    data = np.zeros((n_ch, n))
    # slice index of every sample; trailing partial slice reuses the last gains
    sample_slice = np.minimum(np.arange(n) // slice_len, n_slices - 1)
    trial_offsets = {}
    for name in ALL_BANDS:
        trial_offsets[name] = rng.normal(0.0, 1.0, size=n_ch) * spec.sigma_trial
    pattern_anchors = None
    if spec.pattern is not None:
        anchors = spec.pattern.anchors or DEFAULT_ANCHORS
        count = 1 if spec.pattern.placement == "trial" else n_slices
        pattern_anchors = [tuple(anchors[i]) for i in rng.integers(0, len(anchors), size=count)]
    for name, base in spec.band_power.items():
        band = ALL_BANDS[name]
        noise = _band_noise(rng, band, n_ch, n, rate)
        power = np.full((n_ch, n_slices), float(base))
        if label == 1 and name in spec.class_band_multipliers:
            power *= spec.class_band_multipliers[name]
        if spec.spatial_mask is not None and label == 1 and name in spec.mask_bands:
            mask = np.asarray(spec.spatial_mask, dtype=np.float64)
            power *= mask[pos[:, 0], pos[:, 1]][:, None]
        if spec.pattern is not None and name in spec.pattern.bands:
            kernel = np.asarray(spec.pattern.kernel, dtype=np.float64)
            if label == 0:
                kernel = 1.0 / kernel if spec.pattern.antisymmetric else np.ones_like(kernel)
            for s in range(n_slices):
                r0, c0 = pattern_anchors[0 if len(pattern_anchors) == 1 else s]
                dr, dc = pos[:, 0] - r0, pos[:, 1] - c0
                inside = (dr >= 0) & (dr < 3) & (dc >= 0) & (dc < 3)
                power[inside, s] *= kernel[dr[inside], dc[inside]]
        amp = np.sqrt(power) * np.exp(trial_offsets[name])[:, None]
        data += amp[:, sample_slice] * noise
    if spec.noise_floor > 0:
        data += rng.normal(0.0, math.sqrt(spec.noise_floor), size=data.shape)
    return data


def _synth_scores(rng, label):
    lo, hi = (4, 5) if label == 1 else (1, 2)
    return tuple(int(v) for v in rng.integers(lo, hi + 1, size=3))


def synth_generate(root, seed, n_subjects, n_trials_per_subject, spec=None, duration_s=60, rate=250.0,
                   channel_names=CHANNEL_NAMES):
    """Write a synthetic dataset under ``root`` and return its manifest.

    Each subject gets ``ceil(n/2)`` trust trials; questionnaire scores are
    drawn so that the median-threshold rule recovers the generating labels.
    """
    spec = (spec or SynthSpec()).validate()
    if n_subjects < 1 or n_trials_per_subject < 1:
        raise ConfigError("need at least one subject and one trial")
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for si in range(n_subjects):
        sid = f"sub{si + 1:02d}"
        n_trust = (n_trials_per_subject + 1) // 2
        labels = np.zeros(n_trials_per_subject, dtype=int)
        labels[:n_trust] = 1
        labels = derive_rng(seed, si, "labels").permutation(labels)
        for ti in range(n_trials_per_subject):
            rng = derive_rng(seed, si, ti, "trial")
            meta = TrialMeta(
                subject_id=sid,
                trial_index=ti,
                layout=1 + ti * 5 // n_trials_per_subject,
                robot_ability=ROBOT_ABILITIES[ti % 3],
                scores=_synth_scores(rng, int(labels[ti])),
                sample_rate_hz=float(rate),
            )
            data = synth_trial(spec, int(labels[ti]), rng, duration_s, rate, channel_names)
            entries.append(write_trial(root, RawRecording(meta, data, tuple(channel_names))))
    provenance = {"generator": "synth", "seed": seed, "spec": spec.to_dict(), "duration_s": duration_s}
    manifest = DatasetManifest(root, entries, tuple(channel_names), FORMAT_VERSION, provenance)
    write_manifest(manifest, root)
    return manifest


def _single_channel_mask(row=4, col=4, gain=10.0):
    mask = [[1.0] * GRID_SIZE for _ in range(GRID_SIZE)]
    mask[row][col] = gain
    return mask


# Named generator settings used by the CLI and the acceptance checks.
SYNTH_PRESETS = {
    # trust class carries twice the alpha power on every channel
    "strong": lambda: SynthSpec(class_band_multipliers={"alpha": 2.0}),
    # no class effect at all
    "null": lambda: SynthSpec(),
    # moderate class effect plus per-trial DE offsets shared by a trial's slices
    "protocol": lambda: SynthSpec(class_band_multipliers={"alpha": 1.3}, sigma_trial=0.3),
    # zero-mean log-gain 3x3 checkerboard roving over patch-aligned positions
    "spatial": lambda: SynthSpec(pattern=RovingPattern(
        kernel=[[2.0, 0.5, 2.0], [0.5, 2.0, 0.5], [2.0, 0.5, 2.0]], bands=("alpha",), placement="slice")),
    # one electrode (CZ) carries the whole class effect in every band
    "single": lambda: SynthSpec(spatial_mask=_single_channel_mask(),
                                mask_bands=("theta", "alpha", "beta", "gamma")),
}


def synth_preset(name):
    try:
        return SYNTH_PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown synthetic preset {name!r}; choose from {', '.join(SYNTH_PRESETS)}") from None
