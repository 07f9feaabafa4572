"""Electrode-grid mapping of per-channel features (the 9x9 "EEG image").

Each of the 64 electrodes occupies one cell of a 9x9 grid laid out after the
scalp topology; the 17 remaining cells are structurally empty and stay zero.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

GRID_SIZE = 9

# Row-major scalp layout; None marks a cell without an electrode.
_GRID = (
    (None, None, "FP1", None, "FPZ", None, "FP2", None, None),
    ("F9", "AF7", "AF3", None, None, None, "AF4", "AF8", "F10"),
    ("F7", "F5", "F3", "F1", "FZ", "F2", "F4", "F6", "F8"),
    ("FT7", "FC5", "FC3", "FC1", "FCZ", "FC2", "FC4", "FC6", "FT8"),
    ("T7", "C5", "C3", "C1", "CZ", "C2", "C4", "C6", "T8"),
    ("TP7", "CP5", "CP3", "CP1", "CPZ", "CP2", "CP4", "CP6", "TP8"),
    ("P7", "P5", "P3", "P1", "PZ", "P2", "P4", "P6", "P8"),
    ("P9", "PO7", "PO3", None, "POZ", None, "PO4", "PO8", "P10"),
    (None, None, "O1", None, "OZ", None, "O2", None, None),
)

# Default channel order: the grid read row by row.
CHANNEL_NAMES = tuple(name for row in _GRID for name in row if name is not None)


@dataclass(frozen=True)
class ElectrodeMap:
    grid: tuple
    lookup: dict = field(hash=False)

    @property
    def size(self):
        return len(self.grid)

    def position(self, name):
        try:
            return self.lookup[name.upper()]
        except KeyError:
            raise DataError(f"unknown electrode {name!r}") from None

    def populated_mask(self):
        return np.array([[cell is not None for cell in row] for row in self.grid])

    def to_json(self):
        return {
            "size": self.size,
            "grid": [list(row) for row in self.grid],
            "lookup": {k: list(v) for k, v in self.lookup.items()},
        }


def build_map():
    lookup = {}
    for r, row in enumerate(_GRID):
        for c, name in enumerate(row):
            if name is not None:
                lookup[name] = (r, c)
    return ElectrodeMap(grid=_GRID, lookup=lookup)


ELECTRODE_MAP = build_map()


def _positions(channel_names, emap):
    names = [n.upper() for n in channel_names]
    if len(set(names)) != len(names):
        dup = sorted({n for n in names if names.count(n) > 1})
        raise DataError(f"duplicate channel names: {', '.join(dup)}")
    pos = np.array([emap.position(n) for n in names], dtype=np.int64).reshape(-1, 2)
    return pos[:, 0], pos[:, 1]


def to_image(features, channel_names=CHANNEL_NAMES, emap=ELECTRODE_MAP):
    """Scatter ``[..., n_channels, d_f]`` features onto ``[..., 9, 9, d_f]``.

    Leading batch axes are carried through unchanged.
    """
    features = np.asarray(features)
    if features.ndim < 2 or features.shape[-2] != len(channel_names):
        raise DataError(f"features shape {features.shape} does not match {len(channel_names)} channels")
    rows, cols = _positions(channel_names, emap)
    lead, d_f = features.shape[:-2], features.shape[-1]
    image = np.zeros((*lead, emap.size, emap.size, d_f), dtype=features.dtype)
    image[..., rows, cols, :] = features
    return image


def to_sequence(image, channel_names=CHANNEL_NAMES, strict=False, emap=ELECTRODE_MAP):
    """Gather ``[..., 9, 9, d_f]`` back to ``[..., n_channels, d_f]``.

    In ``strict`` mode a nonzero value in any unmapped cell is an error.
    """
    image = np.asarray(image)
    if image.ndim < 3 or image.shape[-3:-1] != (emap.size, emap.size):
        raise DataError(f"image shape {image.shape} is not [..., {emap.size}, {emap.size}, d_f]")
    if strict:
        empty = ~emap.populated_mask()
        if np.any(image[..., empty, :] != 0):
            raise DataError("value at unmapped position")
    rows, cols = _positions(channel_names, emap)
    return image[..., rows, cols, :].copy()


def flatten_nosp(features):
    """Channel-major flattening ``[..., C, d_f] -> [..., C*d_f]`` (no spatial layout)."""
    features = np.asarray(features)
    return features.reshape(*features.shape[:-2], features.shape[-2] * features.shape[-1])


def export_map(path, emap=ELECTRODE_MAP):
    path = Path(path)
    path.write_text(json.dumps(emap.to_json(), indent=2))
    return path
