from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class BandDef:
    name: str
    low_hz: float
    high_hz: float

    def __post_init__(self):
        if not 0 <= self.low_hz < self.high_hz:
            raise ValueError(f"band {self.name}: need 0 <= low < high, got {self.low_hz}, {self.high_hz}")


DELTA = BandDef("delta", 1.0, 3.0)
THETA = BandDef("theta", 4.0, 7.0)
ALPHA = BandDef("alpha", 8.0, 13.0)
BETA = BandDef("beta", 14.0, 30.0)
GAMMA = BandDef("gamma", 31.0, 50.0)

ALL_BANDS = {b.name: b for b in (DELTA, THETA, ALPHA, BETA, GAMMA)}

# Feature bands, in feature-column order.
FEATURE_BANDS = (THETA, ALPHA, BETA, GAMMA)
FEATURE_BAND_NAMES = tuple(b.name for b in FEATURE_BANDS)
