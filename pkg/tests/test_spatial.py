import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from eegtrust.errors import DataError
from eegtrust.spatial import CHANNEL_NAMES, ELECTRODE_MAP, export_map, flatten_nosp, to_image, to_sequence


def test_grid_has_64_electrodes_and_17_holes():
    mask = ELECTRODE_MAP.populated_mask()
    assert mask.shape == (9, 9)
    assert mask.sum() == 64 and (~mask).sum() == 17
    assert len(CHANNEL_NAMES) == 64 and len(set(CHANNEL_NAMES)) == 64


@pytest.mark.parametrize("name,pos", [("FP1", (0, 2)), ("FPZ", (0, 4)), ("FP2", (0, 6)), ("CZ", (4, 4)),
                                      ("OZ", (8, 4)), ("T7", (4, 0)), ("T8", (4, 8)), ("F9", (1, 0)),
                                      ("P10", (7, 8)), ("O1", (8, 2))])
def test_anchor_positions(name, pos):
    assert ELECTRODE_MAP.position(name) == pos


def test_lookup_is_case_insensitive():
    assert ELECTRODE_MAP.position("cz") == (4, 4)


def test_midline_column():
    col = [ELECTRODE_MAP.grid[r][4] for r in range(9)]
    assert col == ["FPZ", None, "FZ", "FCZ", "CZ", "CPZ", "PZ", "POZ", "OZ"]


def test_image_places_values_and_zero_fills(rng):
    feats = rng.normal(size=(64, 4))
    img = to_image(feats)
    assert img.shape == (9, 9, 4)
    np.testing.assert_array_equal(img[4, 4], feats[CHANNEL_NAMES.index("CZ")])
    assert np.all(img[~ELECTRODE_MAP.populated_mask()] == 0)


def test_custom_channel_order(rng):
    names = list(reversed(CHANNEL_NAMES))
    feats = rng.normal(size=(64, 2))
    img = to_image(feats, names)
    np.testing.assert_array_equal(img[0, 2], feats[names.index("FP1")])
    np.testing.assert_array_equal(to_sequence(img, names), feats)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 64, 4), elements=st.floats(-1e6, 1e6)))
def test_round_trip_property(feats):
    np.testing.assert_array_equal(to_sequence(to_image(feats), strict=True), feats)


def test_strict_inverse_rejects_unmapped_values(rng):
    img = to_image(rng.normal(size=(64, 4)))
    img[0, 0, 1] = 1.0
    with pytest.raises(DataError, match="unmapped"):
        to_sequence(img, strict=True)
    assert to_sequence(img).shape == (64, 4)


def test_unknown_and_duplicate_channels(rng):
    names = list(CHANNEL_NAMES)
    names[3] = "XYZ"
    with pytest.raises(DataError, match="unknown electrode"):
        to_image(rng.normal(size=(64, 4)), names)
    names[3] = names[4]
    with pytest.raises(DataError, match="duplicate"):
        to_image(rng.normal(size=(64, 4)), names)


def test_shape_mismatch(rng):
    with pytest.raises(DataError):
        to_image(rng.normal(size=(63, 4)))


def test_flatten_is_channel_major(rng):
    feats = rng.normal(size=(2, 64, 4))
    flat = flatten_nosp(feats)
    assert flat.shape == (2, 256)
    np.testing.assert_array_equal(flat[1, 4:8], feats[1, 1])


def test_export_map(tmp_path):
    import json

    doc = json.loads(export_map(tmp_path / "map.json").read_text())
    assert doc["lookup"]["OZ"] == [8, 4]
