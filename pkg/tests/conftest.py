import numpy as np
import pytest

from eegtrust.dataset_io import synth_generate
from eegtrust.features import extract_dataset
from eegtrust.preprocess import preprocess_dataset


def build_table(root, spec, seed=0, n_subjects=2, n_trials=20, duration_s=30, preprocess=True):
    """Synthetic dataset -> (optionally preprocessed) -> DE feature table."""
    raw = root / f"raw{seed}"
    synth_generate(raw, seed, n_subjects, n_trials, spec, duration_s=duration_s)
    src = raw
    if preprocess:
        src = root / f"pre{seed}"
        preprocess_dataset(raw, src)
    return extract_dataset(src)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def record(criterion, passed, detail):
    ACCEPTANCE[criterion] = (None if passed is None else bool(passed), detail)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
        passed, detail = ACCEPTANCE[key]
        status = "SKIP" if passed is None else "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{key} {status}: {detail}")
