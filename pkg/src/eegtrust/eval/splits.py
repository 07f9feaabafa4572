"""Slice-wise and trial-wise cross-validation plans.

A plan holds, per subject, a list of folds of global slice indices.
Slice-wise folds shuffle a subject's slices freely (slices of one trial land
on both sides); trial-wise folds keep every trial on one side.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from ..seeding import derive_rng

SLICE_WISE = "slice_wise"
TRIAL_WISE = "trial_wise"
MODES = {"slice": SLICE_WISE, "slice_wise": SLICE_WISE, "trial": TRIAL_WISE, "trial_wise": TRIAL_WISE}


def normalize_mode(mode):
    try:
        return MODES[mode]
    except KeyError:
        raise DataError(f"unknown CV mode {mode!r}; use 'slice' or 'trial'") from None


@dataclass
class Fold:
    subject: str
    index: int
    train: np.ndarray
    test: np.ndarray


@dataclass
class SplitPlan:
    mode: str
    seed: int
    folds: list

    def for_subject(self, subject):
        return [f for f in self.folds if f.subject == subject]

    def digest(self):
        h = hashlib.sha256(f"{self.mode}|{self.seed}".encode())
        for f in self.folds:
            h.update(f"|{f.subject}|{f.index}|".encode())
            h.update(np.asarray(f.train, dtype="<i8").tobytes())
            h.update(b"/")
            h.update(np.asarray(f.test, dtype="<i8").tobytes())
        return h.hexdigest()


def _subject_index(table):
    subjects = sorted(set(np.asarray(table.subject_ids).tolist()))
    return subjects, np.asarray(table.subject_ids)


def slicewise_folds(table, seed, n_folds=10):
    """Per-subject shuffle of slices into ``n_folds`` near-equal folds."""
    subjects, sids = _subject_index(table)
    folds = []
    for si, subject in enumerate(subjects):
        idx = np.flatnonzero(sids == subject)
        if len(idx) < n_folds:
            raise DataError(f"subject {subject} has {len(idx)} slices; need at least {n_folds}")
        perm = idx[derive_rng(seed, si, SLICE_WISE).permutation(len(idx))]
        parts = np.array_split(perm, n_folds)
        for k, test in enumerate(parts):
            train = np.concatenate([p for j, p in enumerate(parts) if j != k])
            folds.append(Fold(subject, k, np.sort(train), np.sort(test)))
    return SplitPlan(SLICE_WISE, seed, folds)


def trialwise_folds(table, seed, n_folds=5):
    """Grouped ``n_folds``-fold over trials, label-stratified.

    Each label's trials are shuffled and dealt round-robin over the folds, so
    every trial is tested exactly once and fold sizes differ by at most one.
    """
    subjects, sids = _subject_index(table)
    trials = np.asarray(table.trial_indices)
    labels = np.asarray(table.labels)
    folds = []
    for si, subject in enumerate(subjects):
        in_subj = sids == subject
        trial_ids = np.unique(trials[in_subj])
        if len(trial_ids) < n_folds:
            raise DataError(f"subject {subject} has {len(trial_ids)} trials; need at least {n_folds}")
        trial_label = {}
        for t in trial_ids:
            labs = np.unique(labels[in_subj & (trials == t)])
            if len(labs) != 1:
                raise DataError(f"trial {t} of subject {subject} has mixed slice labels")
            trial_label[t] = int(labs[0])
        rng = derive_rng(seed, si, TRIAL_WISE)
        dealt = []
        for lab in sorted(set(trial_label.values())):
            group = np.array([t for t in trial_ids if trial_label[t] == lab])
            dealt.extend(group[rng.permutation(len(group))].tolist())
        fold_of = {t: pos % n_folds for pos, t in enumerate(dealt)}
        for k in range(n_folds):
            test_trials = [t for t in trial_ids if fold_of[t] == k]
            is_test = in_subj & np.isin(trials, test_trials)
            folds.append(Fold(subject, k, np.flatnonzero(in_subj & ~is_test), np.flatnonzero(is_test)))
    return SplitPlan(TRIAL_WISE, seed, folds)


def make_plan(table, mode, seed, n_folds=None):
    mode = normalize_mode(mode)
    if mode == SLICE_WISE:
        return slicewise_folds(table, seed, n_folds or 10)
    return trialwise_folds(table, seed, n_folds or 5)


def leakage_violations(plan, table):
    """Number of (fold, trial) pairs with slices on both sides of the split."""
    sids, trials = np.asarray(table.subject_ids), np.asarray(table.trial_indices)
    count = 0
    for f in plan.folds:
        train = set(zip(sids[f.train].tolist(), trials[f.train].tolist()))
        test = set(zip(sids[f.test].tolist(), trials[f.test].tolist()))
        count += len(train & test)
    return count


def partition_errors(plan, table):
    """Problems with the plan as a partition: overlap, gaps, or slices tested != once."""
    sids = np.asarray(table.subject_ids)
    problems = []
    tested = np.zeros(len(sids), dtype=int)
    for f in plan.folds:
        if np.intersect1d(f.train, f.test).size:
            problems.append(f"{f.subject} fold {f.index}: train and test overlap")
        members = np.union1d(f.train, f.test)
        expected = np.flatnonzero(sids == f.subject)
        if not np.array_equal(members, expected):
            problems.append(f"{f.subject} fold {f.index}: does not cover the subject's slices exactly")
        tested[f.test] += 1
    if np.any(tested != 1):
        problems.append(f"{int(np.sum(tested != 1))} slices not tested exactly once")
    return problems
