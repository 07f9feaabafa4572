"""Cross-validated experiments, the SP/noSP ablation and the width sensitivity sweep."""
from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..errors import DataError
from ..models import TrainHyper, ViTConfig, make_model
from ..seeding import derive_seed
from .metrics import accuracy, auc, f1, roc_curve
from .splits import make_plan, normalize_mode

log = logging.getLogger(__name__)

DEVIATIONS = {
    "svm": "SVM kernel unspecified; a linear SVM (hinge + L2, lambda=1e-4, subgradient descent) is used.",
    "cnn": "CNN architecture unspecified; conv3x3(16)-GELU-conv3x3(32)-GELU-maxpool2-dense(2) on the EEG image.",
    "vit": "ViT width unspecified; run with D={model_dim}, {n_heads} heads, MLP {mlp_dim}, {n_blocks} blocks, patch {patch_size}.",
    "trial_wise": "Trial-wise protocol run as label-stratified grouped 5-fold over trials (each fold is an 80/20 split).",
}


def canonical_hash(obj):
    """SHA-256 of the key-sorted compact JSON encoding."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def features_digest(table):
    h = hashlib.sha256(np.ascontiguousarray(table.features, dtype="<f4").tobytes())
    h.update(np.asarray(table.labels, dtype="<i8").tobytes())
    return h.hexdigest()


@dataclass
class ExperimentSettings:
    """Everything besides the data that determines an experiment's outcome."""

    vit: ViTConfig = field(default_factory=ViTConfig)
    hyper: TrainHyper = field(default_factory=TrainHyper)
    knn_k: int = 5
    svm_lambda: float = 1e-4
    n_folds: int | None = None

    def to_dict(self):
        return {
            "vit": self.vit.to_dict(),
            "hyper": self.hyper.to_dict(),
            "knn_k": self.knn_k,
            "svm_lambda": self.svm_lambda,
            "n_folds": self.n_folds,
        }


@dataclass
class FoldResult:
    seed: int
    subject: str
    fold: int
    n_train: int
    n_test: int
    accuracy: float
    f1: float
    auc: float | None
    roc: list
    epochs: int | None = None
    test_index: list = field(default_factory=list, repr=False)
    scores: list = field(default_factory=list, repr=False)
    preds: list = field(default_factory=list, repr=False)


@dataclass
class CVReport:
    model_id: str
    mode: str
    seeds: list
    config_hash: str
    features_sha256: str
    plan_digests: dict
    folds: list
    settings: dict
    deviations: list

    def subject_metrics(self):
        """Per-subject means over all folds and seeds."""
        out = {}
        for subject in sorted({f.subject for f in self.folds}):
            rows = [f for f in self.folds if f.subject == subject]
            aucs = [f.auc for f in rows if f.auc is not None]
            out[subject] = {
                "accuracy": float(np.mean([f.accuracy for f in rows])),
                "f1": float(np.mean([f.f1 for f in rows])),
                "auc": float(np.mean(aucs)) if aucs else None,
            }
        return out

    def aggregate(self):
        """Unweighted mean and population std across subjects."""
        per = self.subject_metrics()
        out = {}
        for key in ("accuracy", "f1", "auc"):
            vals = [m[key] for m in per.values() if m[key] is not None]
            out[f"{key}_mean"] = float(np.mean(vals)) if vals else None
            out[f"{key}_std"] = float(np.std(vals)) if vals else None
        return out

    def seed_accuracy(self):
        """Mean accuracy across subjects, per seed."""
        out = {}
        for seed in self.seeds:
            per = {}
            for f in self.folds:
                if f.seed == seed:
                    per.setdefault(f.subject, []).append(f.accuracy)
            out[seed] = float(np.mean([np.mean(v) for v in per.values()]))
        return out

    def to_dict(self, include_predictions=False):
        folds = []
        for f in self.folds:
            d = asdict(f)
            if not include_predictions:
                for k in ("test_index", "scores", "preds"):
                    d.pop(k)
            folds.append(d)
        return {
            "model_id": self.model_id,
            "mode": self.mode,
            "seeds": list(self.seeds),
            "config_hash": self.config_hash,
            "features_sha256": self.features_sha256,
            "plan_digests": {str(k): v for k, v in self.plan_digests.items()},
            "settings": self.settings,
            "deviations": self.deviations,
            "subjects": self.subject_metrics(),
            "aggregate": self.aggregate(),
            "seed_accuracy": {str(k): v for k, v in self.seed_accuracy().items()},
            "folds": folds,
        }

    @classmethod
    def from_dict(cls, d):
        folds = [FoldResult(**f) for f in d["folds"]]
        return cls(
            d["model_id"], d["mode"], d["seeds"], d["config_hash"], d["features_sha256"],
            {int(k): v for k, v in d["plan_digests"].items()}, folds, d["settings"], d["deviations"],
        )


def _deviations(model_id, mode, settings):
    out = []
    if model_id in ("svm", "cnn"):
        out.append(DEVIATIONS[model_id])
    if model_id.startswith("vit"):
        out.append(DEVIATIONS["vit"].format(**settings.vit.to_dict()))
    if mode == "trial_wise":
        out.append(DEVIATIONS["trial_wise"])
    return out


def _run_fold(args):
    model_id, features, labels, fold, seed, si, settings, channel_names = args
    hyper = replace(settings.hyper, seed=derive_seed(seed, si, fold.index, "shuffle"))
    model = make_model(
        model_id, settings.vit, hyper, settings.knn_k, settings.svm_lambda,
        seed=derive_seed(seed, si, fold.index, "init"), channel_names=channel_names,
    )
    model.fit(features[fold.train], labels[fold.train])
    preds, scores = model.predict_with_score(features[fold.test])
    y = labels[fold.test]
    try:
        roc = roc_curve(scores, y)
        fold_auc = auc(roc)
    except DataError:
        roc, fold_auc = np.zeros((0, 2)), None
    epochs = model.log.epochs if getattr(model, "log", None) is not None else None
    return FoldResult(
        seed=seed, subject=fold.subject, fold=fold.index, n_train=len(fold.train), n_test=len(fold.test),
        accuracy=accuracy(preds, y), f1=f1(preds, y), auc=fold_auc, roc=roc.tolist(), epochs=epochs,
        test_index=fold.test.tolist(), scores=scores.tolist(), preds=preds.tolist(),
    )


def run_experiment(model_id, table, mode, seeds=(0,), settings=None, n_jobs=1, plans=None):
    """Train/evaluate ``model_id`` on every subject and fold for each seed.

    Every subject uses identical settings.  ``plans`` (seed -> SplitPlan) may
    be supplied to share folds between experiments.
    """
    settings = settings or ExperimentSettings()
    mode = normalize_mode(mode)
    seeds = [int(s) for s in seeds]
    labels = np.asarray(table.labels)
    if np.any(labels < 0):
        raise DataError("feature table has unlabelled slices")
    subjects = sorted(set(np.asarray(table.subject_ids).tolist()))
    plans = dict(plans or {})
    jobs = []
    for seed in seeds:
        if seed not in plans:
            plans[seed] = make_plan(table, mode, seed, settings.n_folds)
        for fold in plans[seed].folds:
            si = subjects.index(fold.subject)
            jobs.append((model_id, table.features, labels, fold, seed, si, settings, tuple(table.channel_names)))
    if n_jobs and n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            results = list(ex.map(_run_fold, jobs))
    else:
        results = []
        for job in jobs:
            results.append(_run_fold(job))
            r = results[-1]
            log.info("%s %s seed=%d %s fold %d: acc=%.3f", model_id, mode, r.seed, r.subject, r.fold, r.accuracy)
    results.sort(key=lambda r: (r.seed, r.subject, r.fold))
    config = {"model_id": model_id, "mode": mode, "seeds": seeds, "settings": settings.to_dict()}
    return CVReport(
        model_id=model_id,
        mode=mode,
        seeds=seeds,
        config_hash=canonical_hash(config),
        features_sha256=features_digest(table),
        plan_digests={s: plans[s].digest() for s in seeds},
        folds=results,
        settings=settings.to_dict(),
        deviations=_deviations(model_id, mode, settings),
    )


def pooled_roc(report, table, subject):
    """ROC of one subject's concatenated test scores (all folds and seeds)."""
    rows = [f for f in report.folds if f.subject == subject]
    if not rows or not rows[0].test_index:
        raise DataError("report carries no per-slice predictions")
    scores = np.concatenate([f.scores for f in rows])
    labels = np.concatenate([np.asarray(table.labels)[f.test_index] for f in rows])
    return roc_curve(scores, labels)


@dataclass
class AblationReport:
    mode: str
    sp: CVReport
    nosp: CVReport
    rocs: dict

    @property
    def plans_match(self):
        return self.sp.plan_digests == self.nosp.plan_digests

    def deltas(self):
        """Per-subject SP minus noSP accuracy and F1."""
        a, b = self.sp.subject_metrics(), self.nosp.subject_metrics()
        return {s: {"accuracy": a[s]["accuracy"] - b[s]["accuracy"], "f1": a[s]["f1"] - b[s]["f1"]} for s in a}

    def mean_gap(self):
        return float(self.sp.aggregate()["accuracy_mean"] - self.nosp.aggregate()["accuracy_mean"])

    def to_dict(self):
        return {
            "mode": self.mode,
            "plans_match": self.plans_match,
            "accuracy_gap": self.mean_gap(),
            "deltas": self.deltas(),
            "sp": self.sp.to_dict(),
            "nosp": self.nosp.to_dict(),
            "roc": self.rocs,
        }


def ablation_run(table, mode, seeds=(0,), settings=None, n_jobs=1):
    """ViT with and without the spatial representation on identical folds and seeds."""
    settings = settings or ExperimentSettings()
    mode = normalize_mode(mode)
    plans = {int(s): make_plan(table, mode, int(s), settings.n_folds) for s in seeds}
    sp = run_experiment("vit", table, mode, seeds, settings, n_jobs, plans)
    nosp = run_experiment("vit-nosp", table, mode, seeds, settings, n_jobs, plans)
    rocs = {}
    for name, rep in (("sp", sp), ("nosp", nosp)):
        rocs[name] = {}
        for subject in sorted(set(np.asarray(table.subject_ids).tolist())):
            try:
                rocs[name][subject] = pooled_roc(rep, table, subject).tolist()
            except DataError:
                rocs[name][subject] = []
    return AblationReport(mode, sp, nosp, rocs)


def sensitivity_sweep(table, mode, seeds=(0,), settings=None, dims=(32, 64, 128), n_jobs=1):
    """ViT accuracy/F1 over model widths; MLP width follows as 2*D."""
    settings = settings or ExperimentSettings()
    rows = []
    for d in dims:
        vit = replace(settings.vit, model_dim=int(d), mlp_dim=2 * int(d))
        rep = run_experiment("vit", table, mode, seeds, replace(settings, vit=vit), n_jobs)
        agg = rep.aggregate()
        rows.append({"model_dim": int(d), "mlp_dim": 2 * int(d), **agg, "config_hash": rep.config_hash})
    return rows
