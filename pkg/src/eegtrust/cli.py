"""Command-line entry point: synth, preprocess, extract, train, eval, ablate, report.

Exit codes: 0 success, 1 usage or configuration error, 2 data/validation
error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .dataset_io import DEFAULT_WEIGHTS, SYNTH_PRESETS, SynthSpec, synth_generate, synth_preset
from .errors import ConfigError, DataError, NumericalError
from .eval import ExperimentSettings, ablation_run, canonical_hash, run_experiment, sensitivity_sweep
from .eval.report import ablation_roc_csv, fold_roc_csv, render_markdown
from .features import FeatureTable, extract_dataset
from .models import MODEL_IDS, TrainHyper, ViTConfig, make_model
from .nn import save_checkpoint
from .preprocess import PreprocessOptions, preprocess_dataset

log = logging.getLogger("eegtrust")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3

VIT_KEYS = ("model_dim", "n_heads", "n_blocks", "mlp_dim", "patch_size", "nosp_tokens", "activation", "init_std")
HYPER_KEYS = ("batch_size", "lr", "max_epochs", "early_stop_loss", "dtype")


@dataclass
class RunConfig:
    """Experiment configuration; JSON keys are exactly these field names.

    ``vit`` and ``hyper`` hold overrides of the model and training defaults.
    Paths are not part of the configuration, so the hash identifies the
    experiment rather than where it was run.
    """

    model: str = "vit"
    mode: str = "slice"
    seeds: list = field(default_factory=lambda: [0])
    seed: int = 0
    vit: dict = field(default_factory=dict)
    hyper: dict = field(default_factory=dict)
    knn_k: int = 5
    svm_lambda: float = 1e-4
    n_folds: int | None = None
    weights: list = field(default_factory=lambda: list(DEFAULT_WEIGHTS))
    n_jobs: int = 1
    sweep_dims: list = field(default_factory=lambda: [32, 64, 128])

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        for key in doc:
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
        for section, allowed in (("vit", VIT_KEYS), ("hyper", HYPER_KEYS)):
            for key in doc.get(section, {}):
                if key not in allowed:
                    raise ConfigError(f"unknown config key {section}.{key!r}")
        return cls(**doc)

    def validate(self):
        if self.model not in MODEL_IDS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {', '.join(MODEL_IDS)}")
        if self.mode not in ("slice", "trial", "slice_wise", "trial_wise"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        self.vit_config()
        self.train_hyper()
        return self

    def vit_config(self):
        try:
            return ViTConfig(**self.vit)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def train_hyper(self):
        hyper = TrainHyper(**self.hyper)
        if hyper.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype must be float32 or float64, got {hyper.dtype!r}")
        return hyper

    def settings(self):
        return ExperimentSettings(self.vit_config(), self.train_hyper(), self.knn_k, self.svm_lambda, self.n_folds)

    def to_dict(self):
        return asdict(self)

    def hash(self):
        return canonical_hash(self.to_dict())


def parse_seeds(text):
    """``"0..4"`` (inclusive range), ``"3"`` or ``"0,2,5"``."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            seeds = list(range(int(lo), int(hi) + 1))
        else:
            seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError(f"empty seed list {text!r}")
    return seeds


def parse_band(text):
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"band must look like LOW:HIGH, got {text!r}") from None
    return lo, hi


def parse_floats(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def load_config(args):
    """Config file (if any) overlaid with explicitly given flags."""
    doc = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise DataError(f"config not found at {path}")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    cfg = RunConfig.from_dict(doc)
    for name in ("model", "mode", "seeds", "seed", "knn_k", "svm_lambda", "n_folds", "weights", "n_jobs",
                 "sweep_dims"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    for section, keys in (("vit", VIT_KEYS), ("hyper", HYPER_KEYS)):
        for key in keys:
            value = getattr(args, key, None)
            if value is not None:
                getattr(cfg, section)[key] = value
    return cfg.validate()


def load_features(path):
    return FeatureTable.load(path)


def write_json(path, doc):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _stamp(doc, cfg, features=None):
    doc["config"] = cfg.to_dict()
    doc["config_hash"] = cfg.hash()
    doc["seed"] = cfg.seed
    if features is not None:
        doc["features"] = str(features)
    return doc


# commands


def cmd_synth(args):
    if args.spec:
        spec = SynthSpec.from_dict(json.loads(Path(args.spec).read_text()))
    else:
        spec = synth_preset(args.preset)
    if args.sigma_trial is not None:
        spec = replace(spec, sigma_trial=args.sigma_trial).validate()
    manifest = synth_generate(args.out, args.seed, args.subjects, args.trials, spec, args.duration, args.rate)
    print(f"wrote {len(manifest.entries)} trials to {args.out}")
    return EXIT_OK


def cmd_preprocess(args):
    opts = PreprocessOptions(
        car=not args.no_car,
        band=None if args.skip_filtering else args.band,
        notch_hz=None if args.skip_filtering or args.notch <= 0 else args.notch,
        bandpass_order=args.order,
        notch_q=args.notch_q,
    )
    manifest = preprocess_dataset(args.inp, args.out, opts)
    print(f"preprocessed {len(manifest.entries)} trials into {args.out}")
    return EXIT_OK


def cmd_extract(args):
    weights = args.weights or list(DEFAULT_WEIGHTS)
    table = extract_dataset(args.inp, weights=tuple(weights), slice_seconds=args.slice_seconds)
    table.save(args.out)
    floored = table.provenance["extract"]["floored"]
    print(f"extracted {len(table.labels)} slices to {args.out}" + (f" ({floored} variances floored)" if floored else ""))
    return EXIT_OK


def cmd_train(args):
    cfg = load_config(args)
    table = load_features(args.features)
    if args.subject:
        table = table.subset(np.asarray(table.subject_ids) == args.subject)
        if len(table.labels) == 0:
            raise DataError(f"no slices for subject {args.subject!r}")
    model = make_model(cfg.model, cfg.vit_config(), replace(cfg.train_hyper(), seed=cfg.seed), cfg.knn_k,
                       cfg.svm_lambda, seed=cfg.seed, channel_names=table.channel_names)
    model.fit(table.features, table.labels)
    train_acc = float(np.mean(model.predict(table.features) == table.labels))
    extra = _stamp({"model_id": cfg.model, "train_accuracy": train_acc, "n_train": int(len(table.labels)),
                    "subject": args.subject, "channel_names": list(table.channel_names)}, cfg, args.features)
    save_checkpoint(args.out, model.state_dict(), config=cfg.to_dict(), seed=cfg.seed, extra=extra)
    print(f"trained {cfg.model} on {len(table.labels)} slices (train accuracy {train_acc:.3f}); wrote {args.out}")
    return EXIT_OK


def cmd_eval(args):
    cfg = load_config(args)
    table = load_features(args.features)
    report = run_experiment(cfg.model, table, cfg.mode, cfg.seeds, cfg.settings(), cfg.n_jobs)
    doc = _stamp(report.to_dict(include_predictions=args.predictions), cfg, args.features)
    write_json(args.out, doc)
    if args.roc_csv:
        Path(args.roc_csv).write_text(fold_roc_csv(doc))
    agg = report.aggregate()
    print(f"{cfg.model} {report.mode}: accuracy {agg['accuracy_mean']:.4f} ± {agg['accuracy_std']:.4f}, "
          f"F1 {agg['f1_mean']:.4f} ± {agg['f1_std']:.4f}; wrote {args.out}")
    return EXIT_OK


def cmd_ablate(args):
    cfg = load_config(args)
    table = load_features(args.features)
    ab = ablation_run(table, cfg.mode, cfg.seeds, cfg.settings(), cfg.n_jobs)
    doc = _stamp(ab.to_dict(), cfg, args.features)
    write_json(args.out, doc)
    if args.roc_csv:
        Path(args.roc_csv).write_text(ablation_roc_csv(doc))
    print(f"SP - noSP accuracy gap {100 * ab.mean_gap():+.2f} points ({ab.mode}); wrote {args.out}")
    return EXIT_OK


def _read_report(path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"report not found at {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"report {path} is not valid JSON: {exc}") from None


def cmd_report(args):
    cfg = load_config(args)
    reports, ablations = [], []
    for path in args.inputs:
        doc = _read_report(path)
        if "sp" in doc and "nosp" in doc:
            ablations.append(doc)
        elif "folds" in doc:
            reports.append(doc)
        else:
            raise DataError(f"{path} is neither an eval nor an ablation report")
    sensitivity = None
    if args.features:
        table = load_features(args.features)
        sensitivity = sensitivity_sweep(table, cfg.mode, cfg.seeds, cfg.settings(), cfg.sweep_dims, cfg.n_jobs)
    provenance = {"config_hash": cfg.hash(), "seed": cfg.seed,
                  "inputs": ", ".join(f"{Path(p).name} ({_read_report(p).get('config_hash', '?')[:12]})"
                                      for p in args.inputs)}
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(render_markdown(reports, ablations, sensitivity, provenance))
    stem = out.with_suffix("")
    for doc in reports:
        Path(f"{stem}_roc_{doc['model_id']}_{doc['mode']}.csv").write_text(fold_roc_csv(doc))
    for doc in ablations:
        Path(f"{stem}_roc_ablation_{doc['mode']}.csv").write_text(ablation_roc_csv(doc))
    if sensitivity is not None:
        write_json(f"{stem}_sensitivity.json", _stamp({"rows": sensitivity}, cfg, args.features))
    print(f"wrote {out}")
    return EXIT_OK


# parser


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with code 1 instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_config_flags(p, experiment=True):
    d_vit, d_hyper = ViTConfig(), TrainHyper()
    p.add_argument("--config", help="RunConfig JSON; flags given explicitly override its keys")
    p.add_argument("--features", required=True, help="feature table written by 'extract'")
    p.add_argument("--seed", type=int, help="root seed (default: 0)")
    p.add_argument("--knn-k", dest="knn_k", type=int, help="neighbours for knn (default: 5)")
    p.add_argument("--svm-lambda", dest="svm_lambda", type=float, help="L2 strength for svm (default: 1e-4)")
    g = p.add_argument_group("ViT")
    g.add_argument("--model-dim", dest="model_dim", type=int, help=f"token width D (default: {d_vit.model_dim})")
    g.add_argument("--n-heads", dest="n_heads", type=int, help=f"attention heads (default: {d_vit.n_heads})")
    g.add_argument("--n-blocks", dest="n_blocks", type=int, help=f"encoder blocks (default: {d_vit.n_blocks})")
    g.add_argument("--mlp-dim", dest="mlp_dim", type=int, help=f"MLP hidden width (default: {d_vit.mlp_dim})")
    g.add_argument("--patch-size", dest="patch_size", type=int, help=f"patch side p (default: {d_vit.patch_size})")
    g.add_argument("--nosp-tokens", dest="nosp_tokens", type=int,
                   help=f"tokens for the flat noSP input (default: {d_vit.nosp_tokens})")
    g.add_argument("--activation", choices=("gelu", "relu"), help=f"MLP activation (default: {d_vit.activation})")
    g.add_argument("--init-std", dest="init_std", type=float, help=f"truncated-normal std (default: {d_vit.init_std})")
    g = p.add_argument_group("training")
    g.add_argument("--batch-size", dest="batch_size", type=int, help=f"mini-batch size (default: {d_hyper.batch_size})")
    g.add_argument("--lr", type=float, help=f"Adam learning rate (default: {d_hyper.lr})")
    g.add_argument("--max-epochs", dest="max_epochs", type=int, help=f"epoch budget (default: {d_hyper.max_epochs})")
    g.add_argument("--early-stop-loss", dest="early_stop_loss", type=float,
                   help=f"stop once the epoch loss is below this (default: {d_hyper.early_stop_loss})")
    g.add_argument("--dtype", choices=("float32", "float64"), help=f"training precision (default: {d_hyper.dtype})")
    if experiment:
        g = p.add_argument_group("cross-validation")
        g.add_argument("--mode", choices=("slice", "trial"), help="slice-wise 10-fold or trial-wise 5-fold (default: slice)")
        g.add_argument("--seeds", type=parse_seeds, help="seed list such as 0..4 or 0,2 (default: 0)")
        g.add_argument("--n-folds", dest="n_folds", type=int, help="fold count (default: 10 slice-wise, 5 trial-wise)")
        g.add_argument("--n-jobs", dest="n_jobs", type=int, help="worker processes for folds (default: 1)")


def build_parser():
    parser = _Parser(prog="eegtrust", description="EEG trust recognition pipeline.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("synth", help="generate a synthetic dataset", formatter_class=fmt)
    p.add_argument("--out", required=True, help="dataset root to write")
    p.add_argument("--seed", type=int, default=0, help="root seed")
    p.add_argument("--subjects", type=int, default=2, help="number of subjects")
    p.add_argument("--trials", type=int, default=20, help="trials per subject")
    p.add_argument("--duration", type=float, default=60.0, help="trial length in seconds")
    p.add_argument("--rate", type=float, default=250.0, help="sampling rate in Hz")
    p.add_argument("--preset", choices=sorted(SYNTH_PRESETS), default="strong", help="class structure")
    p.add_argument("--spec", help="SynthSpec JSON file (overrides --preset)")
    p.add_argument("--sigma-trial", dest="sigma_trial", type=float, help="per-trial DE offset std in nats")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="CAR, band-pass and notch filtering", formatter_class=fmt)
    p.add_argument("--in", dest="inp", required=True, help="input dataset root")
    p.add_argument("--out", required=True, help="output dataset root")
    p.add_argument("--no-car", action="store_true", help="skip common average referencing")
    p.add_argument("--band", type=parse_band, default=(0.5, 60.0), help="band-pass edges LOW:HIGH in Hz")
    p.add_argument("--notch", type=float, default=50.0, help="notch frequency in Hz (0 disables)")
    p.add_argument("--order", type=int, default=4, help="Butterworth band-pass order")
    p.add_argument("--notch-q", dest="notch_q", type=float, default=30.0, help="notch quality factor")
    p.add_argument("--skip-filtering", action="store_true", help="only re-reference (for pre-filtered data)")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("extract", help="differential-entropy features per 1 s slice", formatter_class=fmt)
    p.add_argument("--in", dest="inp", required=True, help="(preprocessed) dataset root")
    p.add_argument("--out", required=True, help="feature table path (index written alongside as .json)")
    p.add_argument("--weights", type=parse_floats, help="questionnaire weights, comma separated (default: equal)")
    p.add_argument("--slice-seconds", dest="slice_seconds", type=float, default=1.0, help="slice length")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="fit one model on a feature table and save a checkpoint")
    p.add_argument("--model", choices=MODEL_IDS, help="model id (default: vit)")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--subject", help="train on this subject only (default: all slices)")
    _add_config_flags(p, experiment=False)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="cross-validated evaluation of one model")
    p.add_argument("--model", choices=MODEL_IDS, help="model id (default: vit)")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--roc-csv", dest="roc_csv", help="also write per-fold ROC points as CSV")
    p.add_argument("--predictions", action="store_true", help="keep per-slice test scores in the report")
    _add_config_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="ViT with vs without the spatial representation")
    p.add_argument("--out", required=True, help="ablation JSON path")
    p.add_argument("--roc-csv", dest="roc_csv", help="also write pooled ROC overlays as CSV")
    _add_config_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("report", help="Markdown tables and ROC CSVs from eval/ablate outputs")
    p.add_argument("inputs", nargs="*", help="report JSON files from eval and ablate")
    p.add_argument("--out", required=True, help="Markdown path; CSVs are written next to it")
    p.add_argument("--sweep-dims", dest="sweep_dims", type=lambda s: [int(v) for v in s.split(",")],
                   help="ViT widths for the sensitivity table (default: 32,64,128)")
    _add_config_flags(p)
    # the sensitivity sweep is optional here
    for action in p._actions:
        if action.dest == "features":
            action.required = False
            action.help = "feature table; when given, run the ViT width sensitivity sweep"
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
