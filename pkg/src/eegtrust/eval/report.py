"""Markdown tables and ROC CSV exports from saved experiment reports (plain dicts)."""
from __future__ import annotations

from ..models import MODEL_IDS

MODEL_LABELS = {
    "nb": "NB",
    "knn": "KNN",
    "svm": "SVM (linear)",
    "cnn": "CNN",
    "vit-nosp": "ViT (noSP)",
    "vit": "ViT (SP)",
}
MODE_TITLES = {"slice_wise": "Slice-wise cross-validation", "trial_wise": "Trial-wise cross-validation"}


def _pct(mean, std):
    if mean is None:
        return "n/a"
    return f"{100 * mean:.2f} ± {100 * std:.2f}"


def _row(label, agg):
    return (f"| {label} | {_pct(agg['accuracy_mean'], agg['accuracy_std'])} "
            f"| {_pct(agg['f1_mean'], agg['f1_std'])} | {_pct(agg['auc_mean'], agg['auc_std'])} |")


def _header():
    return ["| Model | Accuracy (%) | F1 (%) | AUC (%) |", "|---|---|---|---|"]


def protocol_table(reports, mode):
    """One table of per-model mean ± std across subjects for a CV mode."""
    chosen = {r["model_id"]: r for r in reports if r["mode"] == mode}
    lines = [f"### {MODE_TITLES.get(mode, mode)}", ""] + _header()
    for model_id in MODEL_IDS:
        if model_id in chosen:
            lines.append(_row(MODEL_LABELS[model_id], chosen[model_id]["aggregate"]))
    hashes = sorted({r["config_hash"][:12] for r in chosen.values()})
    lines += ["", f"config hashes: {', '.join(hashes)}"]
    return "\n".join(lines)


def ablation_table(ablations):
    lines = ["### Spatial representation ablation", "",
             "| Mode | Variant | Accuracy (%) | F1 (%) | AUC (%) |", "|---|---|---|---|---|"]
    for ab in ablations:
        mode = MODE_TITLES.get(ab["mode"], ab["mode"])
        for key, label in (("sp", "SP"), ("nosp", "noSP")):
            agg = ab[key]["aggregate"]
            lines.append(f"| {mode} | {label} | {_pct(agg['accuracy_mean'], agg['accuracy_std'])} "
                         f"| {_pct(agg['f1_mean'], agg['f1_std'])} | {_pct(agg['auc_mean'], agg['auc_std'])} |")
    for ab in ablations:
        lines.append("")
        lines.append(f"{MODE_TITLES.get(ab['mode'], ab['mode'])}: SP - noSP accuracy = "
                     f"{100 * ab['accuracy_gap']:+.2f} points; identical folds: {ab['plans_match']}")
    return "\n".join(lines)


def sensitivity_table(rows):
    lines = ["### ViT width sensitivity", "", "| D | D_ff | Accuracy (%) | F1 (%) |", "|---|---|---|---|"]
    for r in rows:
        lines.append(f"| {r['model_dim']} | {r['mlp_dim']} | {_pct(r['accuracy_mean'], r['accuracy_std'])} "
                     f"| {_pct(r['f1_mean'], r['f1_std'])} |")
    return "\n".join(lines)


def deviation_section(reports, ablations):
    seen = []
    for r in list(reports) + [a[k] for a in ablations for k in ("sp", "nosp")]:
        for d in r.get("deviations", []):
            if d not in seen:
                seen.append(d)
    return "\n".join(["### Deviations", ""] + [f"- {d}" for d in seen])


def render_markdown(reports=(), ablations=(), sensitivity=None, provenance=None):
    """Full Markdown report: protocol tables, ablation, sensitivity and deviations."""
    parts = ["# Trust recognition results", ""]
    if provenance:
        parts += [f"- {k}: {v}" for k, v in sorted(provenance.items())] + [""]
    for mode in ("slice_wise", "trial_wise"):
        if any(r["mode"] == mode for r in reports):
            parts += [protocol_table(reports, mode), ""]
    if ablations:
        parts += [ablation_table(ablations), ""]
    if sensitivity:
        parts += [sensitivity_table(sensitivity), ""]
    if reports or ablations:
        parts += [deviation_section(reports, ablations), ""]
    return "\n".join(parts)


def fold_roc_csv(report):
    """Per-fold ROC points of one CV report as CSV."""
    lines = ["model,mode,seed,subject,fold,fpr,tpr"]
    for f in report["folds"]:
        for x, y in f["roc"]:
            lines.append(f"{report['model_id']},{report['mode']},{f['seed']},{f['subject']},{f['fold']},{x:.6g},{y:.6g}")
    return "\n".join(lines) + "\n"


def ablation_roc_csv(ablation):
    """Pooled per-subject ROC overlays (SP and noSP) as CSV."""
    lines = ["variant,subject,fpr,tpr"]
    for variant in ("sp", "nosp"):
        for subject, pts in sorted(ablation["roc"][variant].items()):
            lines.extend(f"{variant},{subject},{x:.6g},{y:.6g}" for x, y in pts)
    return "\n".join(lines) + "\n"
