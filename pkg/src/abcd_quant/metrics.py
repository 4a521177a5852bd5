"""Classification and feature-regression metrics, plus the multi-task loss."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from . import fileio
from .dataset import CLASSES
from .errors import DegenerateDataError, DimensionError, InputError

FEATURES = ("a", "b", "c", "d")
MELANOMA = "mel"
PROB_FLOOR = 1e-12
SIMPLEX_TOL = 1e-6

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


@dataclass
class ClassificationReport:
    labels: list[str]
    confusion: np.ndarray
    normalized_confusion: np.ndarray
    accuracy: float
    balanced_accuracy: float
    precision: dict[str, float]
    recall: dict[str, float]
    f1: dict[str, float]
    support: dict[str, int]
    zero_support: list[str] = field(default_factory=list)
    melanoma_sensitivity: float | None = None
    melanoma_specificity: float | None = None
    melanoma_auc: float | None = None
    roc_curve: list[tuple[float, float]] | None = None

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "confusion": self.confusion.tolist(),
            "normalized_confusion": self.normalized_confusion.tolist(),
            "accuracy": self.accuracy,
            "balanced_accuracy": self.balanced_accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "support": self.support,
            "zero_support": list(self.zero_support),
            "melanoma_sensitivity": self.melanoma_sensitivity,
            "melanoma_specificity": self.melanoma_specificity,
            "melanoma_auc": self.melanoma_auc,
            "roc_curve": [list(p) for p in self.roc_curve] if self.roc_curve is not None else None,
        }


def confusion_and_accuracy(truth, pred, labels=CLASSES) -> ClassificationReport:
    """Confusion matrix (rows = truth), accuracies and per-class P/R/F1.

    Classes without truth samples get an all-zero normalized row, are listed
    in ``zero_support`` and are left out of the balanced accuracy.
    """
    truth = list(truth)
    pred = list(pred)
    labels = list(labels)
    if len(truth) != len(pred):
        raise DimensionError(f"truth has {len(truth)} labels, pred has {len(pred)}")
    if not truth:
        raise InputError("at least one sample is required")
    index = {c: i for i, c in enumerate(labels)}
    for y in (*truth, *pred):
        if y not in index:
            raise InputError(f"unknown label {y!r}")

    k = len(labels)
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, ([index[y] for y in truth], [index[y] for y in pred]), 1)

    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    diag = np.diag(cm)
    norm = np.zeros((k, k))
    has = support > 0
    norm[has] = cm[has] / support[has, None]

    recall = np.where(has, diag / np.maximum(support, 1), 0.0)
    precision = np.where(predicted > 0, diag / np.maximum(predicted, 1), 0.0)
    denom = precision + recall
    f1 = np.where(denom > 0, 2 * precision * recall / np.where(denom > 0, denom, 1), 0.0)

    report = ClassificationReport(
        labels=labels,
        confusion=cm,
        normalized_confusion=norm,
        accuracy=float(diag.sum() / cm.sum()),
        balanced_accuracy=float(recall[has].mean()),
        precision={c: float(precision[i]) for i, c in enumerate(labels)},
        recall={c: float(recall[i]) for i, c in enumerate(labels)},
        f1={c: float(f1[i]) for i, c in enumerate(labels)},
        support={c: int(support[i]) for i, c in enumerate(labels)},
        zero_support=[c for i, c in enumerate(labels) if not has[i]],
    )
    if MELANOMA in index:
        m = index[MELANOMA]
        tp = cm[m, m]
        fn = support[m] - tp
        fp = predicted[m] - tp
        tn = cm.sum() - tp - fn - fp
        report.melanoma_sensitivity = float(tp / (tp + fn)) if tp + fn else None
        report.melanoma_specificity = float(tn / (tn + fp)) if tn + fp else None
    return report


def _binary(truth, scores):
    y = np.asarray(truth)
    if y.dtype != bool:
        if not np.all(np.isin(y, (0, 1))):
            raise InputError("binary truth must contain only 0/1 or booleans")
        y = y.astype(bool)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape or y.ndim != 1:
        raise DimensionError("truth and scores must be equal-length 1-d sequences")
    if not np.all(np.isfinite(s)):
        raise InputError("scores must be finite")
    if y.all() or not y.any():
        raise InputError("ROC needs both positive and negative samples")
    return y, s


def roc_curve(truth, scores):
    """ROC points at every distinct score threshold, starting from (0, 0).

    Returns ``(fpr, tpr, thresholds)``; the first threshold is +inf.
    """
    y, s = _binary(truth, scores)
    order = np.argsort(-s, kind="stable")
    s_sorted, y_sorted = s[order], y[order]
    last_of_run = np.r_[np.flatnonzero(np.diff(s_sorted)), s_sorted.size - 1]
    tps = np.cumsum(y_sorted)[last_of_run]
    fps = (last_of_run + 1) - tps
    fpr = np.r_[0.0, fps / (~y).sum()]
    tpr = np.r_[0.0, tps / y.sum()]
    return fpr, tpr, np.r_[np.inf, s_sorted[last_of_run]]


def trapezoid_auc(fpr, tpr) -> float:
    return float(_trapezoid(tpr, fpr))


def roc_auc(truth, scores):
    """Mann-Whitney AUC (ties count one half) and the ROC curve as (fpr, tpr) rows."""
    y, s = _binary(truth, scores)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    ranks = rankdata(s, method="average")
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    fpr, tpr, _ = roc_curve(y, s)
    return float(u / (n_pos * n_neg)), np.column_stack([fpr, tpr])


def classification_report(truth, pred, score_mel=None, labels=CLASSES) -> ClassificationReport:
    """Confusion-based report plus melanoma-vs-rest AUC when scores are given."""
    report = confusion_and_accuracy(truth, pred, labels)
    if score_mel is not None:
        is_mel = np.array([t == MELANOMA for t in truth])
        if is_mel.any() and not is_mel.all():
            auc, curve = roc_auc(is_mel, score_mel)
            report.melanoma_auc = auc
            report.roc_curve = [(float(f), float(t)) for f, t in curve]
    return report


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DimensionError("pearson needs two equal-length 1-d sequences")
    if x.size < 2:
        raise InputError("pearson needs at least two samples")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateDataError("pearson is undefined for constant input")
    return float(np.clip((dx @ dy) / math.sqrt(sxx * syy), -1.0, 1.0))


def _pearson_or_nan(x, y) -> float:
    try:
        return pearson(x, y)
    except DegenerateDataError:
        return float("nan")


@dataclass
class RegressionReport:
    n: int
    mae: dict[str, float]
    pearson: dict[str, float]
    per_class_mae: dict[str, dict[str, float]]
    per_class_count: dict[str, int]
    correlation: np.ndarray  # among predicted features, FEATURES order

    def to_dict(self) -> dict:
        def clean(v):
            return None if isinstance(v, float) and math.isnan(v) else v

        return {
            "n": self.n,
            "features": list(FEATURES),
            "mae": self.mae,
            "pearson": {k: clean(v) for k, v in self.pearson.items()},
            "per_class_mae": self.per_class_mae,
            "per_class_count": self.per_class_count,
            "correlation": [[clean(float(v)) for v in row] for row in self.correlation],
        }


def regression_report(truth, pred, classes=None) -> RegressionReport:
    """Join feature rows on image_id and summarise prediction quality.

    ``truth`` rows that failed labeling are dropped from both sides;
    ``classes`` (DatasetRecords) enables the per-diagnosis MAE breakdown.
    """
    truth_ok = {r.image_id: r for r in truth if r.ok}
    dropped = {r.image_id for r in truth if not r.ok}
    pred_map = {}
    for r in pred:
        if r.image_id in dropped:
            continue
        if not r.ok:
            raise InputError(f"prediction for {r.image_id!r} has status {r.status!r}")
        pred_map[r.image_id] = r
    if set(truth_ok) != set(pred_map):
        only_t = sorted(set(truth_ok) - set(pred_map))
        only_p = sorted(set(pred_map) - set(truth_ok))
        raise InputError(
            f"image_id mismatch: {len(only_t)} only in truth, {len(only_p)} only in predictions"
        )
    ids = sorted(truth_ok)
    if not ids:
        raise InputError("no rows to compare")

    t = np.array([truth_ok[i].values for i in ids], dtype=np.float64)
    p = np.array([pred_map[i].values for i in ids], dtype=np.float64)
    err = np.abs(p - t)
    mae = {f: float(err[:, j].mean()) for j, f in enumerate(FEATURES)}
    if len(ids) >= 2:
        r = {f: _pearson_or_nan(p[:, j], t[:, j]) for j, f in enumerate(FEATURES)}
    else:
        r = {f: float("nan") for f in FEATURES}

    corr = np.eye(len(FEATURES))
    for i in range(len(FEATURES)):
        for j in range(i + 1, len(FEATURES)):
            v = _pearson_or_nan(p[:, i], p[:, j]) if len(ids) >= 2 else float("nan")
            corr[i, j] = corr[j, i] = v

    per_class: dict[str, dict[str, float]] = {}
    per_count: dict[str, int] = {}
    if classes is not None:
        dx = {rec.image_id: rec.diagnosis for rec in classes}
        missing = [i for i in ids if i not in dx]
        if missing:
            raise InputError(f"no diagnosis for {len(missing)} image(s), e.g. {missing[0]!r}")
        labels = np.array([dx[i] for i in ids])
        for c in CLASSES:
            sel = labels == c
            if sel.any():
                per_class[c] = {f: float(err[sel, j].mean()) for j, f in enumerate(FEATURES)}
                per_count[c] = int(sel.sum())
    return RegressionReport(len(ids), mae, r, per_class, per_count, corr)


@dataclass(frozen=True)
class LossWeights:
    lam: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise InputError(f"loss weight must be finite and >= 0, got {self.lam!r}")


def combined_loss(class_probs, true_class, pred_feats, true_feats, weights: LossWeights = LossWeights()) -> float:
    """Cross-entropy of the true class plus ``lam`` times the feature MSE."""
    p = np.asarray(class_probs, dtype=np.float64)
    if p.ndim != 1 or p.size != len(CLASSES):
        raise InputError(f"class_probs must have {len(CLASSES)} entries")
    if not np.all(np.isfinite(p)) or np.any(p < 0) or abs(p.sum() - 1.0) > SIMPLEX_TOL:
        raise InputError("class_probs is not a probability vector")
    k = CLASSES.index(true_class) if isinstance(true_class, str) else int(true_class)
    if not 0 <= k < p.size:
        raise InputError(f"true class {true_class!r} out of range")
    pf = np.asarray(pred_feats, dtype=np.float64)
    tf = np.asarray(true_feats, dtype=np.float64)
    if pf.shape != (4,) or tf.shape != (4,):
        raise DimensionError("feature vectors must have 4 entries")
    ce = -math.log(max(p[k], PROB_FLOOR))
    if weights.lam == 0:
        return ce
    return ce + weights.lam * float(np.mean((pf - tf) ** 2))


def read_class_predictions(path) -> dict[str, tuple[str, float | None]]:
    """Read ``image_id,pred_class[,score_mel]``; a blank score is kept as None."""
    rows = fileio.read_csv(path, required=("image_id", "pred_class"))
    out: dict[str, tuple[str, float | None]] = {}
    for n, row in enumerate(rows, start=1):
        image_id = (row["image_id"] or "").strip()
        cls = (row["pred_class"] or "").strip()
        if cls not in CLASSES:
            raise InputError(f"{path}: row {n}: unknown class label {cls!r}")
        if image_id in out:
            raise InputError(f"{path}: row {n}: duplicate image_id {image_id!r}")
        text = (row.get("score_mel") or "").strip()
        score = None
        if text:
            try:
                score = float(text)
            except ValueError:
                raise InputError(f"{path}: row {n}: score_mel is not a number") from None
            if not 0.0 <= score <= 1.0:
                raise InputError(f"{path}: row {n}: score_mel outside [0, 1]")
        out[image_id] = (cls, score)
    return out
