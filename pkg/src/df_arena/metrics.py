"""Detection metrics: FAR/FRR sweep, EER, pooled EER, AUC, accuracy, F1.

All operations are pure functions over joined ``(label, score)`` rows with
the higher-is-bonafide convention (the protocol join already normalizes
polarity). Scores equal to a threshold count as accepted, everywhere.

EER and AUC are rank statistics here: candidate thresholds are the midpoints
between consecutive distinct scores plus one sentinel on each side, so any
strictly increasing transform of the scores leaves both values unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MetricError
from .protocol import BONAFIDE, SPOOF


@dataclass(frozen=True)
class RocCurve:
    """FAR/FRR sampled at ascending thresholds.

    FAR is non-increasing and FRR non-decreasing along ``thresholds``; the
    first point is (FAR=1, FRR=0) and the last (FAR=0, FRR=1).
    """

    thresholds: np.ndarray
    far: np.ndarray
    frr: np.ndarray


@dataclass(frozen=True)
class ThresholdMetrics:
    accuracy: float
    f1: float
    precision: float
    recall: float
    tp: int
    fn: int
    fp: int
    tn: int


@dataclass(frozen=True)
class EvalReport:
    """Per-(system, dataset) metric bundle. EER/AUC/rates are in [0, 1]."""

    system_id: str
    dataset_id: str
    eer: float
    eer_threshold: float
    auc: float
    accuracy: float
    f1: float
    decision_threshold: float
    n_bonafide: int
    n_spoof: int


def split_scores(joined) -> tuple[np.ndarray, np.ndarray]:
    """Split joined rows into (bonafide, spoof) score arrays."""
    bona = np.asarray([s for label, s in joined if label == BONAFIDE], dtype=np.float64)
    spoof = np.asarray([s for label, s in joined if label == SPOOF], dtype=np.float64)
    for label, s in joined:
        if label not in (BONAFIDE, SPOOF):
            raise MetricError(f"unknown label {label!r} in joined rows")
    return bona, spoof


def _roc_from_class_scores(bona: np.ndarray, spoof: np.ndarray) -> RocCurve:
    """Build the curve from per-class arrays. Sorts its inputs in place;
    callers always pass freshly materialized arrays."""
    if bona.size == 0 or spoof.size == 0:
        raise MetricError(
            f"ROC needs both classes; got {bona.size} bonafide and {spoof.size} spoof scores"
        )
    bona.sort()
    spoof.sort()
    uniq = np.unique(np.concatenate([bona, spoof]))
    thresholds = np.empty(uniq.size + 1, dtype=np.float64)
    thresholds[0] = uniq[0] - 1.0
    thresholds[1:-1] = (uniq[:-1] + uniq[1:]) / 2.0
    thresholds[-1] = uniq[-1] + 1.0
    # accept (call bonafide) iff score >= t
    far = (spoof.size - np.searchsorted(spoof, thresholds, side="left")) / spoof.size
    frr = np.searchsorted(bona, thresholds, side="left") / bona.size
    return RocCurve(thresholds, far, frr)


def roc(joined) -> RocCurve:
    """Sweep FAR/FRR over midpoint thresholds with sentinels at both ends."""
    bona, spoof = split_scores(joined)
    return _roc_from_class_scores(bona, spoof)


def eer(curve: RocCurve) -> tuple[float, float]:
    """Equal error rate and its threshold.

    Walks the curve in ascending-threshold order: an exact FAR == FRR point
    is returned as-is, otherwise the first sign change of FAR - FRR is
    resolved by linear interpolation between the bracketing points. If the
    difference never changes sign (degenerate curves only), falls back to
    (FAR + FRR) / 2 at the point minimizing |FAR - FRR|.
    """
    d = curve.far - curve.frr
    zeros = np.flatnonzero(d == 0.0)
    changes = np.flatnonzero(np.sign(d[:-1]) * np.sign(d[1:]) < 0)
    first_zero = zeros[0] if zeros.size else np.inf
    first_change = changes[0] if changes.size else np.inf
    if first_zero <= first_change:
        i = int(first_zero)
        return float(curve.far[i]), float(curve.thresholds[i])
    if np.isfinite(first_change):
        i = int(first_change)
        d0, d1 = d[i], d[i + 1]
        t = d0 / (d0 - d1)
        far_x = curve.far[i] + t * (curve.far[i + 1] - curve.far[i])
        frr_x = curve.frr[i] + t * (curve.frr[i + 1] - curve.frr[i])
        thr = curve.thresholds[i] + t * (curve.thresholds[i + 1] - curve.thresholds[i])
        return float((far_x + frr_x) / 2.0), float(thr)
    j = int(np.argmin(np.abs(d)))
    return float((curve.far[j] + curve.frr[j]) / 2.0), float(curve.thresholds[j])


def eer_from_joined(joined) -> tuple[float, float]:
    return eer(roc(joined))


def pooled_eer(joined_sets) -> tuple[float, float]:
    """EER over the concatenation of several joined sets, single threshold.

    Rows are pooled raw: no per-dataset reweighting or score normalization,
    so scale mismatch between datasets is penalized by design. Each class is
    concatenated exactly once, keeping a single in-memory copy of the pooled
    scores.
    """
    if not joined_sets:
        raise MetricError("pooled_eer needs at least one joined set")
    bona_parts, spoof_parts = [], []
    for joined in joined_sets:
        b, s = split_scores(joined)
        bona_parts.append(b)
        spoof_parts.append(s)
    bona = np.concatenate(bona_parts)
    spoof = np.concatenate(spoof_parts)
    if bona.size == 0 or spoof.size == 0:
        raise MetricError("pooled rows contain a single class; EER undefined")
    return eer(_roc_from_class_scores(bona, spoof))


def auc(curve: RocCurve) -> float:
    """Area under the ROC: trapezoidal integral of 1 - FRR over ascending FAR."""
    fpr = curve.far[::-1]  # far is non-increasing in threshold
    tpr = 1.0 - curve.frr[::-1]
    return float(np.clip(np.trapezoid(tpr, fpr), 0.0, 1.0))


def threshold_metrics(joined, threshold: float) -> ThresholdMetrics:
    """Accuracy and F1 at a fixed threshold, bonafide as the positive class.

    Predict bonafide iff score >= threshold. F1 is 0 when precision and
    recall are both 0.
    """
    bona, spoof = split_scores(joined)
    tp = int(np.count_nonzero(bona >= threshold))
    fn = bona.size - tp
    fp = int(np.count_nonzero(spoof >= threshold))
    tn = spoof.size - fp
    n = bona.size + spoof.size
    if n == 0:
        raise MetricError("empty joined rows")
    accuracy = (tp + tn) / n
    precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
    recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
    f1 = 0.0 if precision + recall == 0 else 2.0 * precision * recall / (precision + recall)
    return ThresholdMetrics(accuracy, f1, precision, recall, tp, fn, fp, tn)


def evaluate(
    joined,
    system_id: str = "",
    dataset_id: str = "",
    decision_threshold: float | None = None,
) -> EvalReport:
    """Full metric bundle for one joined set.

    The accuracy/F1 decision threshold defaults to the EER threshold of the
    same set; pass ``decision_threshold`` to override.
    """
    curve = roc(joined)
    eer_value, eer_thr = eer(curve)
    thr = eer_thr if decision_threshold is None else float(decision_threshold)
    tm = threshold_metrics(joined, thr)
    return EvalReport(
        system_id=system_id,
        dataset_id=dataset_id,
        eer=eer_value,
        eer_threshold=eer_thr,
        auc=auc(curve),
        accuracy=tm.accuracy,
        f1=tm.f1,
        decision_threshold=thr,
        n_bonafide=tm.tp + tm.fn,
        n_spoof=tm.fp + tm.tn,
    )


def format_percent(rate: float) -> str:
    """Rate in [0,1] as a percent string with 2 decimals (round-half-even)."""
    return f"{rate * 100.0:.2f}"
