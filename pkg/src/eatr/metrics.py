"""Frame-wise and segment-wise evaluation.

Frame level: 3x3 confusion matrix, per-class F1, Cohen's kappa.
Segment level: IoU matching of run-length segments against ground truth at a
threshold k, with over/under-segmentation penalties and cross-class
misclassification counts, then segmental F1 per class.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .io import DRINKING, EATING, Segment, frame_labels_to_segments

N_CLASSES = 3
GESTURE_CLASSES = (EATING, DRINKING)
DEFAULT_THRESHOLDS = (0.1, 0.25, 0.5)


def frame_confusion(gt: np.ndarray, pred: np.ndarray) -> np.ndarray:
    """counts[g][p] = number of frames with ground truth g and prediction p."""
    gt = np.asarray(gt)
    pred = np.asarray(pred)
    if gt.shape != pred.shape:
        raise ValueError(f"length mismatch: gt {gt.shape} vs pred {pred.shape}")
    for name, arr in (("gt", gt), ("pred", pred)):
        if arr.size and (arr.min() < 0 or arr.max() >= N_CLASSES):
            raise ValueError(f"{name} labels must be in 0..{N_CLASSES - 1}")
    conf = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(conf, (gt, pred), 1)
    return conf


def frame_f1(conf: np.ndarray, label: int) -> float:
    """2tp/(2tp+fp+fn); 0 when the class never occurs on either side."""
    if label not in GESTURE_CLASSES:
        raise ValueError(f"frame f1 is defined for gesture classes, got {label}")
    tp = conf[label, label]
    fp = conf[:, label].sum() - tp
    fn = conf[label, :].sum() - tp
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def cohen_kappa(conf: np.ndarray) -> float:
    """Chance-corrected frame agreement from observed vs expected accuracy."""
    total = conf.sum()
    if total == 0:
        raise ValueError("empty confusion matrix")
    p_o = np.trace(conf) / total
    p_e = float((conf.sum(axis=0) / total * conf.sum(axis=1) / total).sum())
    if p_e == 1.0:
        return 1.0 if p_o == 1.0 else 0.0
    return float((p_o - p_e) / (1.0 - p_e))


def iou(a: Segment, b: Segment) -> float:
    """Intersection over union of two half-open frame intervals."""
    inter = min(a.end, b.end) - max(a.start, b.start)
    if inter <= 0:
        return 0.0
    union = len(a) + len(b) - inter
    return inter / union


@dataclass
class SegmentOutcome:
    """Segment-wise TP/FP/FN per gesture class at one IoU threshold, plus
    cross-class misclassification counts keyed (true class, predicted class)."""
    k: float
    tp: dict[int, int] = field(default_factory=lambda: {EATING: 0, DRINKING: 0})
    fp: dict[int, int] = field(default_factory=lambda: {EATING: 0, DRINKING: 0})
    fn: dict[int, int] = field(default_factory=lambda: {EATING: 0, DRINKING: 0})
    cross: dict[tuple[int, int], int] = field(
        default_factory=lambda: {(EATING, DRINKING): 0, (DRINKING, EATING): 0})

    def add(self, other: "SegmentOutcome") -> None:
        if other.k != self.k:
            raise ValueError(f"cannot merge outcomes at k={self.k} and k={other.k}")
        for c in GESTURE_CLASSES:
            self.tp[c] += other.tp[c]
            self.fp[c] += other.fp[c]
            self.fn[c] += other.fn[c]
        for key in self.cross:
            self.cross[key] += other.cross[key]


def _check_disjoint(segments: list[Segment], name: str) -> list[Segment]:
    ordered = sorted(segments, key=lambda s: s.start)
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.start < prev.end:
            raise ValueError(f"{name} segments overlap: {prev} and {cur}")
    return ordered


def _greedy_pairs(gts: list[Segment], preds: list[Segment]):
    """One-to-one matching of overlapping same-class segments, taking pairs by
    descending IoU; ties broken by earlier prediction start, then earlier
    ground-truth start."""
    cands = []
    for gi, g in enumerate(gts):
        for pi, p in enumerate(preds):
            ov = iou(g, p)
            if ov > 0.0:
                cands.append((-ov, p.start, g.start, gi, pi))
    cands.sort()
    matched: dict[int, tuple[int, float]] = {}
    used_preds: set[int] = set()
    for neg_ov, _, _, gi, pi in cands:
        if gi in matched or pi in used_preds:
            continue
        matched[gi] = (pi, -neg_ov)
        used_preds.add(pi)
    return matched, used_preds


def segment_match(gt: list[Segment], pred: list[Segment], k: float) -> SegmentOutcome:
    """Classify segments as TP/FP/FN at IoU threshold k.

    Per class: matched pairs with IoU >= k are TPs; sub-threshold pairs count
    as FP when the prediction is longer than the ground truth, else FN; every
    unmatched prediction is an FP and every unmatched ground truth an FN.
    A ground truth with no same-class overlap at all that overlaps the other
    class's prediction is additionally recorded as a misclassification."""
    if not 0.0 < k < 1.0:
        raise ValueError(f"threshold k must be in (0,1), got {k}")
    _check_disjoint(gt, "ground truth")
    _check_disjoint(pred, "prediction")
    outcome = SegmentOutcome(k=k)
    overlapped: dict[int, set[int]] = {}
    for c in GESTURE_CLASSES:
        gts = [s for s in gt if s.label == c]
        preds = [s for s in pred if s.label == c]
        matched, used_preds = _greedy_pairs(gts, preds)
        for gi, (pi, ov) in matched.items():
            if ov >= k:
                outcome.tp[c] += 1
            elif len(gts[gi]) < len(preds[pi]):
                outcome.fp[c] += 1
            else:
                # equal lengths count as a localization failure of the detector
                outcome.fn[c] += 1
        outcome.fp[c] += len(preds) - len(used_preds)
        outcome.fn[c] += len(gts) - len(matched)
        overlapped[c] = {gi for gi, g in enumerate(gts)
                         if any(iou(g, p) > 0.0 for p in preds)}
    for c in GESTURE_CLASSES:
        other = DRINKING if c == EATING else EATING
        other_preds = [s for s in pred if s.label == other]
        gts = [s for s in gt if s.label == c]
        for gi, g in enumerate(gts):
            if gi in overlapped[c]:
                continue
            if any(iou(g, p) > 0.0 for p in other_preds):
                outcome.cross[(c, other)] += 1
    return outcome


def segmental_f1(outcome: SegmentOutcome, label: int) -> float:
    denom = 2 * outcome.tp[label] + outcome.fp[label] + outcome.fn[label]
    return 2 * outcome.tp[label] / denom if denom else 0.0


@dataclass
class EvalReport:
    confusion: np.ndarray
    frame_f1: dict[int, float]
    kappa: float
    outcomes: dict[float, SegmentOutcome]
    n_frames: int

    def seg_f1(self, k: float, label: int) -> float:
        return segmental_f1(self.outcomes[k], label)


def evaluate_meal(gt_labels: np.ndarray, pred_labels: np.ndarray,
                  ks: tuple[float, ...] = DEFAULT_THRESHOLDS) -> EvalReport:
    """Frame metrics plus segment matching at every threshold."""
    conf = frame_confusion(gt_labels, pred_labels)
    gt_segs = frame_labels_to_segments(gt_labels)
    pred_segs = frame_labels_to_segments(pred_labels)
    outcomes = {k: segment_match(gt_segs, pred_segs, k) for k in ks}
    return EvalReport(confusion=conf,
                      frame_f1={c: frame_f1(conf, c) for c in GESTURE_CLASSES},
                      kappa=cohen_kappa(conf),
                      outcomes=outcomes,
                      n_frames=int(conf.sum()))


def merge_reports(reports: list[EvalReport]) -> EvalReport:
    """Pool counts across meals (micro aggregation), then recompute the scores."""
    if not reports:
        raise ValueError("no reports to merge")
    conf = sum(r.confusion for r in reports)
    outcomes: dict[float, SegmentOutcome] = {}
    for r in reports:
        for k, outcome in r.outcomes.items():
            if k not in outcomes:
                outcomes[k] = SegmentOutcome(k=k)
            outcomes[k].add(outcome)
    return EvalReport(confusion=conf,
                      frame_f1={c: frame_f1(conf, c) for c in GESTURE_CLASSES},
                      kappa=cohen_kappa(conf),
                      outcomes=outcomes,
                      n_frames=int(conf.sum()))


_CLASS_TAG = {EATING: "eating", DRINKING: "drinking"}


def format_report(report: EvalReport) -> str:
    """Human-readable per-class, per-threshold blocks."""
    lines = [f"frames evaluated: {report.n_frames}",
             "confusion (rows gt other/eating/drinking, cols pred):"]
    for row in report.confusion:
        lines.append("  " + " ".join(f"{v:>10d}" for v in row))
    lines.append("frame-wise:")
    for c in GESTURE_CLASSES:
        lines.append(f"  f1 {_CLASS_TAG[c]}: {report.frame_f1[c]:.3f}")
    lines.append(f"  kappa: {report.kappa:.3f}")
    for k in sorted(report.outcomes):
        out = report.outcomes[k]
        lines.append(f"segment-wise k={k:g}:")
        for c in GESTURE_CLASSES:
            lines.append(f"  {_CLASS_TAG[c]}: TP={out.tp[c]} FP={out.fp[c]} "
                         f"FN={out.fn[c]} F1={segmental_f1(out, c):.3f}")
        lines.append(f"  misclassified: eating->drinking={out.cross[(EATING, DRINKING)]} "
                     f"drinking->eating={out.cross[(DRINKING, EATING)]}")
    return "\n".join(lines) + "\n"


def report_csv(report: EvalReport) -> str:
    """Machine-readable rows: metric,k,class,tp,fp,fn,score."""
    rows = ["metric,k,class,tp,fp,fn,score"]
    for c in GESTURE_CLASSES:
        tp = report.confusion[c, c]
        fp = report.confusion[:, c].sum() - tp
        fn = report.confusion[c, :].sum() - tp
        rows.append(f"frame_f1,,{_CLASS_TAG[c]},{tp},{fp},{fn},{report.frame_f1[c]:.6f}")
    rows.append(f"kappa,,,,,,{report.kappa:.6f}")
    for k in sorted(report.outcomes):
        out = report.outcomes[k]
        for c in GESTURE_CLASSES:
            rows.append(f"segment_f1,{k:g},{_CLASS_TAG[c]},{out.tp[c]},{out.fp[c]},"
                        f"{out.fn[c]},{segmental_f1(out, c):.6f}")
        rows.append(f"misclass,{k:g},eating->drinking,,,,"
                    f"{out.cross[(EATING, DRINKING)]}")
        rows.append(f"misclass,{k:g},drinking->eating,,,,"
                    f"{out.cross[(DRINKING, EATING)]}")
    return "\n".join(rows) + "\n"
