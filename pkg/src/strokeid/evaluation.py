"""Evaluation metrics: line classification accuracy and IoU-based joint
text-detection + script-identification scoring.

The joint protocol matches detections to ground-truth boxes one-to-one,
greedily in descending IoU order among pairs above the IoU threshold; a
matched detection is a true positive when the predicted script agrees with
the ground truth (or unconditionally with the script check disabled).
Ground-truth lines labeled "unknown" are don't-care regions: detections
matched to them count neither as true nor as false positives, and they are
excluded from the recall denominator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nbnn

UNKNOWN_SCRIPT = "unknown"


@dataclass
class BBox:
    """Axis-aligned box: top-left corner plus positive width/height."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box width/height must be positive, got {self.w}x{self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass
class GTLine:
    bbox: BBox
    script: str
    source_image: str


@dataclass
class DetLine:
    bbox: BBox
    predicted_script: str
    source_image: str


@dataclass
class Metrics:
    """Shared result record for both evaluation protocols.

    confusion[i][j] counts ground truth labels[i] predicted as labels[j];
    for the joint protocol it covers matched pairs only.  extras carries
    protocol-specific diagnostic counts.
    """

    precision: float
    recall: float
    fscore: float
    accuracy: float
    labels: list[str]
    confusion: np.ndarray
    per_class: dict[str, dict[str, float]] = field(default_factory=dict)
    extras: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        """JSON-ready dictionary with the documented metric fields."""
        return {
            "precision": self.precision,
            "recall": self.recall,
            "fscore": self.fscore,
            "accuracy": self.accuracy,
            "labels": list(self.labels),
            "confusion": [[int(v) for v in row] for row in self.confusion],
            "per_class": self.per_class,
            **({"extras": self.extras} if self.extras else {}),
        }


def _harmonic(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2.0 * p * r / (p + r)


def line_accuracy(
    preds: list[tuple[str, str]], gts: list[tuple[str, str]]
) -> Metrics:
    """Classification accuracy plus confusion matrix over (id, label) pairs.

    Prediction and ground-truth id sets must coincide exactly (with unique
    ids); any mismatch raises an error listing the offending ids.  With one
    prediction per line, precision and recall both equal accuracy.
    """
    if not gts:
        raise ValueError("no ground-truth lines given")
    gt_ids = [i for i, _ in gts]
    dup_gts = sorted({i for i in gt_ids if gt_ids.count(i) > 1})
    if dup_gts:
        raise ValueError(f"duplicate ground-truth ids: {dup_gts}")
    gt_map = dict(gts)
    pred_ids = [i for i, _ in preds]
    missing = sorted(set(gt_map) - set(pred_ids))
    extra = sorted(set(pred_ids) - set(gt_map))
    dup_preds = sorted({i for i in pred_ids if pred_ids.count(i) > 1})
    if missing or extra or dup_preds:
        raise ValueError(
            f"prediction/ground-truth id mismatch: missing={missing} extra={extra} duplicated={dup_preds}"
        )
    labels = sorted(set(gt_map.values()) | {lab for _, lab in preds})
    pos = {lab: k for k, lab in enumerate(labels)}
    confusion = np.zeros((len(labels), len(labels)), dtype=np.int64)
    correct = 0
    for pid, plab in preds:
        glab = gt_map[pid]
        confusion[pos[glab], pos[plab]] += 1
        correct += plab == glab
    acc = correct / len(gts)
    per_class = {}
    for lab in labels:
        row = confusion[pos[lab]]
        n = int(row.sum())
        c = int(row[pos[lab]])
        per_class[lab] = {"count": n, "correct": c, "accuracy": c / n if n else 0.0}
    return Metrics(
        precision=acc,
        recall=acc,
        fscore=_harmonic(acc, acc),
        accuracy=acc,
        labels=labels,
        confusion=confusion,
        per_class=per_class,
    )


def iou(a: BBox, b: BBox) -> float:
    """Intersection-over-union of two boxes; 0 when disjoint."""
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def joint_eval(
    dets: list[DetLine],
    gts: list[GTLine],
    iou_thresh: float = 0.5,
    check_script: bool = True,
) -> Metrics:
    """Joint detection + script-identification metrics.

    Per image, (det, gt) pairs with IoU strictly above iou_thresh are
    matched one-to-one greedily in descending IoU order (ties by detection
    input order).  precision = TP / non-ignored detections, recall =
    TP / known-script ground truths; accuracy is the script accuracy over
    matched known-script pairs.  With check_script=False every matched
    known-script detection counts as a TP (localization-only protocol).
    extras reports unmatched detections that overlap a same-script ground
    truth below the threshold, a diagnostic only.
    """
    images: dict[str, tuple[list, list]] = {}
    for d in dets:
        images.setdefault(d.source_image, ([], []))[0].append(d)
    for g in gts:
        images.setdefault(g.source_image, ([], []))[1].append(g)

    tp = 0
    ignored_dets = 0
    matched_known = 0
    below_thresh_correct = 0
    gt_labels = sorted({g.script for g in gts if g.script != UNKNOWN_SCRIPT})
    pred_labels = sorted({d.predicted_script for d in dets})
    labels = sorted(set(gt_labels) | set(pred_labels))
    pos = {lab: k for k, lab in enumerate(labels)}
    confusion = np.zeros((len(labels), len(labels)), dtype=np.int64)

    for img_dets, img_gts in images.values():
        pairs = []
        for di, d in enumerate(img_dets):
            for gi, g in enumerate(img_gts):
                ov = iou(d.bbox, g.bbox)
                if ov > iou_thresh:
                    pairs.append((-ov, di, gi))
        pairs.sort()
        used_d: set[int] = set()
        used_g: set[int] = set()
        for neg_ov, di, gi in pairs:
            if di in used_d or gi in used_g:
                continue
            used_d.add(di)
            used_g.add(gi)
            g = img_gts[gi]
            d = img_dets[di]
            if g.script == UNKNOWN_SCRIPT:
                ignored_dets += 1
                continue
            matched_known += 1
            hit = d.predicted_script == g.script
            if g.script in pos and d.predicted_script in pos:
                confusion[pos[g.script], pos[d.predicted_script]] += 1
            if hit or not check_script:
                tp += 1
        for di, d in enumerate(img_dets):
            if di in used_d:
                continue
            best = 0.0
            best_g = None
            for g in img_gts:
                ov = iou(d.bbox, g.bbox)
                if ov > best:
                    best, best_g = ov, g
            if best_g is not None and best_g.script == d.predicted_script:
                below_thresh_correct += 1

    num_dets = len(dets) - ignored_dets
    num_gts = sum(1 for g in gts if g.script != UNKNOWN_SCRIPT)
    precision = tp / num_dets if num_dets else 0.0
    recall = tp / num_gts if num_gts else 0.0
    script_hits = int(np.trace(confusion))
    per_class = {}
    for lab in gt_labels:
        row = confusion[pos[lab]]
        n_gt = sum(1 for g in gts if g.script == lab)
        c = int(row[pos[lab]])
        per_class[lab] = {
            "gt_count": n_gt,
            "matched": int(row.sum()),
            "true_positive": c,
            "recall": c / n_gt if n_gt else 0.0,
        }
    return Metrics(
        precision=precision,
        recall=recall,
        fscore=_harmonic(precision, recall),
        accuracy=script_hits / matched_known if matched_known else 0.0,
        labels=labels,
        confusion=confusion,
        per_class=per_class,
        extras={
            "matched": float(matched_known),
            "ignored_detections": float(ignored_dets),
            "below_thresh_correct_script": float(below_thresh_correct),
        },
    )


def cross_domain_report(
    store: nbnn.TemplateStore,
    samples: list[tuple[str, str, np.ndarray]],
    common_labels: list[str],
    weighted: bool = False,
    idx: nbnn.IndexParams = nbnn.EXACT,
    index=None,
) -> Metrics:
    """Accuracy of one domain's model on another domain's common classes.

    samples are (id, true_label, descriptor_bag) triples; only those whose
    ground truth lies in common_labels are scored.  Classification still
    runs over the model's full class set, so predictions outside the common
    set count as errors.
    """
    common = set(common_labels)
    if not common & set(store.labels):
        raise ValueError("common_labels share no class with the template store")
    kept = [(sid, lab, bag) for sid, lab, bag in samples if lab in common]
    if not kept:
        raise ValueError("no test samples fall in the common label set")
    if index is None:
        index = nbnn.prepare_index(store, idx)
    preds = [
        (sid, nbnn.classify(store, bag, weighted=weighted, idx=idx, index=index).predicted)
        for sid, _, bag in kept
    ]
    return line_accuracy(preds, [(sid, lab) for sid, lab, _ in kept])
