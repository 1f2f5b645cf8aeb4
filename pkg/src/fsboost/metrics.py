"""IoU, per-class pooled counts, mIoU and cross-validation averages."""
import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ShapeError
from .tensor import as_mask


def confusion_counts(pred, gt):
    p = as_mask(pred, "prediction").astype(bool)
    g = as_mask(gt, "ground truth").astype(bool)
    if p.shape != g.shape:
        raise ShapeError(f"prediction {p.shape} and ground truth {g.shape} differ")
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    return tp, fp, fn


def iou(pred, gt):
    """``|pred & gt| / |pred | gt|``; two empty masks count as perfect agreement."""
    tp, fp, fn = confusion_counts(pred, gt)
    union = tp + fp + fn
    if union == 0:
        return 1.0
    return tp / union


@dataclass
class ClassScore:
    class_id: int
    tp: int = 0
    fp: int = 0
    fn: int = 0
    episode_ious: list = field(default_factory=list)

    def add(self, pred, gt):
        tp, fp, fn = confusion_counts(pred, gt)
        self.tp += tp
        self.fp += fp
        self.fn += fn
        union = tp + fp + fn
        self.episode_ious.append(tp / union if union else 1.0)

    def merge(self, other):
        if other.class_id != self.class_id:
            raise ValueError("cannot merge scores of different classes")
        return ClassScore(
            self.class_id,
            self.tp + other.tp,
            self.fp + other.fp,
            self.fn + other.fn,
            self.episode_ious + other.episode_ious,
        )

    @property
    def undefined(self):
        return self.tp + self.fp + self.fn == 0

    @property
    def iou(self):
        # No positives anywhere: reported as 0 and flagged through ``undefined``.
        denom = self.tp + self.fp + self.fn
        return self.tp / denom if denom else 0.0

    @property
    def episode_mean_iou(self):
        return float(np.mean(self.episode_ious)) if self.episode_ious else 0.0


def miou(per_class):
    """Unweighted mean of pooled per-class IoUs."""
    per_class = list(per_class)
    if not per_class:
        raise DataError("mIoU needs at least one class")
    return float(np.mean([c.iou for c in per_class]))


def episode_miou(per_class):
    """Variant: mean over classes of the per-episode mean IoU."""
    per_class = list(per_class)
    if not per_class:
        raise DataError("mIoU needs at least one class")
    return float(np.mean([c.episode_mean_iou for c in per_class]))


def crossval_report(per_fold_miou):
    vals = list(per_fold_miou)
    if not vals:
        raise DataError("cross-validation report needs at least one fold")
    return float(np.mean(vals))


CSV_FIELDS = ["fold", "class_id", "tp", "fp", "fn", "iou", "episode_mean_iou", "miou", "undefined"]


def score_rows(fold, scores):
    """CSV rows for one fold: one per class, then an ``all`` summary row."""
    scores = sorted(scores, key=lambda s: s.class_id)
    rows = []
    for s in scores:
        rows.append({
            "fold": fold, "class_id": s.class_id, "tp": s.tp, "fp": s.fp, "fn": s.fn,
            "iou": f"{s.iou:.6f}", "episode_mean_iou": f"{s.episode_mean_iou:.6f}",
            "miou": "", "undefined": int(s.undefined),
        })
    rows.append({
        "fold": fold, "class_id": "all",
        "tp": sum(s.tp for s in scores), "fp": sum(s.fp for s in scores), "fn": sum(s.fn for s in scores),
        "iou": "", "episode_mean_iou": f"{episode_miou(scores):.6f}",
        "miou": f"{miou(scores):.6f}", "undefined": 0,
    })
    return rows


def write_csv(path_or_file, rows, fields=CSV_FIELDS, comments=()):
    """Write rows with ``# ...`` comment lines ahead of the header."""
    if hasattr(path_or_file, "write"):
        _write_csv(path_or_file, rows, fields, comments)
    else:
        with open(path_or_file, "w", newline="", encoding="utf-8") as fh:
            _write_csv(fh, rows, fields, comments)


def _write_csv(fh, rows, fields, comments):
    for line in comments:
        fh.write(f"# {line}\n")
    writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
