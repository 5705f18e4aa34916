"""Point-level scoring of dynamic labels plus paired significance testing.

Frames are aligned by timestamp, scored as index sets, and aggregated two
ways: micro (sum the confusion counts, then divide — the primary number) and
macro (mean of per-frame metrics over frames with any labeled point).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .labels import DynamicLabel

DEFAULT_MAX_DT = 0.05    # s, half a revolution at 10 Hz


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    @property
    def empty(self) -> bool:
        return self.tp == 0 and self.fp == 0 and self.fn == 0


@dataclass
class Metrics:
    precision: float
    recall: float
    iou: float
    f1: float
    degenerate: bool = False    # some denominator was zero and defaulted to 0


def score_frame(pred: np.ndarray, gt: np.ndarray) -> ConfusionCounts:
    """Confusion counts between two sorted index arrays."""
    p = set(int(i) for i in np.asarray(pred).ravel())
    g = set(int(i) for i in np.asarray(gt).ravel())
    tp = len(p & g)
    return ConfusionCounts(tp, len(p) - tp, len(g) - tp)


def metrics(counts: ConfusionCounts) -> Metrics:
    """Precision, recall, IoU, and F1; zero denominators yield 0 with a flag."""
    degenerate = False

    def ratio(num: int, den: int) -> float:
        nonlocal degenerate
        if den == 0:
            degenerate = True
            return 0.0
        return num / den

    p = ratio(counts.tp, counts.tp + counts.fp)
    r = ratio(counts.tp, counts.tp + counts.fn)
    iou = ratio(counts.tp, counts.fn + counts.tp + counts.fp)
    f1 = ratio_f1(p, r)
    if p + r == 0:
        degenerate = True
    return Metrics(p, r, iou, f1, degenerate)


def ratio_f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def match_frames(pred: list[DynamicLabel], gt: list[DynamicLabel],
                 max_dt: float = DEFAULT_MAX_DT) -> list[tuple[int | None, int | None]]:
    """Greedy nearest-timestamp pairing of two sorted label sequences.

    Candidate pairs within ``max_dt`` are taken closest-first; leftovers pair
    with None (an unmatched ground-truth frame scores all false negatives, an
    unmatched prediction all false positives).
    """
    candidates = []
    for gi, g in enumerate(gt):
        for pi, p in enumerate(pred):
            dt = abs(p.timestamp - g.timestamp)
            if dt <= max_dt:
                candidates.append((dt, gi, pi))
    candidates.sort()
    gt_used: dict[int, int] = {}
    pred_used: set[int] = set()
    for _, gi, pi in candidates:
        if gi not in gt_used and pi not in pred_used:
            gt_used[gi] = pi
            pred_used.add(pi)
    pairs: list[tuple[int | None, int | None]] = []
    for gi in range(len(gt)):
        pairs.append((gt_used.get(gi), gi))
    for pi in range(len(pred)):
        if pi not in pred_used:
            pairs.append((pi, None))
    return pairs


@dataclass
class FrameScore:
    pred_index: int | None
    gt_index: int | None
    timestamp: float
    counts: ConfusionCounts
    metrics: Metrics


@dataclass
class SequenceReport:
    frames: list[FrameScore]
    total: ConfusionCounts
    micro: Metrics
    macro: Metrics
    matched: int
    unmatched_pred: int
    unmatched_gt: int
    averaging: str = "micro"

    def to_dict(self) -> dict:
        return {
            "aggregate": {"precision": self.micro.precision, "recall": self.micro.recall,
                          "iou": self.micro.iou, "f1": self.micro.f1,
                          "averaging": self.averaging},
            "macro": {"precision": self.macro.precision, "recall": self.macro.recall,
                      "iou": self.macro.iou, "f1": self.macro.f1},
            "counts": {"tp": self.total.tp, "fp": self.total.fp, "fn": self.total.fn},
            "frames": {"scored": len(self.frames), "matched": self.matched,
                       "unmatched_pred": self.unmatched_pred,
                       "unmatched_gt": self.unmatched_gt},
        }


def evaluate_labels(pred: list[DynamicLabel], gt: list[DynamicLabel],
                    max_dt: float = DEFAULT_MAX_DT) -> SequenceReport:
    pairs = match_frames(pred, gt, max_dt)
    frames = []
    total = ConfusionCounts()
    matched = unmatched_pred = unmatched_gt = 0
    empty_idx = np.empty(0, dtype=np.uint32)
    for pi, gi in pairs:
        p_idx = pred[pi].indices if pi is not None else empty_idx
        g_idx = gt[gi].indices if gi is not None else empty_idx
        t = gt[gi].timestamp if gi is not None else pred[pi].timestamp
        counts = score_frame(p_idx, g_idx)
        total = total + counts
        frames.append(FrameScore(pi, gi, t, counts, metrics(counts)))
        if pi is not None and gi is not None:
            matched += 1
        elif pi is None:
            unmatched_gt += 1
        else:
            unmatched_pred += 1
    frames.sort(key=lambda f: f.timestamp)

    scored = [f.metrics for f in frames if not f.counts.empty]
    if scored:
        macro = Metrics(
            float(np.mean([m.precision for m in scored])),
            float(np.mean([m.recall for m in scored])),
            float(np.mean([m.iou for m in scored])),
            float(np.mean([m.f1 for m in scored])))
    else:
        macro = Metrics(0.0, 0.0, 0.0, 0.0, degenerate=True)
    return SequenceReport(frames, total, metrics(total), macro,
                          matched, unmatched_pred, unmatched_gt)


@dataclass
class WilcoxonResult:
    statistic: float        # min(W+, W-) over non-zero differences
    p_value: float
    n_effective: int        # non-zero differences used
    method: str             # "exact" | "normal" | "degenerate"
    w_plus: float = 0.0
    w_minus: float = 0.0
    degenerate: bool = False


EXACT_LIMIT = 25     # exact null distribution up to this many non-zero differences
MIN_NONZERO = 6


def _midranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with tied values sharing the mean of their rank span."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def _exact_p(doubled_ranks: np.ndarray, w_plus_doubled: int) -> float:
    """Two-sided exact p over all sign patterns via subset-sum counting.

    The null distribution of W+ is symmetric about S/2 even under ties, so
    the two-sided p is twice the smaller tail, capped at 1.  Ranks arrive
    doubled so mid-ranks stay integral.
    """
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for d in doubled_ranks:
        d = int(d)
        shifted = np.zeros_like(counts)
        shifted[d:] = counts[:-d] if d else counts
        counts = counts + shifted
    w_low = min(w_plus_doubled, total - w_plus_doubled)
    tail = int(counts[:w_low + 1].sum())
    return min(1.0, 2.0 * tail / float(2 ** len(doubled_ranks)))


def wilcoxon_signed_rank(a, b) -> WilcoxonResult:
    """Paired two-sided Wilcoxon signed-rank test, ties handled by mid-ranks.

    Zero differences are excluded.  Up to 25 effective pairs the p-value comes
    from the exact sign-pattern distribution; beyond that from the normal
    approximation with the tie-corrected variance.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("need equal-length 1-d paired series")
    diff = a - b
    diff = diff[diff != 0.0]
    n = len(diff)
    if n == 0:
        return WilcoxonResult(0.0, 1.0, 0, "degenerate", degenerate=True)
    if n < MIN_NONZERO:
        raise ValueError(f"need at least {MIN_NONZERO} non-zero differences, got {n}")

    ranks = _midranks(np.abs(diff))
    w_plus = float(ranks[diff > 0].sum())
    w_minus = float(ranks[diff < 0].sum())
    statistic = min(w_plus, w_minus)

    if n <= EXACT_LIMIT:
        doubled = np.round(2 * ranks).astype(np.int64)
        p = _exact_p(doubled, int(round(2 * w_plus)))
        return WilcoxonResult(statistic, p, n, "exact", w_plus, w_minus)

    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_sizes = np.unique(np.abs(diff), return_counts=True)
    var -= float(((tie_sizes ** 3 - tie_sizes) / 48.0).sum())
    if var <= 0:
        return WilcoxonResult(statistic, 1.0, n, "degenerate", w_plus, w_minus, True)
    z = (w_plus - mean) / math.sqrt(var)
    p = min(1.0, 2.0 * 0.5 * math.erfc(abs(z) / math.sqrt(2.0)))
    return WilcoxonResult(statistic, p, n, "normal", w_plus, w_minus)
