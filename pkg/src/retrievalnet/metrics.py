"""Classification and ranking metrics.

Zero-denominator cases (e.g. precision with no positive predictions) yield
0.0 and emit :class:`UndefinedMetricWarning`; reports never contain NaN.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import EmptyInput, EmptyQuerySet, LengthMismatch, NoRelevant, SingleClass


class UndefinedMetricWarning(UserWarning):
    pass


def _ratio(num: float, den: float, what: str, flags: list[str] | None = None) -> float:
    if den == 0:
        warnings.warn(f"{what} is undefined (zero denominator); reporting 0.0",
                      UndefinedMetricWarning, stacklevel=3)
        if flags is not None:
            flags.append(what)
        return 0.0
    return num / den


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class ClassificationReport:
    """Scores for the positive class (label 1, real news) plus breakdowns."""

    confusion: ConfusionCounts
    accuracy: float
    precision: float
    recall: float
    f1: float
    per_class: dict[int, ClassScores]
    macro: ClassScores
    weighted: ClassScores
    undefined: tuple[str, ...] = ()


def _validate_pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a).reshape(-1)
    b = np.asarray(b).reshape(-1)
    if a.shape != b.shape:
        raise LengthMismatch(f"{a.size} labels vs {b.size} predictions")
    if a.size == 0:
        raise EmptyInput("no examples to evaluate")
    return a, b


def confusion_counts(labels, predicted, positive: int = 1) -> ConfusionCounts:
    y, p = _validate_pair(labels, predicted)
    pos_true, pos_pred = y == positive, p == positive
    return ConfusionCounts(
        tp=int(np.sum(pos_true & pos_pred)),
        fp=int(np.sum(~pos_true & pos_pred)),
        tn=int(np.sum(~pos_true & ~pos_pred)),
        fn=int(np.sum(pos_true & ~pos_pred)),
    )


def classification_metrics(labels, predicted, positive: int = 1) -> ClassificationReport:
    y, p = _validate_pair(labels, predicted)
    flags: list[str] = []
    per_class = {}
    for cls in (0, 1):
        c = confusion_counts(y, p, cls)
        prec = _ratio(c.tp, c.tp + c.fp, f"precision[{cls}]", flags)
        rec = _ratio(c.tp, c.tp + c.fn, f"recall[{cls}]", flags)
        per_class[cls] = ClassScores(prec, rec, _f1(prec, rec), c.tp + c.fn)

    scores = list(per_class.values())
    total = sum(s.support for s in scores)
    macro = ClassScores(
        float(np.mean([s.precision for s in scores])),
        float(np.mean([s.recall for s in scores])),
        float(np.mean([s.f1 for s in scores])),
        total,
    )
    weighted = ClassScores(
        sum(s.precision * s.support for s in scores) / total,
        sum(s.recall * s.support for s in scores) / total,
        sum(s.f1 * s.support for s in scores) / total,
        total,
    )
    head = per_class[positive]
    return ClassificationReport(
        confusion=confusion_counts(y, p, positive),
        accuracy=float(np.mean(y == p)),
        precision=head.precision,
        recall=head.recall,
        f1=head.f1,
        per_class=per_class,
        macro=macro,
        weighted=weighted,
        undefined=tuple(flags),
    )


# ---------------------------------------------------------------------------
# ROC


def _binary_scores(labels, scores) -> tuple[np.ndarray, np.ndarray]:
    y, s = _validate_pair(labels, scores)
    y = y.astype(np.int64)
    s = s.astype(np.float64)
    if not np.all(np.isin(y, (0, 1))):
        raise ValueError("labels must be 0/1")
    if y.min() == y.max():
        raise SingleClass("ROC analysis needs both classes present")
    return y, s


def roc_auc(labels, scores) -> float:
    """Probability that a random positive outscores a random negative (ties = 1/2)."""
    y, s = _binary_scores(labels, scores)
    ranks = rankdata(s)  # average ranks for ties
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_curve(labels, scores) -> list[tuple[float, float, float]]:
    """``(fpr, tpr, threshold)`` points; a row is positive when score >= threshold.

    The first point is ``(0, 0, inf)`` and the last is ``(1, 1, min score)``.
    """
    y, s = _binary_scores(labels, scores)
    order = np.argsort(-s, kind="stable")
    s_sorted, y_sorted = s[order], y[order]
    # Last index of each run of equal scores.
    ends = np.flatnonzero(np.diff(s_sorted) != 0)
    ends = np.append(ends, s_sorted.size - 1)
    tps = np.cumsum(y_sorted)[ends]
    fps = (ends + 1) - tps
    n_pos, n_neg = tps[-1], fps[-1]
    curve = [(0.0, 0.0, math.inf)]
    curve += [(float(f / n_neg), float(t / n_pos), float(s_sorted[e]))
              for f, t, e in zip(fps, tps, ends)]
    return curve


def auc_trapezoid(curve: Sequence[tuple[float, float, float]]) -> float:
    fpr = np.array([c[0] for c in curve])
    tpr = np.array([c[1] for c in curve])
    return float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))


def write_roc_csv(curve, destination) -> None:
    lines = ["threshold,fpr,tpr"]
    lines += [f"{t!r},{f!r},{r!r}" for f, r, t in curve]
    with open(destination, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# ranking


@dataclass(frozen=True)
class RankedList:
    """One query's ranking.  ``n_relevant`` counts relevant items in the whole
    candidate universe and defaults to the number marked in the list."""

    ids: tuple[str, ...]
    relevance: tuple[int, ...]
    n_relevant: int | None = None

    def __post_init__(self):
        if len(self.ids) != len(self.relevance):
            raise LengthMismatch("ids and relevance marks differ in length")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("duplicate ids in ranked list")
        if any(r not in (0, 1) for r in self.relevance):
            raise ValueError("relevance marks must be 0 or 1")
        marked = sum(self.relevance)
        if self.n_relevant is None:
            object.__setattr__(self, "n_relevant", marked)
        elif self.n_relevant < marked:
            raise ValueError("n_relevant is smaller than the relevant items listed")

    @classmethod
    def from_marks(cls, marks: Sequence[int], n_relevant: int | None = None) -> "RankedList":
        return cls(tuple(str(i) for i in range(len(marks))), tuple(int(m) for m in marks), n_relevant)


def _check_lists(ranked_lists, k: int) -> list[RankedList]:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    lists = list(ranked_lists)
    if not lists:
        raise EmptyQuerySet("no queries")
    return lists


def mrr_at_k(ranked_lists: Sequence[RankedList], k: int) -> float:
    lists = _check_lists(ranked_lists, k)
    total = 0.0
    for rl in lists:
        for rank, rel in enumerate(rl.relevance[:k], 1):
            if rel:
                total += 1.0 / rank
                break
    return total / len(lists)


def recall_at_k(ranked_lists: Sequence[RankedList], k: int) -> float:
    lists = _check_lists(ranked_lists, k)
    total = 0.0
    for pos, rl in enumerate(lists):
        if rl.n_relevant == 0:
            raise NoRelevant(f"query {pos} has no relevant items")
        total += sum(rl.relevance[:k]) / rl.n_relevant
    return total / len(lists)


def ndcg_at_k(ranked_lists: Sequence[RankedList], k: int) -> float:
    """Binary-gain nDCG with a 1/log2(rank + 1) discount."""
    lists = _check_lists(ranked_lists, k)
    total = 0.0
    for rl in lists:
        if rl.n_relevant == 0:
            continue
        dcg = sum(rel / math.log2(rank + 1) for rank, rel in enumerate(rl.relevance[:k], 1))
        ideal = sum(1.0 / math.log2(rank + 1) for rank in range(1, min(k, rl.n_relevant) + 1))
        total += dcg / ideal
    return total / len(lists)


def ranking_metrics(ranked_lists: Sequence[RankedList], cutoffs: Sequence[int]) -> dict[str, float]:
    out = {}
    for k in cutoffs:
        out[f"mrr@{k}"] = mrr_at_k(ranked_lists, k)
        out[f"recall@{k}"] = recall_at_k(ranked_lists, k)
        out[f"ndcg@{k}"] = ndcg_at_k(ranked_lists, k)
    return out


# ---------------------------------------------------------------------------
# report


@dataclass
class EvalReport:
    n_examples: int
    accuracy: float
    precision: float
    recall: float
    f1: float
    auc: float
    confusion: dict
    per_class: dict
    macro: dict
    weighted: dict
    ranking: dict = field(default_factory=dict)
    undefined: list = field(default_factory=list)

    @classmethod
    def build(cls, labels, predicted, scores, ranking: dict | None = None) -> "EvalReport":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UndefinedMetricWarning)
            cls_report = classification_metrics(labels, predicted)
        try:
            auc = roc_auc(labels, scores)
            undefined = list(cls_report.undefined)
        except SingleClass:
            auc = 0.0
            undefined = list(cls_report.undefined) + ["auc"]
        return cls(
            n_examples=cls_report.confusion.total,
            accuracy=cls_report.accuracy,
            precision=cls_report.precision,
            recall=cls_report.recall,
            f1=cls_report.f1,
            auc=auc,
            confusion=asdict(cls_report.confusion),
            per_class={
                "fake": asdict(cls_report.per_class[0]),
                "real": asdict(cls_report.per_class[1]),
            },
            macro=asdict(cls_report.macro),
            weighted=asdict(cls_report.weighted),
            ranking=dict(ranking or {}),
            undefined=undefined,
        )

    def to_json(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, obj: dict) -> "EvalReport":
        return cls(**obj)

    def to_table(self) -> str:
        rows = [f"{'class':<14}{'precision':>10}{'recall':>10}{'f1':>10}{'support':>9}"]
        for name, s in (("fake", self.per_class["fake"]), ("real", self.per_class["real"]),
                        ("macro avg", self.macro), ("weighted avg", self.weighted)):
            rows.append(f"{name:<14}{s['precision']:>10.4f}{s['recall']:>10.4f}"
                        f"{s['f1']:>10.4f}{s['support']:>9d}")
        rows.append(f"{'accuracy':<14}{self.accuracy:>10.4f}")
        rows.append(f"{'auc':<14}{self.auc:>10.4f}")
        for key in sorted(self.ranking):
            value = self.ranking[key]
            cell = f"{value:>10d}" if isinstance(value, int) else f"{value:>10.4f}"
            rows.append(f"{key:<14}{cell}")
        return "\n".join(rows)
