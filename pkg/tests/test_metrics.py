import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from retrievalnet.errors import EmptyInput, EmptyQuerySet, LengthMismatch, NoRelevant, SingleClass
from retrievalnet.metrics import (
    EvalReport,
    RankedList,
    UndefinedMetricWarning,
    auc_trapezoid,
    classification_metrics,
    confusion_counts,
    mrr_at_k,
    ndcg_at_k,
    ranking_metrics,
    recall_at_k,
    roc_auc,
    roc_curve,
    write_roc_csv,
)

from oracles import (
    auc_pairwise,
    confusion_reference,
    mrr_reference,
    ndcg_reference,
    recall_reference,
)


def outcome_arrays(tp, fp, tn, fn):
    """Label/prediction vectors realising the given confusion counts (positive = 1)."""
    labels = [1] * tp + [0] * fp + [0] * tn + [1] * fn
    predicted = [1] * tp + [1] * fp + [0] * tn + [0] * fn
    return np.array(labels), np.array(predicted)


# -- classification ------------------------------------------------------------

def test_f1_of_reported_precision_recall():
    # Precision 100.00%, recall 83.33% -> F1 90.91%.
    labels, predicted = outcome_arrays(tp=5, fp=0, tn=14, fn=1)
    rep = classification_metrics(labels, predicted)
    assert rep.precision == 1.0
    assert rep.recall == pytest.approx(0.8333, abs=5e-5)
    assert rep.f1 == pytest.approx(0.9091, abs=5e-5)
    assert rep.accuracy == pytest.approx(0.95)


def test_classification_report_table_pattern():
    # 14 fake all correct, 6 real with 5 correct.
    labels, predicted = outcome_arrays(tp=5, fp=0, tn=14, fn=1)
    rep = classification_metrics(labels, predicted)
    fake, real = rep.per_class[0], rep.per_class[1]
    assert (round(fake.precision, 2), round(fake.recall, 2), round(fake.f1, 2)) == (0.93, 1.00, 0.97)
    assert (round(real.precision, 2), round(real.recall, 2), round(real.f1, 2)) == (1.00, 0.83, 0.91)
    assert (round(rep.macro.precision, 2), round(rep.macro.recall, 2), round(rep.macro.f1, 2)) == (0.97, 0.92, 0.94)
    assert (round(rep.weighted.precision, 2), round(rep.weighted.recall, 2),
            round(rep.weighted.f1, 2)) == (0.95, 0.95, 0.95)
    assert rep.macro.f1 == pytest.approx((fake.f1 + real.f1) / 2)
    assert rep.weighted.f1 == pytest.approx((14 * fake.f1 + 6 * real.f1) / 20)


@pytest.mark.parametrize("counts, triple", [
    # precision 0.8000, recall 0.8889, F1 0.8421, accuracy 0.85
    ((8, 2, 9, 1), (0.8000, 0.8889, 0.8421, 0.85)),
    # precision 88.89%, recall 80.00%, F1 84.21%, accuracy 85.00%
    ((8, 1, 9, 2), (0.8889, 0.8000, 0.8421, 0.85)),
    # precision 0.7500, recall 0.6667, F1 0.7059, accuracy 0.75
    ((6, 2, 9, 3), (0.7500, 0.6667, 0.7059, 0.75)),
])
def test_reported_metric_triples(counts, triple):
    rep = classification_metrics(*outcome_arrays(*counts))
    p, r, f1, acc = triple
    assert rep.precision == pytest.approx(p, abs=5e-5)
    assert rep.recall == pytest.approx(r, abs=5e-5)
    assert rep.f1 == pytest.approx(f1, abs=5e-5)
    assert rep.accuracy == pytest.approx(acc, abs=5e-5)


def test_all_correct():
    labels = np.array([0, 1, 1, 0, 1])
    rep = classification_metrics(labels, labels)
    assert rep.accuracy == 1.0
    assert rep.per_class[0].f1 == rep.per_class[1].f1 == 1.0


def test_all_wrong():
    labels = np.array([0, 1, 1, 0, 1])
    assert classification_metrics(labels, 1 - labels).accuracy == 0.0


def test_zero_denominator_warns_and_reports_zero():
    with pytest.warns(UndefinedMetricWarning):
        rep = classification_metrics([0, 0, 1], [0, 0, 0])
    assert rep.precision == 0.0 and rep.f1 == 0.0
    assert "precision[1]" in rep.undefined


def test_errors():
    with pytest.raises(LengthMismatch):
        classification_metrics([0, 1], [0])
    with pytest.raises(EmptyInput):
        classification_metrics([], [])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=60))
def test_confusion_and_f1_identity(pairs):
    labels = [a for a, _ in pairs]
    predicted = [b for _, b in pairs]
    c = confusion_counts(labels, predicted)
    assert (c.tp, c.fp, c.tn, c.fn) == confusion_reference(labels, predicted)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UndefinedMetricWarning)
        rep = classification_metrics(labels, predicted)
    for value in (rep.accuracy, rep.precision, rep.recall, rep.f1, rep.macro.f1, rep.weighted.f1):
        assert 0.0 <= value <= 1.0
    if rep.precision + rep.recall > 0:
        assert rep.f1 == pytest.approx(2 * rep.precision * rep.recall / (rep.precision + rep.recall))


# -- ROC -----------------------------------------------------------------------

def test_perfect_separation():
    assert roc_auc([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9]) == 1.0


def test_all_ties_give_half():
    assert roc_auc([0, 1, 0, 1, 1], [0.3] * 5) == 0.5


def test_single_class():
    with pytest.raises(SingleClass):
        roc_auc([1, 1], [0.2, 0.3])


def test_rank_form_matches_trapezoid():
    rng = np.random.default_rng(0)
    labels = rng.integers(0, 2, 200)
    scores = rng.random(200)
    a = roc_auc(labels, scores)
    b = auc_trapezoid(roc_curve(labels, scores))
    assert abs(a - b) <= 1e-10
    assert abs(a - auc_pairwise(labels, scores)) <= 1e-12


def test_rank_form_matches_trapezoid_with_ties():
    rng = np.random.default_rng(1)
    labels = rng.integers(0, 2, 300)
    scores = rng.integers(0, 10, 300) / 10.0
    assert abs(roc_auc(labels, scores) - auc_trapezoid(roc_curve(labels, scores))) <= 1e-10
    assert abs(roc_auc(labels, scores) - auc_pairwise(labels, scores)) <= 1e-12


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(-500, 500)), min_size=2, max_size=80))
def test_auc_invariant_under_monotone_transform(rows):
    labels = [y for y, _ in rows]
    if len(set(labels)) < 2:
        return
    # A 0.01 grid keeps exp(s) * 3 + 1 strictly increasing in floating point.
    scores = np.array([s / 100 for _, s in rows])
    base = roc_auc(labels, scores)
    assert roc_auc(labels, np.exp(scores) * 3 + 1) == pytest.approx(base, abs=1e-12)
    assert 0.0 <= base <= 1.0


def test_roc_curve_endpoints_and_csv(tmp_path):
    curve = roc_curve([0, 1, 0, 1], [0.1, 0.9, 0.4, 0.35])
    assert curve[0] == (0.0, 0.0, math.inf)
    assert curve[-1][:2] == (1.0, 1.0)
    fprs = [c[0] for c in curve]
    assert fprs == sorted(fprs)
    write_roc_csv(curve, tmp_path / "roc.csv")
    lines = (tmp_path / "roc.csv").read_text().splitlines()
    assert lines[0] == "threshold,fpr,tpr"
    assert lines[1] == "inf,0.0,0.0"
    assert len(lines) == len(curve) + 1


# -- ranking -------------------------------------------------------------------

def test_mrr_first_relevant():
    assert mrr_at_k([RankedList.from_marks([1, 0, 0])], 10) == 1.0


def test_mrr_rank_three():
    assert mrr_at_k([RankedList.from_marks([0, 0, 1, 0])], 10) == pytest.approx(1 / 3)
    assert mrr_at_k([RankedList.from_marks([0, 0, 1, 0])], 2) == 0.0


def test_recall_all_found():
    # Every relevant item within the top 100 -> 1.0.
    marks = [0] * 150
    for pos in (0, 5, 99):
        marks[pos] = 1
    assert recall_at_k([RankedList.from_marks(marks)], 100) == 1.0


def test_recall_none_found():
    assert recall_at_k([RankedList.from_marks([0, 0, 0, 1])], 3) == 0.0


def test_recall_no_relevant():
    with pytest.raises(NoRelevant):
        recall_at_k([RankedList.from_marks([0, 0])], 2)


def test_recall_uses_universe_count():
    # Two relevant items exist but only one was retrieved.
    assert recall_at_k([RankedList.from_marks([1, 0, 0], n_relevant=2)], 3) == 0.5


def test_ndcg_ideal():
    assert ndcg_at_k([RankedList.from_marks([1, 1, 0, 0])], 4) == 1.0


def test_ndcg_single_relevant_at_rank_two():
    assert abs(ndcg_at_k([RankedList.from_marks([0, 1, 0])], 2) - 1 / math.log2(3)) <= 1e-9
    assert abs(ndcg_at_k([RankedList.from_marks([0, 1, 0])], 10) - 1 / math.log2(3)) <= 1e-9


def test_empty_query_set():
    for fn in (mrr_at_k, recall_at_k, ndcg_at_k):
        with pytest.raises(EmptyQuerySet):
            fn([], 5)


def test_ranked_list_validation():
    with pytest.raises(LengthMismatch):
        RankedList(("a", "b"), (1,))
    with pytest.raises(ValueError):
        RankedList(("a", "a"), (1, 0))
    with pytest.raises(ValueError):
        RankedList(("a",), (2,))
    with pytest.raises(ValueError):
        RankedList(("a", "b"), (1, 1), n_relevant=1)


mark_lists = st.lists(st.lists(st.integers(0, 1), min_size=1, max_size=30), min_size=1, max_size=8)


@settings(max_examples=100, deadline=None)
@given(marks=mark_lists, extra=st.lists(st.integers(0, 3), min_size=8, max_size=8), k=st.integers(1, 35))
def test_ranking_metrics_match_definitions(marks, extra, k):
    marks = [m if any(m) else m[:-1] + [1] for m in marks]
    n_rel = [sum(m) + e for m, e in zip(marks, extra)]
    lists = [RankedList.from_marks(m, n) for m, n in zip(marks, n_rel)]
    assert mrr_at_k(lists, k) == pytest.approx(mrr_reference(marks, k), abs=1e-12)
    assert recall_at_k(lists, k) == pytest.approx(recall_reference(marks, n_rel, k), abs=1e-12)
    assert ndcg_at_k(lists, k) == pytest.approx(ndcg_reference(marks, n_rel, k), abs=1e-12)
    for fn in (mrr_at_k, recall_at_k, ndcg_at_k):
        assert 0.0 <= fn(lists, k) <= 1.0 + 1e-12
    for fn in (mrr_at_k, recall_at_k):
        assert fn(lists, k + 1) >= fn(lists, k) - 1e-12
    # Once k covers every relevant item the ideal gain is fixed, so nDCG
    # can only grow from there on.
    k_full = max(n_rel)
    assert ndcg_at_k(lists, k_full + k) >= ndcg_at_k(lists, k_full) - 1e-12


def test_ndcg_can_fall_while_k_is_below_relevant_count():
    # With the ideal gain taken over min(k, n_relevant) items, a hit at rank 1
    # is perfect at k=1 but not at k=2 when a second relevant item exists.
    lists = [RankedList.from_marks([1, 0], n_relevant=2)]
    assert ndcg_at_k(lists, 1) == 1.0
    assert ndcg_at_k(lists, 2) == pytest.approx(1 / (1 + 1 / math.log2(3)))


def test_ranking_metrics_keys():
    out = ranking_metrics([RankedList.from_marks([0, 1])], [1, 2])
    assert sorted(out) == ["mrr@1", "mrr@2", "ndcg@1", "ndcg@2", "recall@1", "recall@2"]


# -- report --------------------------------------------------------------------

def test_eval_report_f1_consistency_and_json():
    labels, predicted = outcome_arrays(tp=5, fp=0, tn=14, fn=1)
    scores = np.where(predicted == 1, 0.9, 0.1)
    report = EvalReport.build(labels, predicted, scores, {"mrr@10": 0.5})
    p, r = report.precision, report.recall
    assert report.f1 == pytest.approx(2 * p * r / (p + r), abs=1e-15)
    again = EvalReport.from_json(json.loads(report.dumps()))
    assert again == report
    assert report.dumps() == again.dumps()
    assert "macro avg" in report.to_table()


def test_eval_report_single_class_is_finite():
    report = EvalReport.build([1, 1, 1], [1, 0, 1], [0.9, 0.2, 0.8])
    assert report.auc == 0.0 and "auc" in report.undefined
    assert all(math.isfinite(v) for v in (report.precision, report.recall, report.f1))
