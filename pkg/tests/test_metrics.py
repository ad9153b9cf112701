import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from longfin.document import ENTITY_TYPES, EntitySpan
from longfin.metrics import EvalReport, corpus_f1, entity_f1, format_report
from oracles import brute_force_scores


def test_hand_example():
    gold = [EntitySpan("TotalAssets", 5, 7), EntitySpan("QuarterKeys", 10, 11)]
    pred = [EntitySpan("TotalAssets", 5, 7), EntitySpan("EndCash", 20, 21)]
    rep = entity_f1(pred, gold)
    assert (rep.micro_precision, rep.micro_recall, rep.micro_f1) == (0.5, 0.5, 0.5)
    assert rep.per_type["TotalAssets"].f1 == 1.0
    assert rep.per_type["EndCash"].precision == 0.0 and rep.per_type["QuarterKeys"].recall == 0.0


def test_empty_and_perfect():
    assert entity_f1([], []).micro_f1 == 0.0
    spans = [EntitySpan("EndCash", 0, 2)]
    assert entity_f1(spans, spans).micro_f1 == 1.0
    assert entity_f1([], spans).micro_recall == 0.0


def test_partial_overlap_is_a_miss():
    rep = entity_f1([EntitySpan("EndCash", 0, 1)], [EntitySpan("EndCash", 0, 2)])
    assert (rep.tp, rep.fp, rep.fn) == (0, 1, 1)


def test_type_mismatch_is_a_miss():
    rep = entity_f1([EntitySpan("EndCash", 0, 1)], [EntitySpan("TotalAssets", 0, 1)])
    assert rep.micro_f1 == 0.0 and rep.per_type["TotalAssets"].fn == 1


def test_duplicates_collapse():
    s = EntitySpan("EndCash", 3, 4)
    assert entity_f1([s, s], [s]).micro_precision == 1.0


def test_overlapping_predictions_rejected():
    with pytest.raises(ValueError):
        entity_f1([EntitySpan("EndCash", 0, 3), EntitySpan("TotalAssets", 2, 5)], [])


@st.composite
def span_set(draw):
    spans, pos = [], 0
    for _ in range(draw(st.integers(0, 5))):
        start = pos + draw(st.integers(0, 3))
        end = start + draw(st.integers(0, 2))
        spans.append(EntitySpan(draw(st.sampled_from(ENTITY_TYPES[:3])), start, end))
        pos = end + 1
    return spans


@settings(max_examples=1000)
@given(span_set(), span_set())
def test_matches_brute_force(pred, gold):
    rep = entity_f1(pred, gold)
    counts, (p, r, f) = brute_force_scores(pred, gold, ENTITY_TYPES)
    assert (rep.micro_precision, rep.micro_recall, rep.micro_f1) == (p, r, f)
    for t in ENTITY_TYPES:
        ts = rep.per_type[t]
        assert (ts.tp, ts.fp, ts.fn) == counts[t]


@given(span_set(), span_set())
def test_swapping_sides_swaps_precision_and_recall(pred, gold):
    a, b = entity_f1(pred, gold), entity_f1(gold, pred)
    assert (a.micro_precision, a.micro_recall, a.micro_f1) == (b.micro_recall, b.micro_precision, b.micro_f1)


@given(span_set(), span_set())
def test_adding_a_gold_span_to_predictions_never_hurts_recall(pred, gold):
    base = entity_f1(pred, gold)
    for g in gold:
        if all(g.end < p.start or g.start > p.end or g == p for p in pred):
            assert entity_f1(pred + [g], gold).micro_recall >= base.micro_recall
            break


def test_corpus_pools_counts():
    a = ([EntitySpan("EndCash", 0, 0)], [EntitySpan("EndCash", 0, 0)])
    b = ([], [EntitySpan("EndCash", 4, 4), EntitySpan("TotalAssets", 6, 6)])
    rep = corpus_f1([a, b], truncated_tokens=7)
    assert (rep.tp, rep.fp, rep.fn, rep.truncated_tokens) == (1, 0, 2, 7)
    assert rep.micro_recall == pytest.approx(1 / 3)


def test_json_fields():
    d = json.loads(entity_f1([], []).to_json())
    assert set(d) == {"micro_precision", "micro_recall", "micro_f1", "tp", "fp", "fn", "per_type", "truncated_tokens"}
    assert set(d["per_type"]) == set(ENTITY_TYPES)
    assert set(d["per_type"]["EndCash"]) == {"precision", "recall", "f1", "tp", "fp", "fn"}


def test_format_report():
    rep = entity_f1([EntitySpan("TotalAssets", 1, 1)], [EntitySpan("TotalAssets", 1, 1)])
    text = format_report(rep, "ours")
    lines = text.splitlines()
    assert [c.strip() for c in lines[0].split("|")] == ["Model", "Precision", "Recall", "F1"]
    assert [c.strip() for c in lines[2].split("|")] == ["ours", "100.00", "100.00", "100.00"]
    assert "Total Assets" in lines[4] and "Change in Cash" in lines[4]
    assert "truncated" not in text
    assert "truncated tokens: 3" in format_report(EvalReport(truncated_tokens=3))
