import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from anonkit.core import EntityType, Span
from anonkit.errors import OverlappingGold
from anonkit.evaluation import (
    Annotation,
    compute_metrics,
    evaluate,
    format_table,
    load_annotations,
    match_detections,
)

PERSON = EntityType.custom("PERSON")
IP = EntityType("IP_ADDRESS")


def ann(doc, start, end, etype=IP):
    return Annotation(doc, Span(start, end), etype)


@pytest.mark.parametrize("counts,p,r,f1", [
    ((13, 0, 8), 1.0, 0.619, 0.765),
    ((41, 0, 7), 1.0, 0.8542, 0.9213),
    ((0, 0, 0), 1.0, 1.0, 1.0),
])
def test_metric_examples(counts, p, r, f1):
    m = compute_metrics(*counts)
    assert round(m.precision, 4) == p
    assert round(m.recall, 4 if r > 0.8 else 3) == r
    assert round(m.f1, 4 if f1 > 0.9 else 3) == f1


def test_metrics_keep_full_precision():
    m = compute_metrics(13, 0, 8)
    assert m.recall == 13 / 21
    assert m.f1 == 2 * (13 / 21) / (1 + 13 / 21)


def test_degenerate_conventions():
    assert compute_metrics(0, 5, 0).as_dict() == {"tp": 0, "fp": 5, "fn": 0, "precision": 0.0,
                                                  "recall": 1.0, "f1": 0.0}
    assert compute_metrics(0, 0, 4).precision == 1.0
    assert compute_metrics(0, 3, 4).f1 == 0.0
    with pytest.raises(ValueError):
        compute_metrics(-1, 0, 0)


def test_matching_examples():
    gold = [ann("d", 0, 8), ann("d", 10, 20), ann("e", 0, 8)]
    assert match_detections(gold, gold) == (3, 0, 0)
    name = [ann("d", 0, 15, PERSON)]
    first_name_only = [ann("d", 0, 7, PERSON)]
    assert match_detections(name, first_name_only) == (0, 1, 1)
    assert match_detections([ann("d", i * 10, i * 10 + 5) for i in range(21)], []) == (0, 0, 21)


def test_type_and_doc_must_match():
    assert match_detections([ann("d", 0, 8)], [ann("d", 0, 8, PERSON)]) == (0, 1, 1)
    assert match_detections([ann("d", 0, 8)], [ann("e", 0, 8)]) == (0, 1, 1)


def test_overlapping_gold_rejected():
    with pytest.raises(OverlappingGold):
        match_detections([ann("d", 0, 8), ann("d", 5, 9)], [])
    assert match_detections([ann("d", 0, 8), ann("e", 5, 9)], []) == (0, 0, 2)


def test_duplicate_prediction_counts_once():
    assert match_detections([ann("d", 0, 8)], [ann("d", 0, 8), ann("d", 0, 8)]) == (1, 1, 0)


def test_load_and_evaluate(tmp_path):
    gold = tmp_path / "gold.jsonl"
    pred = tmp_path / "pred.jsonl"
    gold.write_text("\n".join(json.dumps(r) for r in [
        {"doc": "a.txt", "start": 0, "end": 8, "type": "IP_ADDRESS", "text": "10.0.0.1"},
        {"doc": "a.txt", "start": 10, "end": 25, "type": "CUSTOM:PERSON", "text": "Beatriz Machado"},
    ]) + "\n")
    pred.write_text("\n".join(json.dumps(r) for r in [
        {"doc": "a.txt", "start": 0, "end": 8, "type": "IP_ADDRESS", "preserved": False},
        {"doc": "a.txt", "start": 10, "end": 17, "type": "CUSTOM:PERSON"},
        {"doc": "a.txt", "start": 30, "end": 40, "type": "CPE_STRING", "preserved": True},
    ]) + "\n")
    overall, per_type = evaluate(load_annotations(gold), load_annotations(pred))
    assert (overall.tp, overall.fp, overall.fn) == (1, 1, 1)
    assert set(per_type) == {"IP_ADDRESS", "CUSTOM:PERSON"}
    assert per_type["IP_ADDRESS"].f1 == 1.0
    assert len(load_annotations(pred, include_preserved=True)) == 3
    table = format_table(overall, per_type)
    assert "OVERALL" in table and "0.5000" in table


def test_bad_annotation_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"doc": "a", "start": 0}\n')
    with pytest.raises(ValueError, match="bad.jsonl:1"):
        load_annotations(path)


# -- properties ------------------------------------------------------------

@st.composite
def gold_and_pred(draw):
    docs = ["a", "b", "c"]
    types = [IP, PERSON, EntityType("HASH")]
    gold = []
    for doc in docs:
        cursor = 0
        for _ in range(draw(st.integers(0, 6))):
            cursor += draw(st.integers(0, 5))
            length = draw(st.integers(1, 6))
            gold.append(ann(doc, cursor, cursor + length, draw(st.sampled_from(types))))
            cursor += length
    pred = [g for g in gold if draw(st.booleans())]
    pred += [ann(draw(st.sampled_from(docs)), s, s + draw(st.integers(1, 6)), draw(st.sampled_from(types)))
             for s in draw(st.lists(st.integers(0, 60), max_size=6))]
    return gold, pred


@given(gold_and_pred(), st.randoms())
def test_conservation_and_permutation(sample, rnd):
    gold, pred = sample
    tp, fp, fn = match_detections(gold, pred)
    assert tp + fn == len(gold) and tp + fp == len(pred)
    g2, p2 = list(gold), list(pred)
    rnd.shuffle(g2)
    rnd.shuffle(p2)
    assert match_detections(g2, p2) == (tp, fp, fn)


@given(st.integers(0, 200), st.integers(0, 200), st.integers(0, 200))
def test_harmonic_mean(tp, fp, fn):
    m = compute_metrics(tp, fp, fn)
    assert 0.0 <= m.precision <= 1.0 and 0.0 <= m.recall <= 1.0 and 0.0 <= m.f1 <= 1.0
    assert m.f1 <= min(2 * m.precision, 2 * m.recall) + 1e-12
    if m.precision == m.recall:
        assert m.f1 == pytest.approx(m.precision) or m.precision == 0.0
