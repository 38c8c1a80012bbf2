import time
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nmibs.evaluation import (
    EvalError,
    average_accuracy,
    confusion,
    evaluate,
    overall_accuracy,
    per_class_accuracy,
    run_timed,
    write_report_csv,
)


def test_two_class_example():
    cm = confusion([1, 1, 2, 2], [1, 2, 2, 2], [1, 2])
    assert cm.counts.tolist() == [[1, 1], [0, 2]]
    assert overall_accuracy(cm) == 0.75
    assert average_accuracy(cm) == 0.75


def test_imbalanced_example():
    true = [1] * 10 + [2]
    pred = [1] * 9 + [2, 2]
    cm = confusion(true, pred, [1, 2])
    assert cm.counts.tolist() == [[9, 1], [0, 1]]
    assert overall_accuracy(cm) == pytest.approx(10 / 11, abs=1e-12)
    assert average_accuracy(cm) == pytest.approx(0.95, abs=1e-12)


def test_perfect_prediction():
    report = evaluate([1, 2, 3], [1, 2, 3], [1, 2, 3])
    assert report.oa == report.aa == 1.0
    assert report.to_dict()["oa_pct"] == 100.0


def test_empty_input_rejected():
    with pytest.raises(EvalError):
        confusion([], [], [1, 2])


def test_length_mismatch_rejected():
    with pytest.raises(EvalError, match="length mismatch"):
        confusion([1, 2], [1], [1, 2])


def test_unknown_predicted_label_rejected():
    with pytest.raises(EvalError, match="unknown predicted label 7"):
        confusion([1, 2], [1, 7], [1, 2])


def test_missing_class_named_in_error():
    cm = confusion([1, 1], [1, 2], [1, 2])
    with pytest.raises(EvalError, match="class 2 never appears in test set"):
        per_class_accuracy(cm)


def test_run_timed():
    result, elapsed = run_timed(lambda x: x * 2, 4)
    assert result == 8 and elapsed >= 0
    _, slept = run_timed(time.sleep, 0.01)
    assert slept >= 0.009


def test_report_timing_optional():
    report = evaluate([1, 2], [1, 2], [1, 2], elapsed_seconds=1.5)
    assert report.to_dict()["elapsed_seconds"] == 1.5
    assert "elapsed_seconds" not in report.to_dict(include_timing=False)


def test_report_csv(tmp_path):
    path = tmp_path / "r.csv"
    write_report_csv([{"method": "nmibs", "k": 5, "train_fraction": 0.1, "oa_pct": "90.00", "aa_pct": "88.00", "time_s": "1.000", "extra": 1}], path)
    assert path.read_text().splitlines() == ["method,k,train_fraction,oa_pct,aa_pct,time_s", "nmibs,5,0.1,90.00,88.00,1.000"]


labels_pairs = st.integers(2, 5).flatmap(
    lambda n: st.lists(st.tuples(st.integers(1, n), st.integers(1, n)), min_size=1, max_size=60).map(lambda p: (n, p))
)


def _brute(pairs, classes):
    total = len(pairs)
    correct = sum(t == p for t, p in pairs)
    per = []
    for c in classes:
        rows = [p for t, p in pairs if t == c]
        per.append(sum(p == c for p in rows) / len(rows))
    return correct / total, sum(per) / len(per)


@settings(max_examples=80, deadline=None)
@given(labels_pairs)
def test_metrics_match_recount(data):
    n, pairs = data
    classes = sorted({t for t, _ in pairs})
    pairs = [(t, p if p in classes else classes[0]) for t, p in pairs]
    cm = confusion([t for t, _ in pairs], [p for _, p in pairs], classes)
    oa, aa = _brute(pairs, classes)
    assert cm.total == len(pairs)
    assert overall_accuracy(cm) == pytest.approx(oa, abs=1e-12)
    assert average_accuracy(cm) == pytest.approx(aa, abs=1e-12)
    assert 0 <= overall_accuracy(cm) <= 1 and 0 <= average_accuracy(cm) <= 1


@settings(max_examples=60, deadline=None)
@given(labels_pairs, st.integers(2, 6))
def test_aa_invariant_to_duplicating_one_class(data, times):
    n, pairs = data
    classes = sorted({t for t, _ in pairs})
    pairs = [(t, p if p in classes else classes[0]) for t, p in pairs]
    target = classes[0]
    grown = pairs + [pr for pr in pairs if pr[0] == target] * (times - 1)
    base = confusion(*zip(*pairs), classes)
    more = confusion(*zip(*grown), classes)
    assert average_accuracy(more) == pytest.approx(average_accuracy(base), abs=1e-12)
    assert Counter(t for t, _ in grown)[target] == times * Counter(t for t, _ in pairs)[target]
