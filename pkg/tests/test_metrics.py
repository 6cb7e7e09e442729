from __future__ import annotations

import io
import math
import random

import pytest

from capmatch.corpus import Sample
from capmatch.errors import MetricError
from capmatch.metrics import (
    RobustnessRecord,
    TableRow,
    agreement,
    avg_robustness,
    axis_transform,
    binomial_halfwidth,
    caption_stats,
    dataset_utilization,
    effective_robustness,
    err,
    fit_trend,
    label_quality,
    read_robustness_csv,
    verify_results_table,
)


# --- label quality -----------------------------------------------------------


def test_label_quality_reference_counts():
    """61024 correct / 3895 incorrect / 59432 unlabeled over 124351 samples."""
    pairs = []
    truth = {}
    i = 0
    for _ in range(61024):
        pairs.append((f"s{i}", 1)); truth[f"s{i}"] = 1; i += 1
    for _ in range(3895):
        pairs.append((f"s{i}", 2)); truth[f"s{i}"] = 1; i += 1
    for _ in range(59432):
        pairs.append((f"s{i}", None)); truth[f"s{i}"] = 1; i += 1
    report = label_quality(pairs, truth)
    assert report.total == 124351
    assert report.accuracy == pytest.approx(0.94, abs=0.005)
    assert report.ds_util == pytest.approx(0.49, abs=0.005)


def test_label_quality_all_correct():
    pairs = [("a", 3), ("b", 3)]
    report = label_quality(pairs, {"a": 3, "b": 3})
    assert report.accuracy == 1.0 and report.ds_util == 1.0


def test_label_quality_nothing_labeled_has_no_accuracy():
    report = label_quality([("a", None)], {"a": 0})
    assert report.accuracy is None
    assert report.ds_util == 0.0


def test_label_quality_random_recount():
    rng = random.Random(77)
    pairs, truth = [], {}
    for i in range(50):
        sid = f"s{i}"
        truth[sid] = rng.randint(0, 4)
        pairs.append((sid, rng.choice([None, 0, 1, 2, 3, 4])))
    report = label_quality(pairs, truth)
    correct = sum(1 for sid, lab in pairs if lab is not None and lab == truth[sid])
    incorrect = sum(1 for sid, lab in pairs if lab is not None and lab != truth[sid])
    unlabeled = sum(1 for _, lab in pairs if lab is None)
    assert (report.correct, report.incorrect, report.unlabeled) == (correct, incorrect, unlabeled)
    assert report.correct + report.incorrect + report.unlabeled == report.total
    matched = report.correct + report.incorrect
    if matched:
        assert report.ds_util <= report.accuracy
    assert report.ds_util <= matched / report.total


def test_label_quality_per_class():
    pairs = [("a", 0), ("b", 0), ("c", 1), ("d", None)]
    truth = {"a": 0, "b": 1, "c": 1, "d": 0}
    report = label_quality(pairs, truth)
    assert report.per_class[0].matched == 2
    assert report.per_class[0].correct == 1
    assert report.per_class[0].accuracy == 0.5
    assert report.per_class[1].accuracy == 1.0


def test_label_quality_missing_truth_names_sample():
    with pytest.raises(MetricError, match="s1"):
        label_quality([("s1", 0)], {})


def test_label_quality_rejects_multilabel():
    from capmatch.matcher import MatchOutcome

    outcome = MatchOutcome("s1", [1, 2], [], True)
    with pytest.raises(MetricError, match="s1"):
        label_quality([outcome], {"s1": 1})


def test_dataset_utilization():
    assert dataset_utilization(98462, 124351) == pytest.approx(0.79, abs=0.005)
    assert dataset_utilization(9449, 136175) == pytest.approx(0.07, abs=0.005)
    with pytest.raises(MetricError):
        dataset_utilization(5, 0)
    with pytest.raises(MetricError):
        dataset_utilization(7, 5)


# --- agreement ---------------------------------------------------------------


def test_agreement_identical():
    labels = {f"s{i}": i % 3 for i in range(10)}
    assert agreement(labels, dict(labels)) == 1.0


def test_agreement_disjoint_labels():
    a = {f"s{i}": 0 for i in range(10)}
    b = {f"s{i}": 1 for i in range(10)}
    assert agreement(a, b) == 0.0


def test_agreement_random_recount():
    rng = random.Random(3)
    a = {f"s{i}": rng.randint(0, 3) for i in range(100)}
    b = {f"s{i}": rng.randint(0, 3) for i in range(100)}
    expected = sum(1 for k in a if a[k] == b[k]) / 100
    assert agreement(a, b) == expected


def test_agreement_over_intersection_only():
    assert agreement({"a": 1, "b": 2}, {"b": 2, "c": 9}) == 1.0


def test_agreement_empty_intersection_error():
    with pytest.raises(MetricError):
        agreement({"a": 1}, {"b": 1})


# --- robustness aggregates -----------------------------------------------------


def rec(base, *shifts, model_id="m"):
    names = ["in_a", "in_r", "in_s", "in_v2"]
    return RobustnessRecord(model_id, base, dict(zip(names, shifts)))


def test_avg_robustness_reference_rows():
    assert avg_robustness(rec(0.801, 0.094, 0.230, 0.297, 0.710)) == pytest.approx(0.333, abs=0.0015)
    assert avg_robustness(rec(0.9, 0.482, 0.764, 0.713, 0.867)) == pytest.approx(0.707, abs=0.0015)


def test_avg_robustness_constant_shifts():
    assert avg_robustness(rec(0.5, 0.2, 0.2, 0.2, 0.2)) == pytest.approx(0.2)


def test_err_reference_rows():
    assert err(rec(0.801, 0.094, 0.230, 0.297, 0.710)) == pytest.approx(0.416, abs=0.0015)
    assert err(rec(0.124, 0.051, 0.051, 0.051, 0.051)) == pytest.approx(0.411, abs=0.0015)


def test_err_equal_means_one():
    assert err(rec(0.25, 0.25, 0.25, 0.25, 0.25)) == 1.0


def test_err_zero_base_errors():
    with pytest.raises(MetricError):
        err(RobustnessRecord("m", 0.0, {"in_a": 0.1}))


def test_err_invariant_under_shift_order():
    shifts = {"in_a": 0.1, "in_r": 0.4, "in_s": 0.2, "in_v2": 0.3}
    forward = RobustnessRecord("m", 0.5, dict(shifts))
    backward = RobustnessRecord("m", 0.5, dict(reversed(list(shifts.items()))))
    assert err(forward) == err(backward)


def test_record_validation():
    with pytest.raises(MetricError):
        RobustnessRecord("m", 1.2, {"in_a": 0.1})
    with pytest.raises(MetricError):
        RobustnessRecord("m", 0.5, {})
    with pytest.raises(MetricError):
        RobustnessRecord("m", 0.5, {"in_a": -0.1})


def test_binomial_halfwidth():
    assert binomial_halfwidth(0.5, 10000) == pytest.approx(0.0098, abs=1e-4)
    assert binomial_halfwidth(0.801, 5000) == pytest.approx(0.011, abs=0.0005)
    assert binomial_halfwidth(0.0, 123) == 0.0
    big = binomial_halfwidth(0.5, 100)
    small = binomial_halfwidth(0.5, 1_000_000)
    assert small < big / 50


# --- axis transforms and fits --------------------------------------------------


def test_axis_transform_values():
    assert axis_transform(0.5, "logit") == pytest.approx(0.0)
    assert axis_transform(0.1, "log10") == pytest.approx(-1.0)
    assert axis_transform(0.801, "logit") == pytest.approx(1.3926, abs=1e-3)
    assert axis_transform(0.42, "linear") == 0.42


@pytest.mark.parametrize("space", ["logit", "log10"])
@pytest.mark.parametrize("p", [0.0, 1.0, -0.2, 1.5])
def test_axis_transform_domain(space, p):
    with pytest.raises(MetricError):
        axis_transform(p, space)


def test_fit_collinear_r2_is_one():
    points = [(0.1, 0.2), (0.2, 0.4), (0.3, 0.6), (0.4, 0.8)]
    fit = fit_trend(points, "linear")
    assert fit.r2 == pytest.approx(1.0)
    assert fit.slope == pytest.approx(2.0)
    assert fit.intercept == pytest.approx(0.0)
    assert fit.r2_raw == pytest.approx(1.0)


def test_fit_residuals_sum_to_zero():
    rng = random.Random(8)
    points = [(rng.uniform(0.05, 0.9), rng.uniform(0.05, 0.9)) for _ in range(40)]
    for space in ("linear", "logit", "log10"):
        fit = fit_trend(points, space)
        residuals = [
            axis_transform(y, space) - fit.predict_transformed(x) for x, y in points
        ]
        assert abs(sum(residuals)) < 1e-9 * len(points)
        assert 0.0 <= fit.r2 <= 1.0


def test_fit_degenerate_x():
    with pytest.raises(MetricError):
        fit_trend([(0.5, 0.1), (0.5, 0.9)], "linear")
    with pytest.raises(MetricError):
        fit_trend([(0.5, 0.1)], "linear")


def test_predict_round_trips_transform():
    points = [(0.1, 0.05), (0.3, 0.2), (0.6, 0.45), (0.8, 0.7)]
    fit = fit_trend(points, "log10")
    x = 0.4
    assert fit.predict(x) == pytest.approx(10 ** fit.predict_transformed(x))


# --- effective robustness -------------------------------------------------------


def test_effective_robustness_on_line_is_zero():
    from capmatch.metrics import TrendFit

    baseline = TrendFit("linear", 0.5, 0.1, 1.0, 1.0)
    record = rec(0.6, 0.4, 0.4, 0.4, 0.4)  # prediction at 0.6 = 0.4
    assert effective_robustness(record, baseline) == pytest.approx(0.0)


def test_effective_robustness_sign_above_identity_line():
    from capmatch.metrics import TrendFit

    identity = TrendFit("linear", 1.0, 0.0, 1.0, 1.0)
    above = rec(0.3, 0.5, 0.5, 0.5, 0.5)
    assert effective_robustness(above, identity) > 0


def test_effective_robustness_flat_baseline():
    from capmatch.metrics import TrendFit

    flat = TrendFit("linear", 0.0, 0.2, 1.0, 1.0)
    record = rec(0.9, 0.3, 0.3, 0.3, 0.3)
    assert effective_robustness(record, flat) == pytest.approx(0.1)


# --- caption stats ---------------------------------------------------------------


def test_caption_stats_two_captions():
    samples = [
        Sample(id="a", title="0123456789"),
        Sample(id="b", title="01234567890123456789"),
    ]
    stats = caption_stats(samples, "title")
    assert stats.count == 2
    assert stats.mean_len == 15.0
    assert stats.stddev_len == 5.0
    assert stats.unique_tokens == 2


def test_caption_stats_empty():
    stats = caption_stats([], "ttd")
    assert (stats.count, stats.mean_len, stats.stddev_len, stats.unique_tokens) == (0, 0.0, 0.0, 0)


def test_caption_stats_random_recount():
    rng = random.Random(13)
    words = ["ga", "bu", "zo", "meu", "lion"]
    samples = [
        Sample(id=f"s{i}", title=" ".join(rng.choices(words, k=rng.randint(0, 6))))
        for i in range(100)
    ]
    stats = caption_stats(samples, "title")
    lengths = [len(s.title) for s in samples]
    mean = sum(lengths) / len(lengths)
    var = sum((x - mean) ** 2 for x in lengths) / len(lengths)
    vocab = {tok for s in samples for tok in s.title.split()}
    assert stats.mean_len == pytest.approx(mean)
    assert stats.stddev_len == pytest.approx(math.sqrt(var))
    assert stats.unique_tokens == len(vocab)


# --- CSV plumbing -----------------------------------------------------------------


CSV_TEXT = """model_id,base_acc,in_a,in_r,in_s,in_v2,n_base,n_shift
m1,0.801,0.094,0.230,0.297,0.710,5000,5000
m2,0.5,0.1,,0.3,,,
"""


def test_read_robustness_csv():
    records = read_robustness_csv(io.StringIO(CSV_TEXT))
    assert records[0].model_id == "m1"
    assert records[0].n_base == 5000
    assert records[1].shift_accs == {"in_a": 0.1, "in_s": 0.3}
    assert records[1].n_base is None


def test_read_robustness_csv_rejects_headerless():
    with pytest.raises(MetricError):
        read_robustness_csv(io.StringIO("a,b\n1,2\n"))


def test_robustness_csv_round_trip():
    from capmatch.metrics import write_robustness_csv

    records = read_robustness_csv(io.StringIO(CSV_TEXT))
    sink = io.StringIO()
    write_robustness_csv(records, sink)
    again = read_robustness_csv(io.StringIO(sink.getvalue()))
    assert again == records


def test_verify_results_table_deviations():
    row = TableRow(rec(0.801, 0.094, 0.230, 0.297, 0.710), ref_avg_rob=0.333, ref_err=0.416)
    (entry,) = verify_results_table([row])
    assert entry["avg_rob"] == pytest.approx(0.33275)
    assert entry["avg_rob_dev"] <= 0.0015
    # the reference ratio column is derived from the rounded average column
    assert entry["err_dev"] == pytest.approx(abs(0.333 / 0.801 - 0.416), abs=1e-12)
