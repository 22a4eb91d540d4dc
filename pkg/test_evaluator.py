"""Cycle-based scoring, histograms and sweeps."""
import numpy as np
import pytest

from gcidetect.evaluator import (
    MAX_PERIOD,
    SNR_REFERENCE,
    _noise_task,
    fraction_within,
    histogram,
    larynx_cycles,
    pool_reports,
    score,
    sweep_noise,
    sweep_window,
)
from gcidetect.models import CorpusItem, DetectorConfig, EvaluationError, GlottalEvent, ReferenceEvents

RATE = 16000


def _events(indices, kind="GCI"):
    return [GlottalEvent.at(kind, int(i), RATE) for i in indices]


def _ref(indices):
    return ReferenceEvents(gcis=_events(indices), source="synthetic")


REF = _ref(np.arange(200, 16000, 160))  # 100 Hz


def test_perfect_detection():
    report = score(REF.gcis, REF, "GCI")
    assert (report.idr, report.mr, report.far) == (1.0, 0.0, 0.0)
    assert report.ida == 0.0 and report.acc025 == 1.0
    assert report.n_cycles == len(REF.gcis)


def test_miss_double_and_partition():
    idx = [e.index for e in REF.gcis]
    detected = _events(idx[1:] + [idx[5] + 20])
    report = score(detected, REF, "GCI")
    n = len(idx)
    assert report.mr == pytest.approx(1 / n)
    assert report.far == pytest.approx(1 / n)
    assert report.idr + report.mr + report.far == pytest.approx(1.0, abs=1e-12)
    assert len(report.errors) == report.n_identified == n - 2


def test_random_detections_partition(rng):
    for _ in range(20):
        detected = _events(np.sort(rng.integers(0, 16000, size=int(rng.integers(0, 150)))))
        r = score(detected, REF, "GCI")
        assert r.n_identified + r.n_missed + r.n_false_alarm == r.n_cycles
        assert abs(r.idr + r.mr + r.far - 1.0) <= 1e-9


def test_stray_detection_attribution():
    idx = [e.index for e in REF.gcis]
    near = idx[-1] + 80 + 40  # 2.5 ms past the last cycle
    far = idx[-1] + 80 + 2000
    report = score(REF.gcis + _events([near, far]), REF, "GCI")
    assert report.n_false_alarm == 1
    assert report.out_of_voicing == 1


def test_constant_offset_accuracy():
    shifted = _events([e.index + 4 for e in REF.gcis])  # +0.25 ms
    report = score(shifted, REF, "GCI")
    assert report.idr == 1.0
    assert report.ida == pytest.approx(0.0, abs=1e-15)
    assert report.acc025 == 1.0
    late = score(_events([e.index + 16 for e in REF.gcis]), REF, "GCI")  # +1 ms
    assert late.acc025 == 0.0


def test_empty_reference_rejected():
    with pytest.raises(EvaluationError):
        score([], ReferenceEvents(), "GCI")


def test_span_restricts_both_streams():
    lo, hi = 0.1, 0.5
    report = score(REF.gcis + _events([100]), REF, "GCI", span=(lo, hi))
    assert report.n_cycles == sum(1 for e in REF.gcis if lo <= e.time < hi)
    assert (report.idr, report.far, report.out_of_voicing) == (1.0, 0.0, 0)
    assert report.metadata["span_s"] == [lo, hi]
    # a detection just before the span would be a stray false alarm without it
    early = _events([1560])
    assert score(REF.gcis[9:49] + early, REF, "GCI", span=(lo, hi)).far == 0.0
    assert score(REF.gcis[9:49] + early, _ref([e.index for e in REF.gcis[9:49]]), "GCI").far > 0.0
    with pytest.raises(EvaluationError):
        score(REF.gcis, REF, "GCI", span=(2.0, 3.0))


def test_larynx_cycles_break_on_long_gaps():
    t = np.array([0.10, 0.11, 0.12, 0.50, 0.51])
    cycles = larynx_cycles(t)
    np.testing.assert_allclose(cycles[0], [0.095, 0.105])
    np.testing.assert_allclose(cycles[2], [0.115, 0.125])
    np.testing.assert_allclose(cycles[3], [0.495, 0.505])
    np.testing.assert_allclose(larynx_cycles(np.array([0.3])), [[0.295, 0.305]])


def test_larynx_cycles_span_lowest_pitch():
    assert MAX_PERIOD >= 1.0 / 50.0
    t = 0.1 + 0.022 * np.arange(5)  # 22 ms periods of a jittered 50 Hz voice stay one region
    cycles = larynx_cycles(t)
    np.testing.assert_allclose(cycles[0], [0.089, 0.111])
    np.testing.assert_allclose(cycles[2], [t[2] - 0.011, t[2] + 0.011])
    np.testing.assert_allclose(larynx_cycles(np.array([0.1, 0.13]))[0], [0.095, 0.105])


def test_histogram_bins_and_normalization():
    errors = [0.0001, -0.0003, 0.0003, 0.0003, 0.0]
    bins = histogram(errors, 0.00025)
    assert [round(c / 0.00025) for c, _ in bins] == [-1, 0, 1]
    assert sum(p for _, p in bins) == pytest.approx(1.0)
    assert dict((round(c / 0.00025), p) for c, p in bins)[1] == pytest.approx(0.4)

    dense = histogram([0.0, 0.001], 0.00025, dense=True)
    assert len(dense) == 5
    assert sum(p for _, p in dense) == pytest.approx(1.0)
    assert histogram([], 0.00025) == []
    with pytest.raises(EvaluationError):
        histogram(errors, 0.0)


def test_fraction_within():
    errors = [0.0005, -0.0009, 0.0011, 0.001]
    assert fraction_within(errors, 0.001) == 0.5
    assert fraction_within(errors, 0.001, inclusive=True) == 0.75
    assert fraction_within([], 0.001) == 0.0


def test_pool_reports_sums_counts():
    a = score(REF.gcis, REF, "GCI")
    b = score(REF.gcis[1:], REF, "GCI")
    pooled = pool_reports([a, b], "GCI")
    assert pooled.n_cycles == a.n_cycles + b.n_cycles
    assert pooled.n_missed == 1
    assert len(pooled.errors) == a.n_identified + b.n_identified
    with pytest.raises(EvaluationError):
        pool_reports([], "GOI")


@pytest.fixture(scope="module")
def corpus_items(small_corpus):
    return [
        CorpusItem(name=f"u{i}", speech=speech, reference=truth,
                   t0_mean=float(np.median(np.diff([e.time for e in truth.gcis]))))
        for i, (speech, _, truth) in enumerate(small_corpus[:3])
    ]


def test_window_sweep_rows(corpus_items):
    rows = sweep_window(corpus_items, [1.0, 1.75])
    assert [r.value for r in rows] == [1.0, 1.75]
    for r in rows:
        assert r.parameter == "window_factor"
        assert r.misidentification == pytest.approx(1.0 - r.idr)
        assert r.idr + r.mr + r.far == pytest.approx(1.0)
        assert r.n_failed == 0
    with pytest.raises(EvaluationError):
        sweep_window(corpus_items, [0.0])


def test_noise_sweep_deterministic(corpus_items):
    first = sweep_noise(corpus_items, "white", [60.0], seed=7, clean_baseline=True)
    again = sweep_noise(corpus_items, "white", [60.0], seed=7, clean_baseline=True)
    assert [r.value for r in first] == [float("inf"), 60.0]
    assert [r.model_dump() for r in first] == [r.model_dump() for r in again]
    assert all(r.noise_kind == "white" for r in first)
    with pytest.raises(EvaluationError):
        sweep_noise(corpus_items, "white", [float("nan")])


def test_babble_sweep_from_corpus(corpus_items):
    rows = sweep_noise(corpus_items, "babble", [40.0], seed=1)
    assert len(rows) == 1
    assert rows[0].noise_kind == "babble"
    assert rows[0].n_cycles == sum(len(i.reference.gcis) for i in corpus_items)


def test_noise_sweep_records_conditions(corpus_items):
    rows = sweep_noise(corpus_items, "white", [30.0], seed=5)
    assert rows[0].metadata == {"utterances": 3, "noise_kind": "white", "seed": 5, "snr_reference": SNR_REFERENCE}
    babble = sweep_noise(corpus_items, "babble", [30.0], seed=5)
    assert babble[0].metadata["noise_source"] == "corpus babble"

    reports = _noise_task((corpus_items[0], 0, "white", [30.0], DetectorConfig(), 5, None, []))
    meta = reports[0].metadata
    assert (meta["snr_db"], meta["noise_kind"], meta["seed"], meta["utterance"]) == (30.0, "white", 5, "u0")
    assert meta["snr_reference"] == SNR_REFERENCE
