"""Peak picking, polarity resolution and end-to-end detection on synthetic speech."""
import numpy as np
import pytest

from gcidetect.detect import detect_events, pick_peak, resolve_polarity, run_detector, speech_sign
from gcidetect.evaluator import score
from gcidetect.lp import lp_residual
from gcidetect.meanshape import mean_based_signal
from gcidetect.models import DetectorConfig, EventInterval, LpConfig, Residual, SynthSpec, Waveform
from gcidetect.synth import synthesize


def _residual(samples):
    return Residual(signal=Waveform(samples=samples, sample_rate=16000))


def test_pick_peak_matches_linear_scan(rng):
    for _ in range(200):
        x = rng.standard_normal(300)
        start = int(rng.integers(0, 250))
        end = int(rng.integers(start + 1, 301))
        iv = EventInterval(kind="GCI", start=start, end=end)
        for polarity, score_of in (("positive", lambda v: v), ("negative", lambda v: -v), ("absolute", abs)):
            best = start
            for n in range(start, end):
                if score_of(x[n]) > score_of(x[best]):
                    best = n
            assert pick_peak(_residual(x), iv, polarity).index == best


def test_pick_peak_earliest_on_ties():
    x = np.zeros(20)
    x[[5, 9]] = 1.0
    ev = pick_peak(_residual(x), EventInterval(kind="GOI", start=2, end=15), "positive")
    assert (ev.index, ev.kind, ev.salience) == (5, "GOI", 1.0)


def test_resolve_polarity():
    x = np.zeros(2000)
    intervals = [EventInterval(kind="GCI", start=100 * k, end=100 * k + 40) for k in range(12)]
    for iv in intervals:
        x[iv.start + 10] = 1.0
        x[iv.start + 20] = -0.3
    assert resolve_polarity(_residual(x), intervals) == "positive"
    assert resolve_polarity(_residual(-x), intervals) == "negative"
    assert resolve_polarity(_residual(x), intervals[:5]) == "absolute"


def test_clean_vowel_end_to_end(vowel_100hz, reliable_span):
    speech, _, truth = vowel_100hz
    det = run_detector(speech, DetectorConfig())
    span = reliable_span(det)
    report = score(det.gcis, truth, "GCI", span=span)
    assert report.idr >= 0.99
    assert report.acc025 >= 0.95
    assert score(det.gois, truth, "GOI", span=span).idr >= 0.9


def test_jittered_corpus_end_to_end(small_corpus, reliable_span):
    for speech, _, truth in small_corpus:
        det = run_detector(speech, DetectorConfig())
        assert score(det.gcis, truth, "GCI", span=reliable_span(det)).idr >= 0.95


@pytest.mark.parametrize("jitter,shimmer", [(0.0, 0.02), (0.01, 0.02), (0.01, 0.0)])
def test_upright_irregular_voice_keeps_orientation(jitter, shimmer):
    speech, _, truth = synthesize(SynthSpec(f0_contour=[(0.0, 107.0)], jitter=jitter, shimmer=shimmer, seed=2))
    cfg = DetectorConfig()
    det = run_detector(speech, cfg)
    assert not det.speech_inverted
    np.testing.assert_array_equal(det.mean_signal.samples, mean_based_signal(speech, cfg.mean, det.t0_mean).samples)

    lo, hi = det.reliable_span
    truth_idx = np.array([e.index for e in truth.gcis])
    inside = [iv for iv in det.gci_intervals if iv.start >= lo and iv.end <= hi]
    assert len(inside) > 80
    holding = sum(1 for iv in inside if np.any((truth_idx >= iv.start) & (truth_idx < iv.end)))
    assert holding / len(inside) >= 0.99


def test_speech_sign():
    x = np.zeros(4000)
    x[::100] = 1.0
    x[50::100] = -0.2
    assert speech_sign(_residual(x)) == 1.0
    assert speech_sign(_residual(-x)) == -1.0
    assert speech_sign(_residual(np.zeros(100))) == 1.0


def test_reliable_span_excludes_window_edges(vowel_100hz):
    speech, _, _ = vowel_100hz
    det = run_detector(speech, DetectorConfig())
    assert det.reliable_span == (det.half_width, len(speech) - det.half_width)


def test_detect_events_returns_both_streams(vowel_100hz):
    speech, _, _ = vowel_100hz
    gcis, gois = detect_events(speech)
    det = run_detector(speech, DetectorConfig())
    assert gcis == det.gcis and gois == det.gois
    assert {e.kind for e in gcis} == {"GCI"} and {e.kind for e in gois} == {"GOI"}


@pytest.mark.parametrize("scale", [0.25, 8.0])
def test_amplitude_scaling_invariance(vowel_100hz, scale):
    speech, _, _ = vowel_100hz
    base = run_detector(speech, DetectorConfig())
    scaled = run_detector(speech.with_samples(speech.samples * scale), DetectorConfig())
    assert [e.index for e in scaled.gcis] == [e.index for e in base.gcis]
    assert [e.index for e in scaled.gois] == [e.index for e in base.gois]


def test_polarity_inversion_invariance(small_corpus):
    for speech, _, _ in small_corpus[:3]:
        up = run_detector(speech, DetectorConfig())
        down = run_detector(speech.with_samples(-speech.samples), DetectorConfig())
        assert [e.index for e in down.gcis] == [e.index for e in up.gcis]
        assert {up.polarity, down.polarity} <= {"positive", "negative"}
        assert up.polarity != down.polarity
        assert (up.speech_inverted, down.speech_inverted) == (False, True)
        np.testing.assert_array_equal(down.mean_signal.samples, up.mean_signal.samples)


def test_auto_polarity_matches_known_sign(small_corpus):
    runs = []
    for speech, _, _ in small_corpus:
        runs.append(run_detector(speech, DetectorConfig()).polarity == "positive")
        runs.append(run_detector(speech.with_samples(-speech.samples), DetectorConfig()).polarity == "negative")
    assert sum(runs) >= 0.95 * len(runs)


def test_fixed_negative_polarity_reads_inverted_speech(vowel_100hz):
    speech, _, _ = vowel_100hz
    up = run_detector(speech, DetectorConfig(polarity="positive"))
    down = run_detector(speech.with_samples(-speech.samples), DetectorConfig(polarity="negative"))
    assert down.speech_inverted and not up.speech_inverted
    assert [e.index for e in down.gcis] == [e.index for e in up.gcis]
    assert [e.index for e in down.gois] == [e.index for e in up.gois]


def test_events_sorted_and_interleaved(vowel_100hz):
    speech, _, _ = vowel_100hz
    det = run_detector(speech, DetectorConfig())
    g = [e.index for e in det.gcis]
    assert g == sorted(g) and len(set(g)) == len(g)
    o = [e.index for e in det.gois]
    assert o == sorted(o)
    # at most one GOI between consecutive GCIs
    for a, b in zip(g[:-1], g[1:]):
        assert sum(1 for i in o if a < i < b) <= 1


def test_explicit_t0_skips_estimation(vowel_100hz):
    speech, _, _ = vowel_100hz
    det = run_detector(speech, DetectorConfig(), t0_mean=0.0098)
    assert det.t0_mean == 0.0098
    assert det.half_width == round(1.75 * 0.0098 * 16000 / 2)


def test_precomputed_residual_reused(vowel_100hz):
    speech, _, _ = vowel_100hz
    res = lp_residual(speech, LpConfig())
    det = run_detector(speech, DetectorConfig(), residual=res)
    assert det.residual is res
    assert len(det.mean_signal) == len(speech)


def test_silence_gives_no_events():
    det = run_detector(Waveform(samples=np.zeros(16000), sample_rate=16000), DetectorConfig())
    assert det.gcis == [] and det.gois == []
    assert any("unvoiced" in d for d in det.diagnostics)
