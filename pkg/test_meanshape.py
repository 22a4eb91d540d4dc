"""Mean-based signal, extrema and search intervals."""
import numpy as np
import pytest
from scipy.signal import windows

from gcidetect.detect import run_detector
from gcidetect.meanshape import estimate_mean_pitch, extract_intervals, find_extrema, mean_based_signal
from gcidetect.models import ConfigError, DetectorConfig, MeanSignalConfig, NoVoicingError, SignalError, Waveform


def _brute_force(s, n_half):
    w = windows.blackman(2 * n_half + 1)
    y = np.zeros(s.size)
    for n in range(s.size):
        for m in range(-n_half, n_half + 1):
            if 0 <= n + m < s.size:
                y[n] += w[m + n_half] * s[n + m]
    return y / (2 * n_half + 1)


def test_matches_double_sum(rng):
    rate = 16000
    for _ in range(100):
        n_half = int(rng.integers(1, 30))
        s = rng.standard_normal(int(rng.integers(2 * n_half + 2, 200)))
        cfg = MeanSignalConfig(window_factor=1.0, t0_mean=2 * n_half / rate)
        assert cfg.half_width(rate) == n_half
        y = mean_based_signal(Waveform(samples=s, sample_rate=rate), cfg)
        np.testing.assert_allclose(y.samples, _brute_force(s, n_half), rtol=0, atol=1e-12)


def test_half_width_from_factor():
    cfg = MeanSignalConfig()
    assert cfg.half_width(16000, 0.01) == 140  # round(1.75 * 160 / 2)
    with pytest.raises(ConfigError):
        MeanSignalConfig().half_width(16000)
    with pytest.raises(ConfigError):
        MeanSignalConfig(window_factor=0.01).half_width(16000, 0.005)


def test_signal_shorter_than_window():
    x = Waveform(samples=np.ones(100), sample_rate=16000)
    with pytest.raises(SignalError):
        mean_based_signal(x, MeanSignalConfig(t0_mean=0.01))


def test_extrema_alternate(rng):
    y = np.convolve(rng.standard_normal(3000), np.hanning(41), mode="same")
    kinds = [k for _, k in find_extrema(y)]
    assert len(kinds) > 10
    assert all(a != b for a, b in zip(kinds[:-1], kinds[1:]))


def test_plateau_reports_center():
    y = np.array([0.0, 1.0, 2.0, 2.0, 2.0, 1.0, 0.0, -1.0, 0.0])
    assert find_extrema(y) == [(3, "max"), (7, "min")]


def test_ripple_pairs_dropped():
    y = np.array([0.0, 1.0, 0.0, -1.0, -1.0 + 1e-9, -1.0 - 1e-9, 0.0, 1.0, 0.0])
    assert [k for _, k in find_extrema(y)] == ["max", "min", "max"]


def test_close_same_kind_extrema_collapse():
    # a strong third harmonic splits every extremum of the fundamental in two
    theta = 2 * np.pi * (np.arange(1000) + 25) / 100
    y = np.cos(theta) - 0.2 * np.cos(3 * theta)
    assert len(find_extrema(y)) > 50

    spaced = find_extrema(y, min_spacing=60)
    kinds = [k for _, k in spaced]
    assert len(spaced) == 20
    assert all(a != b for a, b in zip(kinds[:-1], kinds[1:]))
    for i, k in spaced:
        center = 75 if k == "max" else 25
        assert abs((i - center + 50) % 100 - 50) <= 11


def test_intervals_on_sinusoid():
    period = 160
    n = np.arange(10 * period)
    y = Waveform(samples=np.sin(2 * np.pi * n / period), sample_rate=16000)

    gci = extract_intervals(y, "GCI")
    assert [(iv.start, iv.end) for iv in gci] == [(120 + period * k, 160 + period * k) for k in range(9)]

    goi = extract_intervals(y, "GOI")
    assert [(iv.start, iv.end) for iv in goi] == [(36 + period * k, 84 + period * k) for k in range(10)]


def test_intervals_disjoint_and_ordered(vowel_100hz):
    speech, _, _ = vowel_100hz
    y = mean_based_signal(speech, MeanSignalConfig(t0_mean=0.01))
    for kind in ("GCI", "GOI"):
        ivs = extract_intervals(y, kind)
        assert ivs
        assert all(a.end <= b.start for a, b in zip(ivs[:-1], ivs[1:]))
        assert all(0 <= iv.start < iv.end <= len(y) for iv in ivs)


def test_monotone_signal_has_no_intervals():
    y = Waveform(samples=np.linspace(0.0, 1.0, 500), sample_rate=16000)
    assert extract_intervals(y, "GCI") == []


def test_negative_margin_rejected():
    y = Waveform(samples=np.sin(np.arange(500) / 10.0), sample_rate=16000)
    with pytest.raises(SignalError):
        extract_intervals(y, "GOI", margin=-0.001)


def test_pitch_estimate_on_vowel(vowel_100hz):
    speech, _, _ = vowel_100hz
    assert estimate_mean_pitch(speech) == pytest.approx(0.01, rel=0.03)


def test_pitch_estimate_on_silence():
    with pytest.raises(NoVoicingError):
        estimate_mean_pitch(Waveform(samples=np.zeros(16000), sample_rate=16000))


def test_eight_periods_one_event_per_interval(vowel_100hz):
    speech, _, truth = vowel_100hz
    y = mean_based_signal(speech, MeanSignalConfig(t0_mean=0.01))
    for kind, events in (("GCI", truth.gcis), ("GOI", truth.gois)):
        idx = np.array([e.index for e in events])
        segment = [iv for iv in extract_intervals(y, kind) if 2000 <= iv.start < 2000 + 8 * 160]
        assert len(segment) == 8
        for iv in segment:
            assert np.count_nonzero((idx >= iv.start) & (idx < iv.end)) == 1


@pytest.mark.parametrize("factor", [1.5, 1.75, 2.0])
def test_one_gci_interval_per_cycle(small_corpus, factor):
    for speech, _, truth in small_corpus:
        t0 = float(np.median(np.diff([e.time for e in truth.gcis])))
        det = run_detector(speech, DetectorConfig(mean=MeanSignalConfig(window_factor=factor)), t0_mean=t0)
        lo, hi = det.reliable_span
        n_intervals = sum(1 for iv in det.gci_intervals if lo <= iv.start < hi)
        n_cycles = sum(1 for e in truth.gcis if lo <= e.index < hi)
        assert abs(n_intervals - n_cycles) <= 1
