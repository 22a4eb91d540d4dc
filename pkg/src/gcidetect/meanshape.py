"""
Mean-based signal and the GCI/GOI search intervals derived from its extrema.
"""
import logging
from typing import List, Optional, Tuple

import numpy as np
from scipy.signal import find_peaks

from .models import EventInterval, EventKind, MeanSignalConfig, NoVoicingError, SignalError, Waveform, WindowFn
from .signal_core import window_coefficients

logger = logging.getLogger(__name__)

GOI_MARGIN = 0.00025  # seconds, both sides
MIN_F0 = 50.0
MAX_F0 = 400.0
PITCH_FRAME = 0.05
PITCH_HOP = 0.01
VOICING_CORRELATION = 0.3
VOICING_ENERGY_DB = -30.0


def mean_based_signal(x: Waveform, cfg: MeanSignalConfig, t0_mean: Optional[float] = None) -> Waveform:
    """
    y(n) = 1/(2N+1) * sum_{m=-N..N} w(m) s(n+m), Blackman w, zero padding at both ends.

    The first and last N samples only see part of the window.
    """
    n_half = cfg.half_width(x.sample_rate, t0_mean)
    length = 2 * n_half + 1
    if len(x) <= length:
        raise SignalError(f"signal of {len(x)} samples is shorter than the {length}-sample window", fields=["x"])
    w = window_coefficients(WindowFn(kind="blackman", length=length))
    y = np.convolve(x.samples, w[::-1], mode="same") / length
    return x.with_samples(y)


def estimate_mean_pitch(x: Waveform, min_f0: float = MIN_F0, max_f0: float = MAX_F0) -> float:
    """
    Utterance mean pitch period in seconds.

    Median over voiced frames of the autocorrelation-peak lag within the
    [min_f0, max_f0] band.
    """
    rate = x.sample_rate
    frame = int(round(PITCH_FRAME * rate))
    hop = int(round(PITCH_HOP * rate))
    min_lag = int(np.floor(rate / max_f0))
    max_lag = int(np.ceil(rate / min_f0))
    if len(x) < frame:
        raise SignalError(f"need at least {PITCH_FRAME * 1000:.0f} ms of audio to estimate pitch", fields=["x"])
    if x.duration < 0.5:
        logger.warning("pitch estimate from only %.2f s of audio", x.duration)

    starts = range(0, len(x) - frame + 1, hop)
    energies = np.array([np.sum(np.square(x.samples[s:s + frame])) for s in starts])
    if energies.max() <= 0.0:
        raise NoVoicingError("silent input: no voiced frames for pitch estimation", fields=["t0_mean"])
    energy_floor = energies.max() * 10.0 ** (VOICING_ENERGY_DB / 10.0)

    periods = []
    for s, energy in zip(starts, energies):
        if energy < energy_floor:
            continue
        seg = x.samples[s:s + frame]
        seg = seg - seg.mean()
        r = np.correlate(seg, seg, mode="full")[frame - 1:]
        if r[0] <= 0.0:
            continue
        band = r[min_lag:min(max_lag, frame - 2) + 1]
        k = int(np.argmax(band))
        lag = min_lag + k
        if r[lag] / r[0] < VOICING_CORRELATION:
            continue
        # parabolic refinement
        if 0 < k < band.size - 1:
            a, b, c = band[k - 1], band[k], band[k + 1]
            denom = a - 2 * b + c
            if denom < 0:
                lag = lag + 0.5 * (a - c) / denom
        periods.append(lag / rate)

    if not periods:
        raise NoVoicingError("no voiced frames found; supply t0_mean explicitly", fields=["t0_mean"])
    return float(np.median(periods))


def find_extrema(y: np.ndarray, ripple_threshold: float = 1e-6,
                 min_spacing: int = 0) -> List[Tuple[int, str]]:
    """
    Alternating local extrema of y as (index, "min" | "max").

    Plateaus report their center sample. Extrema with a prominence below
    ripple_threshold * max|y| are discarded. Same-kind extrema closer than
    min_spacing samples collapse to the more extreme one.
    """
    peak = float(np.max(np.abs(y))) if y.size else 0.0
    if peak == 0.0 or y.size < 3:
        return []

    options = {}
    if ripple_threshold > 0:
        options["prominence"] = ripple_threshold * peak
    if min_spacing > 1:
        options["distance"] = min_spacing
    maxima, _ = find_peaks(y, **options)
    minima, _ = find_peaks(-y, **options)

    candidates = sorted([(int(i), "max") for i in maxima] + [(int(i), "min") for i in minima])
    kept: List[Tuple[int, str]] = []
    for idx, kind in candidates:
        if kept and kept[-1][1] == kind:
            prev = kept[-1][0]
            if (kind == "max" and y[idx] > y[prev]) or (kind == "min" and y[idx] < y[prev]):
                kept[-1] = (idx, kind)
            continue
        kept.append((idx, kind))
    return kept


def extract_intervals(y: Waveform, kind: EventKind, margin: Optional[float] = None,
                      ripple_threshold: float = 1e-6, min_spacing: int = 0) -> List[EventInterval]:
    """
    Search intervals for one event kind.

    GCI: [minimum, midpoint to the next maximum). GOI: [maximum, midpoint to
    the next minimum). Both sides widen by `margin` seconds (default 0 for
    GCI, 0.25 ms for GOI), then clip to the signal. `min_spacing` is passed
    to find_extrema.
    """
    if margin is None:
        margin = GOI_MARGIN if kind == "GOI" else 0.0
    if margin < 0:
        raise SignalError("margin must be non-negative", fields=["margin"])
    pad = int(round(margin * y.sample_rate))

    extrema = find_extrema(y.samples, ripple_threshold, min_spacing)
    if len(extrema) < 2:
        logger.warning("fewer than two extrema in mean-based signal; input is likely unvoiced")
        return []

    anchor = "min" if kind == "GCI" else "max"
    n = len(y)
    intervals: List[EventInterval] = []
    for (i, k), (j, _) in zip(extrema[:-1], extrema[1:]):
        if k != anchor:
            continue
        start = max(0, i - pad)
        end = min(n, (i + j) // 2 + pad)
        if intervals:
            start = max(start, intervals[-1].end)
        if end > start:
            intervals.append(EventInterval(kind=kind, start=start, end=end))
    return intervals
