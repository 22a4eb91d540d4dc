"""
GCI/GOI detection: mean-based-signal intervals refined by LP residual peaks.
"""
import logging
from typing import List, Optional, Tuple

import numpy as np
from scipy.stats import skew

from .lp import lp_residual
from .meanshape import estimate_mean_pitch, extract_intervals, mean_based_signal
from .models import (
    DetectorConfig,
    Detection,
    EventInterval,
    GlottalEvent,
    NoVoicingError,
    Polarity,
    Residual,
    Waveform,
)

logger = logging.getLogger(__name__)

MIN_POLARITY_INTERVALS = 10


def pick_peak(r: Residual, interval: EventInterval, polarity: Polarity) -> GlottalEvent:
    """Strongest residual sample in the interval under a resolved polarity; earliest index wins ties."""
    seg = r.signal.samples[interval.start:interval.end]
    if polarity == "positive":
        score = seg
    elif polarity == "negative":
        score = -seg
    else:
        score = np.abs(seg)
    k = int(np.argmax(score))
    return GlottalEvent.at(interval.kind, interval.start + k, r.signal.sample_rate, abs(seg[k]))


def resolve_polarity(r: Residual, intervals: List[EventInterval],
                     min_intervals: int = MIN_POLARITY_INTERVALS) -> Polarity:
    """
    Dominant sign of the residual peaks over GCI intervals.

    Falls back to "absolute" when fewer than `min_intervals` are available.
    """
    if len(intervals) < min_intervals:
        logger.warning(
            "only %d GCI intervals (need %d) to resolve polarity; using absolute residual",
            len(intervals), min_intervals,
        )
        return "absolute"
    x = r.signal.samples
    pos = sum(abs(float(x[iv.start:iv.end].max())) for iv in intervals)
    neg = sum(abs(float(x[iv.start:iv.end].min())) for iv in intervals)
    return "positive" if pos >= neg else "negative"


def speech_sign(r: Residual) -> float:
    """
    +1.0 for upright speech, -1.0 for inverted speech.

    Upright voiced speech leaves sharp positive residual peaks at GCIs, so the
    residual samples are positively skewed. A flat residual counts as upright.
    """
    x = r.signal.samples
    if x.size < 3 or float(np.std(x)) == 0.0:
        return 1.0
    return -1.0 if float(skew(x)) < 0.0 else 1.0


def run_detector(x: Waveform, cfg: DetectorConfig, residual: Optional[Residual] = None,
                 t0_mean: Optional[float] = None) -> Detection:
    """
    Full detection pass, intermediates included.

    Args:
        x: speech
        cfg: detector configuration
        residual: precomputed LP residual of x (reused across window sweeps)
        t0_mean: mean pitch period in seconds; overrides cfg and skips estimation

    Returns:
        Detection with both event streams sorted by time
    """
    diagnostics: List[str] = []
    if residual is None:
        residual = lp_residual(x, cfg.lp)

    t0 = t0_mean if t0_mean is not None else cfg.mean.t0_mean
    if t0 is None:
        try:
            t0 = estimate_mean_pitch(x)
        except NoVoicingError as e:
            logger.warning("no voicing detected: %s", e)
            return Detection(
                polarity=cfg.polarity, t0_mean=0.0, half_width=0,
                mean_signal=x.with_samples(np.zeros(len(x))), residual=residual,
                diagnostics=["unvoiced: no pitch found"],
            )

    half_width = cfg.mean.half_width(x.sample_rate, t0)
    y = mean_based_signal(x, cfg.mean, t0)

    # GCIs sit in the minima of y for upright speech
    if cfg.polarity == "auto":
        inverted = speech_sign(residual) < 0.0
    else:
        inverted = cfg.polarity == "negative"
    if inverted:
        logger.debug("speech is inverted; negating the mean-based signal")
        y = y.with_samples(-y.samples)

    spacing = cfg.mean.spacing_samples(x.sample_rate, t0)
    gci_intervals = extract_intervals(y, "GCI", cfg.gci_margin, cfg.mean.ripple_threshold, spacing)
    goi_intervals = extract_intervals(y, "GOI", cfg.goi_margin, cfg.mean.ripple_threshold, spacing)

    if cfg.polarity == "auto":
        polarity = resolve_polarity(residual, gci_intervals)
        if polarity == "absolute":
            diagnostics.append("polarity fallback: too few GCI intervals")
    else:
        polarity = cfg.polarity

    if not gci_intervals:
        diagnostics.append("unvoiced: no intervals in mean-based signal")

    gcis = [pick_peak(residual, iv, polarity) for iv in gci_intervals]
    gois = [pick_peak(residual, iv, polarity) for iv in goi_intervals]

    logger.debug("detected %d GCIs, %d GOIs (polarity=%s, N=%d)", len(gcis), len(gois), polarity, half_width)
    return Detection(
        gcis=gcis, gois=gois, polarity=polarity, speech_inverted=inverted, t0_mean=t0,
        half_width=half_width, reliable_span=(half_width, max(half_width, len(x) - half_width)),
        mean_signal=y, residual=residual, gci_intervals=gci_intervals,
        goi_intervals=goi_intervals, diagnostics=diagnostics,
    )


def detect_events(x: Waveform, cfg: DetectorConfig = DetectorConfig()) -> Tuple[List[GlottalEvent], List[GlottalEvent]]:
    det = run_detector(x, cfg)
    return det.gcis, det.gois
