"""
Reference GCI/GOI events from electroglottograph recordings.
"""
import logging
from typing import List

import numpy as np
from scipy.ndimage import median_filter
from scipy.signal import find_peaks

from .meanshape import MIN_F0
from .models import GlottalEvent, ReferenceEvents, ReferenceExtractionError, Residual, Waveform

logger = logging.getLogger(__name__)

PROMINENCE_FACTOR = 3.0
NEIGHBORHOOD = 0.05  # seconds
PEAK_FLOOR = 0.02  # fraction of max |dEGG|
MIN_PEAK_DISTANCE = 0.002  # seconds
MAX_PERIOD = 1.25 / MIN_F0  # seconds; longer GCI gaps are voicing breaks
MAX_ALIGN_SHIFT = 0.002  # seconds
POLARITY_PEAKS = 20


def degg(egg: Waveform) -> np.ndarray:
    """First difference, d[n] = egg[n] - egg[n-1], d[0] = 0."""
    return np.diff(egg.samples, prepend=egg.samples[:1])


def _threshold(d: np.ndarray, sample_rate: int) -> np.ndarray:
    size = max(3, int(round(NEIGHBORHOOD * sample_rate)) | 1)
    local = PROMINENCE_FACTOR * median_filter(np.abs(d), size=size, mode="nearest")
    return np.maximum(local, PEAK_FLOOR * float(np.max(np.abs(d))))


def _strongest_sign(d: np.ndarray) -> float:
    """+1 when closure (positive) peaks dominate, -1 otherwise."""
    k = min(POLARITY_PEAKS, d.size)
    top_pos = np.sort(d)[-k:]
    top_neg = np.sort(-d)[-k:]
    return 1.0 if top_pos.sum() >= top_neg.sum() else -1.0


def degg_events(egg: Waveform, auto_polarity: bool = True) -> ReferenceEvents:
    """
    Reference events from dEGG peaks.

    Positive peaks above 3x the local median |dEGG| (50 ms neighbourhood)
    are GCIs; the strongest negative peak between consecutive GCIs is that
    cycle's GOI.
    """
    rate = egg.sample_rate
    d = degg(egg)
    if not np.any(d):
        logger.warning("flat EGG: no glottal cycles")
        return ReferenceEvents(source="egg", diagnostics=["flat EGG: no cycles"])

    if auto_polarity and _strongest_sign(d) < 0:
        logger.info("EGG polarity inverted; flipping")
        d = -d

    thr = _threshold(d, rate)
    distance = max(1, int(round(MIN_PEAK_DISTANCE * rate)))
    gci_idx, _ = find_peaks(d, height=thr, distance=distance)
    goi_idx, _ = find_peaks(-d, height=thr, distance=distance)

    max_gap = int(round(MAX_PERIOD * rate))
    gois: List[int] = []
    for k, g in enumerate(gci_idx):
        lo = g - max_gap if k == 0 else max(int(gci_idx[k - 1]), g - max_gap)
        inside = goi_idx[(goi_idx > lo) & (goi_idx < g)]
        if inside.size:
            gois.append(int(inside[np.argmax(-d[inside])]))

    ref = ReferenceEvents(
        gcis=[GlottalEvent.at("GCI", i, rate, d[i]) for i in gci_idx],
        gois=[GlottalEvent.at("GOI", i, rate, -d[i]) for i in gois],
        source="egg",
    )
    if not ref.gcis:
        ref.diagnostics.append("no dEGG peaks above threshold")
    logger.debug("EGG reference: %d GCIs, %d GOIs", len(ref.gcis), len(ref.gois))
    return ref


def require_reference(ref: ReferenceEvents) -> ReferenceEvents:
    if not ref.gcis:
        raise ReferenceExtractionError(
            "reference has no events: " + ("; ".join(ref.diagnostics) or "empty"), fields=["egg"],
        )
    return ref


def _shift_events(events: List[GlottalEvent], k: int, rate: int, n: int) -> List[GlottalEvent]:
    return [
        GlottalEvent.at(e.kind, e.index + k, rate, e.salience)
        for e in events if 0 <= e.index + k < n
    ]


def align_reference(ref: ReferenceEvents, speech: Waveform, residual: Residual,
                    max_shift: float = MAX_ALIGN_SHIFT) -> ReferenceEvents:
    """
    Apply the constant shift within +/- max_shift that best lines the reference
    GCIs up with |residual|. A flat objective leaves the reference unshifted.
    """
    require_reference(ref)
    rate = speech.sample_rate
    r = np.abs(residual.signal.samples)
    n = r.size
    idx = np.array([e.index for e in ref.gcis])
    span = int(round(max_shift * rate))

    diagnostics = list(ref.diagnostics)
    shifts = np.arange(-span, span + 1)
    scores = np.empty(shifts.size)
    for j, k in enumerate(shifts):
        pos = idx + k
        pos = pos[(pos >= 0) & (pos < n)]
        scores[j] = r[pos].sum()

    if scores.max() - scores.min() <= 1e-12 * max(scores.max(), 1e-300):
        logger.warning("alignment objective is flat; keeping zero shift")
        best = 0
        diagnostics.append("alignment ambiguous: zero shift")
    else:
        # smallest |shift| among maxima
        top = shifts[scores == scores.max()]
        best = int(top[np.argmin(np.abs(top))])

    return ReferenceEvents(
        gcis=_shift_events(ref.gcis, best, rate, n),
        gois=_shift_events(ref.gois, best, rate, n),
        alignment_shift=ref.alignment_shift + best / rate,
        source=ref.source,
        diagnostics=diagnostics,
    )
