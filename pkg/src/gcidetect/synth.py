"""
Synthetic voiced speech and EGG with exactly known GCI/GOI ground truth.

Source: polynomial glottal flow U(tau) = tau^5 (1 - tau) + e0 tau (1 - tau)^8
over each open phase, so the flow derivative returns abruptly to zero at
closure (GCI) and jumps up, more weakly, at opening (GOI). The derivative
drives a cascade of formant resonators followed by a first-difference lip
radiation stage.
"""
import logging
from typing import List, Tuple

import numpy as np
from scipy.signal import lfilter

from .models import GlottalEvent, ReferenceEvents, SynthSpec, Waveform

logger = logging.getLogger(__name__)

OPENING_STRENGTH = 0.5  # e0
OPENING_RAMP = 2  # samples
EGG_FALL = 16  # samples
REFERENCE_OPEN_SAMPLES = 80.0  # open phase at 100 Hz, OQ 0.5, 16 kHz
PEAK_LEVEL = 0.5


def flow_derivative_shape(tau: np.ndarray, e0: float = OPENING_STRENGTH) -> np.ndarray:
    """dU/dtau over the open phase: e0 at tau = 0, -1 at tau = 1."""
    return 5 * tau ** 4 - 6 * tau ** 5 + e0 * (1 - tau) ** 7 * (1 - 9 * tau)


def glottal_epochs(spec: SynthSpec, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    GCI times at multiples of the (jittered) period starting from t = 0, the
    GOI of each cycle at open_quotient * period before its GCI, and per-cycle
    amplitudes. Times in seconds.
    """
    times, f0s = zip(*spec.f0_contour)
    gcis = [0.0]
    periods = []
    while True:
        base = 1.0 / float(np.interp(gcis[-1], times, f0s))
        p = base * (1.0 + spec.jitter * float(np.clip(rng.standard_normal(), -2, 2)))
        if gcis[-1] + p >= spec.duration - 0.5 / spec.sample_rate:
            break
        periods.append(p)
        gcis.append(gcis[-1] + p)
    # the first cycle opens before t = 0 with the period of the second
    first = periods[0] if periods else 1.0 / float(np.interp(0.0, times, f0s))
    periods = [first] + periods
    gci = np.array(gcis)
    goi = gci - spec.open_quotient * np.array(periods)
    amps = 1.0 + spec.shimmer * np.clip(rng.standard_normal(gci.size), -2, 2)
    return gci, goi, amps


def glottal_source(spec: SynthSpec) -> Tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """
    Flow-derivative excitation on a time axis extended before t = 0 so the
    first cycle is complete.

    Returns:
        (excitation, gci, goi, pre): GCI/GOI sample indices on the extended
        axis, whose first `pre` samples precede t = 0
    """
    fs = spec.sample_rate
    rng = np.random.default_rng(spec.seed)
    gci_t, goi_t, amps = glottal_epochs(spec, rng)

    n = int(round(spec.duration * fs))
    pre = int(np.ceil(-goi_t.min() * fs)) + OPENING_RAMP + 1
    gci = np.round(gci_t * fs).astype(int) + pre
    goi = np.round(goi_t * fs).astype(int) + pre

    flow_d = np.zeros(n + pre)
    for a, c, amp in zip(goi, gci, amps):
        onset = a - 1
        k = np.arange(onset, c)
        # last open sample at tau = 1: full closure jump at every f0
        tau = (k - onset + 1) / (c - onset)
        ramp = np.minimum((k - onset) / OPENING_RAMP, 1.0)
        gain = amp * REFERENCE_OPEN_SAMPLES / (c - onset)
        flow_d[onset:c] = gain * ramp * flow_derivative_shape(tau)
    return flow_d, gci, goi, pre


def synthesize(spec: SynthSpec) -> Tuple[Waveform, Waveform, ReferenceEvents]:
    """
    Speech, EGG and planted truth for one synthetic utterance.

    Returns:
        (speech, egg, truth) at spec.sample_rate; truth GCIs sit at sample
        indices where the flow derivative returns to zero, GOIs where it
        rises steepest.
    """
    fs = spec.sample_rate
    flow_d, gci, goi, pre = glottal_source(spec)
    total = flow_d.size
    n = total - pre

    tract = flow_d
    for fc, bw in spec.formants:
        c2 = -np.exp(-2 * np.pi * bw / fs)
        b1 = 2 * np.exp(-np.pi * bw / fs) * np.cos(2 * np.pi * fc / fs)
        tract = lfilter([1.0 - b1 - c2], [1.0, -b1, -c2], tract)
    speech = lfilter([1.0, -1.0], [1.0], tract)[pre:]
    speech *= PEAK_LEVEL / max(np.max(np.abs(speech)), 1e-300)
    if spec.invert:
        speech = -speech

    egg = synth_egg(total, gci, goi)[pre:]

    gci_idx = gci - pre
    goi_idx = goi - pre
    gci_idx = gci_idx[(gci_idx >= 0) & (gci_idx < n)]
    goi_idx = goi_idx[(goi_idx >= 0) & (goi_idx < n)]
    truth = ReferenceEvents(
        gcis=[GlottalEvent.at("GCI", i, fs, 1.0) for i in gci_idx],
        gois=[GlottalEvent.at("GOI", i, fs, OPENING_STRENGTH) for i in goi_idx],
        source="synthetic",
    )
    logger.debug("synthesized %.2f s: %d GCIs, %d GOIs", spec.duration, len(truth.gcis), len(truth.gois))
    return Waveform(samples=speech, sample_rate=fs), Waveform(samples=egg, sample_rate=fs), truth


def synth_egg(length: int, gci: np.ndarray, goi: np.ndarray, level: float = 0.8) -> np.ndarray:
    """
    Contact signal: a step up at each GCI and a raised-cosine fall centred
    half a sample before each GOI, so dEGG peaks land exactly on both.
    """
    egg = np.zeros(length)
    n = np.arange(length)
    for k, c in enumerate(gci):
        nxt = goi[k + 1] if k + 1 < goi.size else None
        if nxt is None:
            egg[c:] = 1.0
            continue
        center = nxt - 0.5
        phase = np.clip((n[c:nxt + EGG_FALL] - center + EGG_FALL / 2) / EGG_FALL, 0.0, 1.0)
        egg[c:nxt + EGG_FALL] = np.maximum(egg[c:nxt + EGG_FALL], 0.5 + 0.5 * np.cos(np.pi * phase))
    return level * egg


def synth_corpus(count: int, seed: int = 0, f0_range: Tuple[float, float] = (60.0, 300.0),
                 duration: float = 1.0, jitter: float = 0.01, shimmer: float = 0.02,
                 glide: float = 0.15, open_quotient: float = 0.5) -> List[SynthSpec]:
    """
    Specs for a varied corpus: each utterance glides linearly between
    f0 * (1 + glide) and f0 * (1 - glide) around a centre f0 drawn from f0_range.
    """
    rng = np.random.default_rng(seed)
    specs = []
    for i in range(count):
        f0 = float(rng.uniform(*f0_range))
        start = float(np.clip(f0 * (1 + glide), 50.0, 400.0))
        end = float(np.clip(f0 * (1 - glide), 50.0, 400.0))
        if rng.random() < 0.5:
            start, end = end, start
        specs.append(SynthSpec(
            f0_contour=[(0.0, start), (duration, end)],
            open_quotient=open_quotient,
            jitter=jitter,
            shimmer=shimmer,
            duration=duration,
            seed=seed * 10007 + i,
        ))
    return specs
