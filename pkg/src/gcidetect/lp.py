"""
Frame-based linear prediction and inverse filtering.

Convention throughout: e(n) = s(n) - sum_k a[k] s(n-k).
"""
import logging
from typing import List, Tuple

import numpy as np
from scipy.signal import lfilter

from .models import FrameFlag, LpConfig, LpFrame, Residual, SignalError, Waveform, WindowFn
from .signal_core import window_coefficients

logger = logging.getLogger(__name__)


def autocorrelation(frame: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased, unnormalized autocorrelation r[0..max_lag]."""
    frame = np.asarray(frame, dtype=np.float64)
    n = frame.size
    if max_lag >= n:
        raise SignalError(f"max_lag {max_lag} must be below frame length {n}", fields=["max_lag"])
    return np.array([np.dot(frame[:n - k], frame[k:]) for k in range(max_lag + 1)])


def levinson_durbin(r: np.ndarray, order: int) -> Tuple[np.ndarray, float, FrameFlag]:
    """
    Solve the normal equations for predictor coefficients.

    Args:
        r: autocorrelation, at least order + 1 values
        order: prediction order

    Returns:
        (a[1..order], final prediction-error power, flag). A silent frame
        (r[0] <= 0) gives zeros and "silent". If the recursion loses
        stability the order is truncated at the last stable step, the
        remaining coefficients are zero and the flag is "truncated".
    """
    r = np.asarray(r, dtype=np.float64)
    if r.size < order + 1:
        raise SignalError(f"need {order + 1} autocorrelation values, got {r.size}", fields=["r"])

    a = np.zeros(order)
    if r[0] <= 0.0:
        return a, 0.0, "silent"

    err = r[0]
    floor = np.finfo(np.float64).eps * r[0]
    for i in range(order):
        k = (r[i + 1] - np.dot(a[:i], r[i:0:-1])) / err
        new_err = err * (1.0 - k * k)
        if not (abs(k) < 1.0) or new_err <= floor:
            logger.debug("levinson truncated at order %d of %d", i, order)
            return a, float(err), "truncated"
        prev = a[:i].copy()
        a[:i] = prev - k * prev[::-1]
        a[i] = k
        err = new_err
    return a, float(err), "ok"


def preemphasize(samples: np.ndarray, coeff: float) -> np.ndarray:
    return lfilter([1.0, -coeff], [1.0], samples)


def analyze_frames(samples: np.ndarray, sample_rate: int, cfg: LpConfig) -> List[LpFrame]:
    length, shift = cfg.frame_samples(sample_rate)
    if samples.size < length:
        raise SignalError(
            f"signal of {samples.size} samples is shorter than one {length}-sample LP frame",
            fields=["x"],
        )
    window = window_coefficients(WindowFn(kind=cfg.window, length=length))
    frames = []
    for start in range(0, samples.size - length + 1, shift):
        r = autocorrelation(samples[start:start + length] * window, cfg.order)
        coeffs, gain, flag = levinson_durbin(r, cfg.order)
        frames.append(LpFrame(start=start, coeffs=coeffs, gain=gain, flag=flag))
    return frames


def inverse_filter(samples: np.ndarray, frames: List[LpFrame], frame_len: int, shift: int) -> np.ndarray:
    """
    Run the inverse filter with each frame's coefficients held over its central
    shift-length segment. Edge samples use the nearest frame. The filter
    always sees the true past input, so state is continuous across segments.
    """
    n = samples.size
    order = frames[0].coeffs.size
    first = frame_len // 2 - shift // 2
    bounds = [0] + [min(n, first + i * shift) for i in range(1, len(frames))] + [n]

    residual = np.empty(n)
    for frame, lo, hi in zip(frames, bounds[:-1], bounds[1:]):
        if hi <= lo:
            continue
        pre = min(order, lo)
        b = np.concatenate(([1.0], -frame.coeffs))
        residual[lo:hi] = lfilter(b, [1.0], samples[lo - pre:hi])[pre:]
    return residual


def lp_residual(x: Waveform, cfg: LpConfig) -> Residual:
    """LP residual of x, same length and rate."""
    samples = x.samples
    if cfg.preemphasis is not None:
        samples = preemphasize(samples, cfg.preemphasis)

    frames = analyze_frames(samples, x.sample_rate, cfg)
    length, shift = cfg.frame_samples(x.sample_rate)
    residual = inverse_filter(samples, frames, length, shift)

    result = Residual(signal=x.with_samples(residual), frames=frames)
    flagged = result.flagged_frames
    if flagged["truncated"]:
        logger.warning("%d of %d LP frames truncated (degenerate)", flagged["truncated"], len(frames))
    if flagged["silent"]:
        logger.debug("%d of %d LP frames silent", flagged["silent"], len(frames))
    return result
