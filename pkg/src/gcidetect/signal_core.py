"""
Waveform I/O, windows, resampling and noise injection shared by the rest of the package.
"""
import logging
from math import gcd
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import soundfile as sf
from scipy.signal import resample_poly
from scipy.signal import windows as sigwin

from .models import SignalError, Waveform, WindowFn
from .settings import SUPPORTED_RATE

logger = logging.getLogger(__name__)

READABLE_SUBTYPES = {"PCM_U8", "PCM_S8", "PCM_16", "PCM_24", "PCM_32", "FLOAT", "DOUBLE"}
WRITABLE_SUBTYPES = {"PCM_16", "FLOAT"}

BABBLE_TALKERS = 8


# =============================================================================
# File I/O
# =============================================================================

def load_wav(path: Union[str, Path], channel: Optional[int] = None) -> Waveform:
    """
    Read a WAV file into a Waveform scaled to [-1, 1].

    Args:
        path: WAV file
        channel: channel index for multichannel files

    Returns:
        Waveform at the header's sample rate
    """
    path = Path(path)
    try:
        info = sf.info(str(path))
    except RuntimeError as e:
        raise SignalError(f"cannot read {path}: {e}", fields=["path"]) from e

    if info.format != "WAV" or info.subtype not in READABLE_SUBTYPES:
        raise SignalError(f"{path}: unsupported encoding {info.format}/{info.subtype}", fields=["path"])

    data, rate = sf.read(str(path), dtype="float64", always_2d=True)
    n_channels = data.shape[1]
    if n_channels > 1 and channel is None:
        raise SignalError(f"{path} has {n_channels} channels; select one with --channel", fields=["channel"])
    k = channel or 0
    if k >= n_channels:
        raise SignalError(f"{path}: channel {k} out of range ({n_channels} channels)", fields=["channel"])

    return Waveform(samples=data[:, k], sample_rate=int(rate))


def save_wav(path: Union[str, Path], x: Waveform, subtype: str = "PCM_16") -> Path:
    if subtype not in WRITABLE_SUBTYPES:
        raise SignalError(f"unsupported output subtype {subtype}", fields=["subtype"])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    samples = x.samples if subtype == "FLOAT" else np.clip(x.samples, -1.0, 1.0)
    sf.write(str(path), samples, x.sample_rate, subtype=subtype)
    return path


# =============================================================================
# Windows and rate handling
# =============================================================================

def window_coefficients(w: WindowFn) -> np.ndarray:
    """Symmetric, non-negative window of the requested kind."""
    if w.kind == "rectangular":
        return np.ones(w.length)
    if w.kind == "blackman":
        c = sigwin.blackman(w.length, sym=True)
    else:
        c = sigwin.hann(w.length, sym=True)
    # exact mirror symmetry, no negative round-off at the Blackman endpoints
    c = 0.5 * (c + c[::-1])
    return np.maximum(c, 0.0)


def resample_to(x: Waveform, rate: int) -> Waveform:
    if rate == x.sample_rate:
        return x
    g = gcd(rate, x.sample_rate)
    y = resample_poly(x.samples, rate // g, x.sample_rate // g)
    logger.debug("resampled %d Hz -> %d Hz", x.sample_rate, rate)
    return Waveform(samples=y, sample_rate=rate)


def ensure_rate(x: Waveform, resample: bool = False, rate: int = SUPPORTED_RATE) -> Waveform:
    """Reject signals not at the analysis rate unless resampling was requested."""
    if x.sample_rate == rate:
        return x
    if not resample:
        raise SignalError(
            f"sample rate {x.sample_rate} Hz is not {rate} Hz; pass --resample to convert",
            fields=["sample_rate"],
        )
    return resample_to(x, rate)


# =============================================================================
# Noise
# =============================================================================

def mean_square(samples: np.ndarray) -> float:
    return float(np.mean(np.square(samples))) if samples.size else 0.0


def fit_noise(noise: np.ndarray, length: int, rng: np.random.Generator) -> np.ndarray:
    """Tile (with a random circular offset) or truncate noise to `length` samples."""
    if noise.size == 0:
        raise SignalError("empty noise signal", fields=["noise"])
    if noise.size >= length:
        return noise[:length]
    offset = int(rng.integers(noise.size))
    reps = -(-(length + offset) // noise.size)
    return np.tile(noise, reps)[offset:offset + length]


def white_noise(length: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal(length)


def pseudo_babble(others: Sequence[Waveform], length: int, rng: np.random.Generator,
                  talkers: int = BABBLE_TALKERS) -> np.ndarray:
    """Sum of randomly shifted, power-balanced utterances."""
    usable = [o.samples for o in others if mean_square(o.samples) > 0]
    if not usable:
        raise SignalError("pseudo-babble needs at least one non-silent utterance", fields=["noise"])
    picks = rng.choice(len(usable), size=talkers, replace=len(usable) < talkers)
    babble = np.zeros(length)
    for i in picks:
        seg = fit_noise(np.roll(usable[i], int(rng.integers(usable[i].size))), length, rng)
        babble += seg / np.sqrt(mean_square(seg) or 1.0)
    return babble


def add_noise(x: Waveform, noise: Union[Waveform, np.ndarray, str], snr_db: float,
              rng: Optional[np.random.Generator] = None) -> Waveform:
    """
    Mix noise into x at the requested SNR.

    Powers are mean squares over the whole utterance. `noise` may be a
    waveform, a raw array, or "white" for Gaussian noise drawn from `rng`.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    if np.isnan(snr_db):
        raise SignalError("snr_db is NaN", fields=["snr_db"])
    if np.isposinf(snr_db):
        return x.with_samples(x.samples.copy())

    p_signal = mean_square(x.samples)
    if p_signal == 0.0:
        raise SignalError("signal has zero power; SNR undefined", fields=["x"])

    if isinstance(noise, str):
        if noise != "white":
            raise SignalError(f"unknown noise generator {noise!r}", fields=["noise"])
        n = white_noise(len(x), rng)
    else:
        if isinstance(noise, Waveform):
            if noise.sample_rate != x.sample_rate:
                raise SignalError("noise and signal sample rates differ", fields=["noise"])
            noise = noise.samples
        n = fit_noise(np.asarray(noise, dtype=np.float64), len(x), rng)

    p_noise = mean_square(n)
    if p_noise == 0.0:
        raise SignalError("noise has zero power", fields=["noise"])

    gain = np.sqrt(p_signal / (p_noise * 10.0 ** (snr_db / 10.0)))
    return x.with_samples(x.samples + gain * n)
