"""Shared fixtures: synthetic utterances with planted GCI/GOI truth."""
import numpy as np
import pytest

from gcidetect.models import Detection, SynthSpec
from gcidetect.synth import synth_corpus, synthesize


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def vowel_100hz():
    """(speech, egg, truth) for one second at a constant 100 Hz."""
    return synthesize(SynthSpec())


@pytest.fixture(scope="session")
def small_corpus():
    """Six jittered one-second utterances spread over 80-250 Hz."""
    specs = synth_corpus(6, seed=3, f0_range=(80.0, 250.0), jitter=0.01)
    return [synthesize(s) for s in specs]


@pytest.fixture
def reliable_span():
    """Scoring span in seconds: where the detector's mean-based window fits inside the signal."""

    def span(det: Detection):
        lo, hi = det.reliable_span
        rate = det.mean_signal.sample_rate
        return lo / rate, hi / rate

    return span
