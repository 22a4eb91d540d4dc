"""
gcidetect: glottal closure (GCI) and opening (GOI) instant detection from
speech, with EGG-referenced evaluation and a synthetic test corpus.
"""
from .detect import detect_events, run_detector
from .evaluator import histogram, score, sweep_noise, sweep_window
from .lp import levinson_durbin, lp_residual
from .meanshape import estimate_mean_pitch, extract_intervals, mean_based_signal
from .models import (
    Detection,
    DetectorConfig,
    EvalReport,
    GciDetectError,
    GlottalEvent,
    LpConfig,
    MeanSignalConfig,
    ReferenceEvents,
    SynthSpec,
    Waveform,
)
from .reference import align_reference, degg_events
from .signal_core import add_noise, load_wav, save_wav
from .synth import synthesize

__version__ = "1.0.0"
