from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SCHEMA_VERSION = "1.0.0"

EventKind = Literal["GCI", "GOI"]
WindowKind = Literal["blackman", "hanning", "rectangular"]
Polarity = Literal["auto", "positive", "negative", "absolute"]
FrameFlag = Literal["ok", "silent", "truncated"]
NoiseKind = Literal["white", "babble"]


# =============================================================================
# Errors
# =============================================================================

class GciDetectError(Exception):
    """Base class for every error raised by gcidetect."""

    def __init__(self, message: str, fields: Optional[List[str]] = None):
        super().__init__(message)
        self.fields = fields or []


class SignalError(GciDetectError):
    pass


class ConfigError(GciDetectError):
    pass


class NoVoicingError(GciDetectError):
    pass


class ReferenceExtractionError(GciDetectError):
    pass


class EvaluationError(GciDetectError):
    pass


# =============================================================================
# Signals
# =============================================================================

class Waveform(BaseModel):
    """Uniformly sampled real signal. Carries speech, EGG, residual and mean-based signals alike."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    samples: np.ndarray
    sample_rate: int = Field(gt=0)

    @field_validator("samples", mode="before")
    @classmethod
    def _as_finite_array(cls, v: Any) -> np.ndarray:
        arr = np.asarray(v, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError(f"samples must be one-dimensional, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples contain NaN or Inf")
        return arr

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def with_samples(self, samples: np.ndarray) -> "Waveform":
        return Waveform(samples=samples, sample_rate=self.sample_rate)


class WindowFn(BaseModel):
    kind: WindowKind = "blackman"
    length: int = Field(ge=1)


# =============================================================================
# LP analysis
# =============================================================================

class LpConfig(BaseModel):
    """24th order, 25 ms Hanning frames every 5 ms."""

    order: int = Field(default=24, ge=1)
    frame_len: float = 0.025  # seconds
    frame_shift: float = 0.005  # seconds
    window: WindowKind = "hanning"
    preemphasis: Optional[float] = None  # 0.97 when enabled

    @model_validator(mode="after")
    def _check_frames(self) -> "LpConfig":
        if not (self.frame_len > self.frame_shift > 0):
            raise ValueError("need frame_len > frame_shift > 0")
        if self.preemphasis is not None and not (0.0 < self.preemphasis < 1.0):
            raise ValueError("preemphasis must lie in (0, 1)")
        return self

    def frame_samples(self, sample_rate: int) -> Tuple[int, int]:
        """Return (frame length, shift) in samples for a given rate."""
        length = int(round(self.frame_len * sample_rate))
        shift = max(1, int(round(self.frame_shift * sample_rate)))
        if length <= self.order:
            raise ConfigError(
                f"frame of {length} samples cannot support order {self.order}",
                fields=["order", "frame_len"],
            )
        return length, shift


class LpFrame(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    start: int
    coeffs: np.ndarray
    gain: float
    flag: FrameFlag = "ok"


class Residual(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    signal: Waveform
    frames: List[LpFrame] = []

    @property
    def coeffs_per_frame(self) -> List[Tuple[int, np.ndarray]]:
        return [(f.start, f.coeffs) for f in self.frames]

    @property
    def flagged_frames(self) -> Dict[str, int]:
        counts = {"silent": 0, "truncated": 0}
        for f in self.frames:
            if f.flag != "ok":
                counts[f.flag] += 1
        return counts


# =============================================================================
# Mean-based signal and intervals
# =============================================================================

class MeanSignalConfig(BaseModel):
    window_factor: float = Field(default=1.75, gt=0)
    t0_mean: Optional[float] = Field(default=None, gt=0)  # seconds; estimated when None
    ripple_threshold: float = Field(default=1e-6, ge=0)
    # same-kind extrema closer than this fraction of T0,mean collapse to the stronger one
    extremum_spacing: float = Field(default=0.6, ge=0, lt=1)

    def spacing_samples(self, sample_rate: int, t0_mean: float) -> int:
        return int(round(self.extremum_spacing * t0_mean * sample_rate))

    def half_width(self, sample_rate: int, t0_mean: Optional[float] = None) -> int:
        t0 = t0_mean if t0_mean is not None else self.t0_mean
        if t0 is None:
            raise ConfigError("t0_mean is required to size the window", fields=["t0_mean"])
        n = int(round(self.window_factor * t0 * sample_rate / 2))
        if n < 1:
            raise ConfigError(
                f"window factor {self.window_factor} gives a window under 3 samples",
                fields=["window_factor"],
            )
        return n


class EventInterval(BaseModel):
    kind: EventKind
    start: int  # inclusive
    end: int  # exclusive

    @model_validator(mode="after")
    def _nonempty(self) -> "EventInterval":
        if self.start >= self.end:
            raise ValueError(f"empty interval [{self.start}, {self.end})")
        return self

    def __len__(self) -> int:
        return self.end - self.start


# =============================================================================
# Events and detection
# =============================================================================

class GlottalEvent(BaseModel):
    kind: EventKind
    index: int
    time: float  # seconds
    salience: float = 0.0

    @classmethod
    def at(cls, kind: EventKind, index: int, sample_rate: int, salience: float = 0.0) -> "GlottalEvent":
        return cls(kind=kind, index=int(index), time=int(index) / sample_rate, salience=float(salience))


class DetectorConfig(BaseModel):
    lp: LpConfig = LpConfig()
    mean: MeanSignalConfig = MeanSignalConfig()
    polarity: Polarity = "auto"
    gci_margin: float = Field(default=0.0, ge=0)  # seconds
    goi_margin: float = Field(default=0.00025, ge=0)  # seconds


class Detection(BaseModel):
    """Full output of one detector run, intermediates included."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    gcis: List[GlottalEvent] = []
    gois: List[GlottalEvent] = []
    polarity: Polarity
    speech_inverted: bool = False  # auto mode negated the speech before interval extraction
    t0_mean: float
    half_width: int
    # [start, end) samples where the mean-based window lies inside the signal;
    # outside it the mean-based signal and its intervals are edge-unreliable
    reliable_span: Tuple[int, int] = (0, 0)
    mean_signal: Waveform
    residual: Residual
    gci_intervals: List[EventInterval] = []
    goi_intervals: List[EventInterval] = []
    diagnostics: List[str] = []


class ReferenceEvents(BaseModel):
    gcis: List[GlottalEvent] = []
    gois: List[GlottalEvent] = []
    alignment_shift: float = 0.0  # seconds
    source: Literal["egg", "synthetic", "file"] = "egg"
    diagnostics: List[str] = []

    def of_kind(self, kind: EventKind) -> List[GlottalEvent]:
        return self.gcis if kind == "GCI" else self.gois


# =============================================================================
# Evaluation
# =============================================================================

class EvalReport(BaseModel):
    kind: EventKind
    idr: float
    mr: float
    far: float
    ida: float  # seconds
    acc025: float
    errors: List[float] = []  # seconds, detected minus reference
    n_cycles: int
    n_identified: int = 0
    n_missed: int = 0
    n_false_alarm: int = 0
    out_of_voicing: int = 0
    metadata: Dict[str, Any] = {}
    schema_version: str = SCHEMA_VERSION

    @model_validator(mode="after")
    def _partition(self) -> "EvalReport":
        if abs(self.idr + self.mr + self.far - 1.0) > 1e-9:
            raise ValueError("idr + mr + far must equal 1")
        if len(self.errors) != self.n_identified:
            raise ValueError("one timing error per identified cycle")
        return self


class SweepRow(BaseModel):
    parameter: str  # "window_factor" or "snr_db"
    value: float
    noise_kind: Optional[NoiseKind] = None
    misidentification: float
    idr: float
    mr: float
    far: float
    n_cycles: int
    n_failed: int = 0
    metadata: Dict[str, Any] = {}


# =============================================================================
# Synthesis
# =============================================================================

class SynthSpec(BaseModel):
    f0_contour: List[Tuple[float, float]] = [(0.0, 100.0)]  # (time s, Hz)
    open_quotient: float = 0.5
    formants: List[Tuple[float, float]] = [(600.0, 80.0), (1200.0, 100.0), (2400.0, 120.0)]
    jitter: float = Field(default=0.0, ge=0, lt=0.2)
    shimmer: float = Field(default=0.0, ge=0, lt=0.5)
    duration: float = Field(default=1.0, gt=0)
    sample_rate: int = Field(default=16000, gt=0)
    invert: bool = False  # flip speech polarity
    seed: int = 0

    @field_validator("f0_contour")
    @classmethod
    def _f0_range(cls, v: List[Tuple[float, float]]) -> List[Tuple[float, float]]:
        if not v:
            raise ValueError("f0_contour needs at least one point")
        for _, f0 in v:
            if not (50.0 <= f0 <= 400.0):
                raise ValueError(f"f0 {f0} Hz outside [50, 400]")
        return sorted(v)

    @field_validator("open_quotient")
    @classmethod
    def _oq_range(cls, v: float) -> float:
        if not (0.2 < v < 0.9):
            raise ValueError("open_quotient must lie in (0.2, 0.9)")
        return v

    @model_validator(mode="after")
    def _formants_below_nyquist(self) -> "SynthSpec":
        for fc, bw in self.formants:
            if not (0 < fc < self.sample_rate / 2) or bw <= 0:
                raise ValueError(f"formant ({fc}, {bw}) invalid at {self.sample_rate} Hz")
        return self


class CorpusItem(BaseModel):
    """One prepared utterance: speech, aligned reference and its mean pitch period."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    name: str
    speaker: str = "ALL"
    speech: Waveform
    reference: ReferenceEvents
    t0_mean: float
    residual: Optional[Residual] = None


# =============================================================================
# Run configuration
# =============================================================================

class Utterance(BaseModel):
    """One manifest line."""

    speech_path: Path
    egg_path: Optional[Path] = None
    t0_mean: Optional[float] = None
    speaker: str = "ALL"

    @property
    def name(self) -> str:
        return self.speech_path.stem


class RunConfig(BaseModel):
    subcommand: Literal["detect", "evaluate", "sweep-window", "sweep-noise", "synth"]
    inputs: List[Path] = []
    manifest: Optional[Path] = None
    output_dir: Optional[Path] = None  # detect: next to each input; otherwise settings default
    detector: DetectorConfig = DetectorConfig()
    seed: int = 0
    jobs: int = Field(default=1, ge=1)
    channel: Optional[int] = Field(default=None, ge=0)
    resample: bool = False
    dump_mean_signal: bool = False
    dump_residual: bool = False
    gci_only: bool = False
    goi_only: bool = False
    event_format: Literal["csv", "jsonl"] = "csv"
    factors: List[float] = []
    snrs_db: List[float] = []
    noise: Literal["white", "babble", "both"] = "white"
    noise_file: Optional[Path] = None
    bin_width: float = Field(default=0.00025, gt=0)
    synth: SynthSpec = SynthSpec()
    synth_count: int = Field(default=1, ge=1)
    f0_range: Optional[Tuple[float, float]] = None  # Hz; corpus mode when set

    @model_validator(mode="after")
    def _consistent(self) -> "RunConfig":
        missing = [str(p) for p in self.inputs if not p.exists()]
        for p in (self.manifest, self.noise_file):
            if p is not None and not p.exists():
                missing.append(str(p))
        if missing:
            raise ValueError(f"paths do not exist: {', '.join(missing)}")
        if self.gci_only and self.goi_only:
            raise ValueError("--gci-only and --goi-only are exclusive")
        if any(f <= 0 for f in self.factors):
            raise ValueError("window factors must be positive")
        if any(not np.isfinite(s) for s in self.snrs_db):
            raise ValueError("SNRs must be finite")
        if self.subcommand in ("evaluate", "sweep-window", "sweep-noise") and self.manifest is None:
            raise ValueError(f"{self.subcommand} requires --manifest")
        if self.subcommand == "detect" and not self.inputs:
            raise ValueError("detect requires at least one input file")
        if self.f0_range is not None and not (50.0 <= self.f0_range[0] <= self.f0_range[1] <= 400.0):
            raise ValueError("f0 range must satisfy 50 <= lo <= hi <= 400 Hz")
        return self
