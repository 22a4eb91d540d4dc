"""
Cycle-based scoring of detected events against a reference, timing-error
histograms, and window-length / noise-level sweeps over a corpus.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from .detect import run_detector
from .lp import lp_residual
from .models import (
    CorpusItem,
    DetectorConfig,
    EvalReport,
    EvaluationError,
    EventKind,
    GciDetectError,
    GlottalEvent,
    NoiseKind,
    ReferenceEvents,
    SweepRow,
    Waveform,
)
from .meanshape import MIN_F0
from .signal_core import add_noise, pseudo_babble

logger = logging.getLogger(__name__)

ACCURACY_BOUND = 0.00025  # seconds
MAX_PERIOD = 1.25 / MIN_F0  # seconds; longer reference gaps split voiced regions
DEFAULT_PERIOD = 0.01  # seconds; cycle width around an isolated reference event
SNR_REFERENCE = "full-band, whole-utterance mean square"

DEFAULT_FACTORS = [0.5 + 0.25 * k for k in range(11)]  # 0.5:0.25:3.0
DEFAULT_SNRS = [-10.0 + 10.0 * k for k in range(10)]  # -10..80 dB


# =============================================================================
# Scoring
# =============================================================================

def larynx_cycles(ref_times: np.ndarray, max_period: float = MAX_PERIOD) -> np.ndarray:
    """
    (lo, hi) bounds of the cycle around each reference event.

    Bounds are midpoints to the neighbouring events; at utterance edges and
    voicing breaks the cycle extends half the neighbouring period outward.
    """
    k = ref_times.size
    gaps = np.diff(ref_times)
    bounds = np.empty((k, 2))
    for i, t in enumerate(ref_times):
        prev_gap = gaps[i - 1] if i > 0 and gaps[i - 1] <= max_period else None
        next_gap = gaps[i] if i < k - 1 and gaps[i] <= max_period else None
        left = prev_gap if prev_gap is not None else (next_gap if next_gap is not None else DEFAULT_PERIOD)
        right = next_gap if next_gap is not None else (prev_gap if prev_gap is not None else DEFAULT_PERIOD)
        bounds[i] = (t - left / 2, t + right / 2)
    return bounds


def _mean_period(ref_times: np.ndarray, max_period: float = MAX_PERIOD) -> float:
    gaps = np.diff(ref_times)
    gaps = gaps[gaps <= max_period]
    return float(gaps.mean()) if gaps.size else DEFAULT_PERIOD


def score(detected: Sequence[GlottalEvent], ref: ReferenceEvents, kind: EventKind,
          metadata: Optional[Dict] = None, span: Optional[Tuple[float, float]] = None) -> EvalReport:
    """
    Identification rate, miss rate, false alarm rate and timing accuracy for one event kind.

    A reference cycle with exactly one detection is identified, none is a
    miss, more is a false alarm. Detections outside every cycle count as a
    false alarm of the nearest cycle when within half a mean period of it,
    otherwise as out-of-voicing.

    `span` = (lo, hi) seconds restricts both streams to lo <= t < hi.
    """
    ref_times = np.array([e.time for e in ref.of_kind(kind)])
    if span is not None:
        ref_times = ref_times[(ref_times >= span[0]) & (ref_times < span[1])]
    if ref_times.size == 0:
        raise EvaluationError(f"empty {kind} reference", fields=["reference"])
    det_times = np.sort(np.array([e.time for e in detected if e.kind == kind], dtype=np.float64))
    if span is not None:
        det_times = det_times[(det_times >= span[0]) & (det_times < span[1])]

    cycles = larynx_cycles(ref_times)
    half_period = _mean_period(ref_times) / 2
    counts = np.zeros(ref_times.size, dtype=int)
    stray_hit = np.zeros(ref_times.size, dtype=bool)
    first_hit = np.full(ref_times.size, np.nan)
    out_of_voicing = 0

    for d in det_times:
        i = int(np.searchsorted(cycles[:, 0], d, side="right")) - 1
        if i >= 0 and d < cycles[i, 1]:
            if counts[i] == 0:
                first_hit[i] = d
            counts[i] += 1
            continue
        dist = np.where(d < cycles[:, 0], cycles[:, 0] - d, d - cycles[:, 1])
        j = int(np.argmin(dist))
        if dist[j] <= half_period:
            stray_hit[j] = True
        else:
            out_of_voicing += 1

    identified = (counts == 1) & ~stray_hit
    false_alarm = (counts > 1) | stray_hit
    missed = ~identified & ~false_alarm

    n = ref_times.size
    errors = first_hit[identified] - ref_times[identified]
    meta = {"kind": kind, "alignment_shift_s": ref.alignment_shift, "reference_source": ref.source}
    if span is not None:
        meta["span_s"] = [float(span[0]), float(span[1])]
    meta.update(metadata or {})
    return EvalReport(
        kind=kind,
        idr=identified.sum() / n,
        mr=missed.sum() / n,
        far=false_alarm.sum() / n,
        ida=float(np.std(errors)) if errors.size else 0.0,
        acc025=fraction_within(errors, ACCURACY_BOUND, inclusive=True),
        errors=[float(e) for e in errors],
        n_cycles=n,
        n_identified=int(identified.sum()),
        n_missed=int(missed.sum()),
        n_false_alarm=int(false_alarm.sum()),
        out_of_voicing=out_of_voicing,
        metadata=meta,
    )


def pool_reports(reports: Sequence[EvalReport], kind: EventKind, metadata: Optional[Dict] = None) -> EvalReport:
    """Corpus-level report: counts summed, timing errors pooled."""
    reports = [r for r in reports if r.kind == kind]
    n = sum(r.n_cycles for r in reports)
    if n == 0:
        raise EvaluationError(f"no {kind} cycles to pool", fields=["reports"])
    errors = np.array([e for r in reports for e in r.errors])
    n_id = sum(r.n_identified for r in reports)
    n_miss = sum(r.n_missed for r in reports)
    n_fa = sum(r.n_false_alarm for r in reports)
    return EvalReport(
        kind=kind,
        idr=n_id / n,
        mr=n_miss / n,
        far=n_fa / n,
        ida=float(np.std(errors)) if errors.size else 0.0,
        acc025=fraction_within(errors, ACCURACY_BOUND, inclusive=True),
        errors=[float(e) for e in errors],
        n_cycles=n,
        n_identified=n_id,
        n_missed=n_miss,
        n_false_alarm=n_fa,
        out_of_voicing=sum(r.out_of_voicing for r in reports),
        metadata={"kind": kind, "utterances": len(reports), **(metadata or {})},
    )


# =============================================================================
# Timing-error distributions
# =============================================================================

def fraction_within(errors: Sequence[float], bound: float, inclusive: bool = False) -> float:
    """Share of |error| below `bound` (or at most `bound` when inclusive)."""
    e = np.abs(np.asarray(errors, dtype=np.float64))
    if e.size == 0:
        return 0.0
    hits = e <= bound + 1e-12 if inclusive else e < bound
    return float(hits.mean())


def histogram(errors: Sequence[float], bin_width: float, dense: bool = False) -> List[Tuple[float, float]]:
    """
    (bin center, probability) pairs over bins centred on multiples of bin_width.

    Only occupied bins are returned unless `dense` asks for the full range.
    """
    if not bin_width > 0:
        raise EvaluationError("bin_width must be positive", fields=["bin_width"])
    e = np.asarray(errors, dtype=np.float64)
    if e.size == 0:
        return []
    k = (np.sign(e) * np.floor(np.abs(e) / bin_width + 0.5)).astype(int)
    if dense:
        bins = np.arange(k.min(), k.max() + 1)
    else:
        bins = np.unique(k)
    counts = np.array([(k == b).sum() for b in bins])
    return [(float(b * bin_width), float(c / e.size)) for b, c in zip(bins, counts)]


# =============================================================================
# Sweeps
# =============================================================================

def _with_factor(cfg: DetectorConfig, factor: float) -> DetectorConfig:
    return cfg.model_copy(update={"mean": cfg.mean.model_copy(update={"window_factor": factor})})


def _score_gci(item: CorpusItem, speech: Waveform, cfg: DetectorConfig, residual=None,
               metadata: Optional[Dict] = None) -> EvalReport:
    det = run_detector(speech, cfg, residual=residual, t0_mean=item.t0_mean)
    return score(det.gcis, item.reference, "GCI", {"utterance": item.name, **(metadata or {})})


def _window_task(args) -> List[Optional[EvalReport]]:
    item, factors, cfg = args
    residual = item.residual or lp_residual(item.speech, cfg.lp)
    out: List[Optional[EvalReport]] = []
    for f in factors:
        try:
            out.append(_score_gci(item, item.speech, _with_factor(cfg, f), residual, {"window_factor": f}))
        except GciDetectError as e:
            logger.warning("%s: factor %.2f failed: %s", item.name, f, e)
            out.append(None)
    return out


def _noise_metadata(kind: NoiseKind, seed: int) -> Dict:
    return {"noise_kind": kind, "seed": seed, "snr_reference": SNR_REFERENCE}


def _noise_task(args) -> List[Optional[EvalReport]]:
    item, index, kind, snrs, cfg, seed, noise_file, others = args
    out: List[Optional[EvalReport]] = []
    for s_idx, snr in enumerate(snrs):
        rng = np.random.default_rng([seed, 0 if kind == "white" else 1, index, s_idx])
        try:
            if kind == "white":
                source, origin = "white", "white"
            elif noise_file is not None:
                source, origin = noise_file, "file"
            else:
                source, origin = pseudo_babble(others, len(item.speech), rng), "corpus babble"
            noisy = add_noise(item.speech, source, snr, rng)
            meta = _noise_metadata(kind, seed)
            meta.update(snr_db=snr, noise_source=origin)
            out.append(_score_gci(item, noisy, cfg, metadata=meta))
        except GciDetectError as e:
            logger.warning("%s: %s noise at %.1f dB failed: %s", item.name, kind, snr, e)
            out.append(None)
    return out


def run_parallel(task, jobs_args: list, jobs: int, desc: str, progress: bool) -> list:
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = pool.map(task, jobs_args)
            return list(tqdm(results, total=len(jobs_args), desc=desc, disable=not progress))
    return [task(a) for a in tqdm(jobs_args, desc=desc, disable=not progress)]


def _rows(parameter: str, values: Sequence[float], per_item: List[List[Optional[EvalReport]]],
          noise_kind: Optional[NoiseKind] = None, metadata: Optional[Dict] = None) -> List[SweepRow]:
    rows = []
    for j, v in enumerate(values):
        reports = [res[j] for res in per_item if res[j] is not None]
        failed = sum(1 for res in per_item if res[j] is None)
        if not reports:
            logger.warning("%s=%s: every utterance failed; row omitted", parameter, v)
            continue
        pooled = pool_reports(reports, "GCI")
        rows.append(SweepRow(
            parameter=parameter, value=float(v), noise_kind=noise_kind,
            misidentification=1.0 - pooled.idr, idr=pooled.idr, mr=pooled.mr, far=pooled.far,
            n_cycles=pooled.n_cycles, n_failed=failed,
            metadata={"utterances": len(reports), **(metadata or {})},
        ))
    return rows


def sweep_window(corpus: Sequence[CorpusItem], factors: Sequence[float] = DEFAULT_FACTORS,
                 cfg: DetectorConfig = DetectorConfig(), jobs: int = 1, progress: bool = False) -> List[SweepRow]:
    """GCI misidentification (1 - IDR) per window factor, pooled over the corpus."""
    if any(f <= 0 for f in factors):
        raise EvaluationError("window factors must be positive", fields=["factors"])
    args = [(item, list(factors), cfg) for item in corpus]
    per_item = run_parallel(_window_task, args, jobs, "window sweep", progress)
    return _rows("window_factor", factors, per_item)


def sweep_noise(corpus: Sequence[CorpusItem], noise_kind: NoiseKind = "white",
                snrs_db: Sequence[float] = DEFAULT_SNRS, cfg: DetectorConfig = DetectorConfig(),
                seed: int = 0, noise: Optional[Waveform] = None, jobs: int = 1,
                progress: bool = False, clean_baseline: bool = False) -> List[SweepRow]:
    """
    GCI misidentification per SNR with noise added to clean speech and scored
    against the clean-speech reference.

    Babble comes from `noise` when given, otherwise from the corpus's other
    utterances. With clean_baseline the table starts with an snr_db = inf row for the
    unmodified speech.
    """
    if any(not np.isfinite(s) for s in snrs_db):
        raise EvaluationError("SNRs must be finite", fields=["snrs_db"])
    values = ([float("inf")] if clean_baseline else []) + [float(s) for s in snrs_db]
    args = []
    for i, item in enumerate(corpus):
        others: List[Waveform] = []
        if noise_kind == "babble" and noise is None:
            others = [c.speech for j, c in enumerate(corpus) if j != i] or [item.speech]
        args.append((item, i, noise_kind, values, cfg, seed, noise, others))
    per_item = run_parallel(_noise_task, args, jobs, f"{noise_kind} noise sweep", progress)
    meta = _noise_metadata(noise_kind, seed)
    if noise_kind == "babble":
        meta["noise_source"] = "file" if noise is not None else "corpus babble"
    return _rows("snr_db", values, per_item, noise_kind, meta)
