"""
Corpus manifests and the per-utterance pipeline: load, analyse, build the
reference, detect, score.
"""
import logging
from collections import defaultdict
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from .detect import run_detector
from .evaluator import pool_reports, run_parallel, score
from .io_formats import read_events_csv
from .lp import lp_residual
from .meanshape import estimate_mean_pitch
from .models import (
    ConfigError,
    CorpusItem,
    DetectorConfig,
    GciDetectError,
    ReferenceExtractionError,
    Utterance,
)
from .reference import align_reference, degg_events, require_reference
from .signal_core import ensure_rate, load_wav

logger = logging.getLogger(__name__)

EGG_CHANNEL = 1  # when speech and EGG share one file


# =============================================================================
# Manifest
# =============================================================================

def load_manifest(path: Path) -> List[Utterance]:
    """
    Parse `speech_path[,egg_path][,t0_mean_s][,speaker]` lines.

    Blank lines and `#` comments are skipped, empty fields mean "not given",
    relative paths resolve against the manifest's directory. An egg_path
    ending in .csv holds reference events in the event CSV schema.
    """
    path = Path(path)
    base = path.parent
    utterances = []
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = [p.strip() for p in line.split(",")]
            if len(fields) > 4:
                raise ConfigError(f"{path}:{lineno}: expected at most 4 fields", fields=["manifest"])
            fields += [""] * (4 - len(fields))
            speech, egg, t0, speaker = fields
            if not speech:
                raise ConfigError(f"{path}:{lineno}: missing speech path", fields=["manifest"])
            try:
                t0_mean = float(t0) if t0 else None
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: bad t0_mean {t0!r}", fields=["manifest"])
            utterances.append(Utterance(
                speech_path=_resolve(base, speech),
                egg_path=_resolve(base, egg) if egg else None,
                t0_mean=t0_mean,
                speaker=speaker or "ALL",
            ))
    logger.info("manifest %s: %d utterances", path, len(utterances))
    return utterances


def _resolve(base: Path, p: str) -> Path:
    q = Path(p)
    return q if q.is_absolute() else base / q


# =============================================================================
# Per-utterance pipeline
# =============================================================================

def prepare_item(utt: Utterance, cfg: DetectorConfig, channel: Optional[int] = None,
                 resample: bool = False) -> CorpusItem:
    """
    Speech, residual, mean pitch period and aligned reference for one utterance.

    Raises:
        ReferenceExtractionError: no EGG/reference given, or no cycles found
    """
    speech = ensure_rate(load_wav(utt.speech_path, channel), resample)
    residual = lp_residual(speech, cfg.lp)
    t0 = utt.t0_mean or cfg.mean.t0_mean or estimate_mean_pitch(speech)

    if utt.egg_path is None:
        raise ReferenceExtractionError(f"{utt.name}: no EGG or reference file", fields=["egg_path"])
    if utt.egg_path.suffix.lower() == ".csv":
        reference = require_reference(read_events_csv(utt.egg_path, speech.sample_rate))
    else:
        egg_channel = EGG_CHANNEL if utt.egg_path == utt.speech_path else channel
        egg = ensure_rate(load_wav(utt.egg_path, egg_channel), resample)
        reference = align_reference(degg_events(egg), speech, residual)
        if reference.alignment_shift:
            logger.debug("%s: reference shifted %.3f ms", utt.name, reference.alignment_shift * 1000)

    return CorpusItem(
        name=utt.name, speaker=utt.speaker, speech=speech,
        reference=reference, t0_mean=t0, residual=residual,
    )


def _evaluate_one(args) -> Dict[str, Any]:
    utt, cfg, channel, resample = args
    result: Dict[str, Any] = {"utterance": utt.name, "speaker": utt.speaker}
    try:
        item = prepare_item(utt, cfg, channel, resample)
        det = run_detector(item.speech, cfg, residual=item.residual, t0_mean=item.t0_mean)
        meta = {"utterance": utt.name, "speaker": utt.speaker, "t0_mean_s": item.t0_mean}
        result["gci"] = score(det.gcis, item.reference, "GCI", meta)
        result["goi"] = score(det.gois, item.reference, "GOI", meta) if item.reference.gois else None
        # only the event lists travel back; the signals stay in the worker
        result["gcis"], result["gois"] = det.gcis, det.gois
        result["status"] = "ok"
    except GciDetectError as e:
        logger.warning("%s failed: %s", utt.name, e)
        result.update(status="error", error=str(e), error_type=type(e).__name__)
    return result


def _load_one(args) -> Tuple[Optional[CorpusItem], Dict[str, Any]]:
    utt, cfg, channel, resample = args
    try:
        return prepare_item(utt, cfg, channel, resample), {"utterance": utt.name, "status": "ok"}
    except GciDetectError as e:
        logger.warning("%s skipped: %s", utt.name, e)
        return None, {"utterance": utt.name, "status": "error", "error": str(e)}


def evaluate_corpus(utterances: List[Utterance], cfg: DetectorConfig = DetectorConfig(),
                    channel: Optional[int] = None, resample: bool = False, jobs: int = 1,
                    progress: bool = False) -> List[Dict[str, Any]]:
    """
    Detect and score every utterance; failures are recorded, not raised.

    Returns:
        One result dict per utterance, in manifest order: utterance, speaker,
        status ("ok" | "error"), gci/goi EvalReports and gcis/gois event
        lists, or the error message.
    """
    args = [(u, cfg, channel, resample) for u in utterances]
    return run_parallel(_evaluate_one, args, jobs, "evaluate", progress)


def load_corpus(utterances: List[Utterance], cfg: DetectorConfig = DetectorConfig(),
                channel: Optional[int] = None, resample: bool = False, jobs: int = 1,
                progress: bool = False) -> Tuple[List[CorpusItem], List[Dict[str, Any]]]:
    """Prepared items for the sweeps, plus one status dict per utterance."""
    args = [(u, cfg, channel, resample) for u in utterances]
    loaded = run_parallel(_load_one, args, jobs, "load corpus", progress)
    items = [item for item, _ in loaded if item is not None]
    return items, [status for _, status in loaded]


# =============================================================================
# Summaries
# =============================================================================

def summarize(results: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
    """
    Per-speaker rows (speaker, event, idr, mr, far, ida_ms, acc025) with the
    pooled ALL rows last.
    """
    ok = [r for r in results if r.get("status") == "ok"]
    by_speaker: Dict[str, List[Dict[str, Any]]] = defaultdict(list)
    for r in ok:
        by_speaker[r["speaker"]].append(r)

    groups = [(s, by_speaker[s]) for s in sorted(by_speaker) if s != "ALL"]
    groups.append(("ALL", ok))

    rows = []
    for speaker, members in groups:
        for kind, key in (("GCI", "gci"), ("GOI", "goi")):
            reports = [m[key] for m in members if m.get(key) is not None]
            if not reports:
                continue
            pooled = pool_reports(reports, kind)
            rows.append({
                "speaker": speaker, "event": kind, "idr": pooled.idr, "mr": pooled.mr,
                "far": pooled.far, "ida_ms": pooled.ida * 1000, "acc025": pooled.acc025,
                "report": pooled,
            })
    return rows
