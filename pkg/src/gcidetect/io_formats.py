"""
Writers and readers for event CSV/JSONL, reports, histograms, sweep and summary tables.

Every CSV starts with a `# gcidetect <table> schema <version>` comment line.
Floats are written with fixed precision so reruns are byte-identical.
"""
import csv
import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .models import (
    SCHEMA_VERSION,
    EvalReport,
    EventInterval,
    GlottalEvent,
    ReferenceEvents,
    SignalError,
    SweepRow,
    Waveform,
)

logger = logging.getLogger(__name__)

EVENT_COLUMNS = ["kind", "time_s", "index", "salience"]


def _f(x: float, digits: int = 9) -> str:
    return f"{x:.{digits}f}"


def _header(table: str) -> str:
    return f"# gcidetect {table} schema {SCHEMA_VERSION}"


def _write_rows(path: Path, table: str, columns: List[str], rows: Iterable[List[str]],
                notes: Sequence[str] = ()) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(_header(table) + "\n")
        for note in notes:
            f.write(f"# {note}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)
    return path


def _read_rows(path: Path) -> List[Dict[str, str]]:
    try:
        with open(path, newline="") as f:
            lines = [line for line in f if not line.startswith("#") and line.strip()]
    except OSError as e:
        raise SignalError(f"cannot read {path}: {e}", fields=["path"]) from e
    return list(csv.DictReader(lines))


# =============================================================================
# Events
# =============================================================================

def write_events_csv(path: Path, events: Sequence[GlottalEvent]) -> Path:
    return _write_rows(path, "events", EVENT_COLUMNS, (
        [e.kind, _f(e.time), str(e.index), _f(e.salience)] for e in events
    ))


def write_events_jsonl(path: Path, events: Sequence[GlottalEvent]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for e in events:
            f.write(json.dumps(e.model_dump(), sort_keys=True) + "\n")
    return path


def read_events_csv(path: Path, sample_rate: int) -> ReferenceEvents:
    """
    Externally supplied reference events in the event CSV schema.

    The index column wins over time_s when both are present; rows with only a
    time are placed on the nearest sample.
    """
    gcis: List[GlottalEvent] = []
    gois: List[GlottalEvent] = []
    for row in _read_rows(path):
        kind = (row.get("kind") or "").strip().upper()
        if kind not in ("GCI", "GOI"):
            raise SignalError(f"{path}: unknown event kind {kind!r}", fields=["kind"])
        if row.get("index"):
            index = int(row["index"])
        else:
            index = int(round(float(row["time_s"]) * sample_rate))
        salience = float(row["salience"]) if row.get("salience") else 0.0
        (gcis if kind == "GCI" else gois).append(GlottalEvent.at(kind, index, sample_rate, salience))
    gcis.sort(key=lambda e: e.index)
    gois.sort(key=lambda e: e.index)
    logger.debug("read %d GCIs, %d GOIs from %s", len(gcis), len(gois), path)
    return ReferenceEvents(gcis=gcis, gois=gois, source="file")


# =============================================================================
# Intermediates
# =============================================================================

def write_signal_csv(path: Path, signal: Waveform, note: Optional[str] = None) -> Path:
    return _write_rows(path, "signal", ["index", "value"], (
        [str(i), _f(float(v), 12)] for i, v in enumerate(signal.samples)
    ), [note] if note else ())


def write_intervals_csv(path: Path, intervals: Sequence[EventInterval], sample_rate: int) -> Path:
    return _write_rows(path, "intervals", ["kind", "start_s", "end_s"], (
        [iv.kind, _f(iv.start / sample_rate), _f(iv.end / sample_rate)] for iv in intervals
    ))


# =============================================================================
# Reports and tables
# =============================================================================

def write_report_json(path: Path, report: EvalReport) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(report.model_dump(mode="json"), f, indent=2, sort_keys=True, default=str)
    return path


def read_report_json(path: Path) -> EvalReport:
    with open(path) as f:
        return EvalReport.model_validate(json.load(f))


def write_histogram_csv(path: Path, bins: Sequence[Tuple[float, float]]) -> Path:
    return _write_rows(path, "histogram", ["bin_center_s", "probability"], (
        [_f(c), _f(p)] for c, p in bins
    ))


def write_sweep_csv(path: Path, rows: Sequence[SweepRow], note: Optional[str] = None) -> Path:
    """One row per sweep point; snr_db or factor column depending on the sweep."""
    if not rows:
        raise SignalError("empty sweep table", fields=["rows"])
    value_col = "snr_db" if rows[0].parameter == "snr_db" else "factor"
    columns = ["noise_kind", value_col, "misidentification", "idr", "mr", "far", "n_cycles", "n_failed"]
    path = _write_rows(path, "sweep", columns, (
        [r.noise_kind or "", _f(r.value, 3), _f(r.misidentification, 6), _f(r.idr, 6),
         _f(r.mr, 6), _f(r.far, 6), str(r.n_cycles), str(r.n_failed)]
        for r in rows
    ))
    if note:
        with open(path, "a") as f:
            f.write(f"# {note}\n")
    return path


def read_sweep_csv(path: Path) -> List[Dict[str, str]]:
    return _read_rows(path)


def write_summary_csv(path: Path, rows: Sequence[Dict]) -> Path:
    """Per-speaker rates and accuracies; ida_ms in milliseconds."""
    columns = ["speaker", "event", "idr", "mr", "far", "ida_ms", "acc025"]
    return _write_rows(path, "summary", columns, (
        [r["speaker"], r["event"], _f(r["idr"], 6), _f(r["mr"], 6), _f(r["far"], 6),
         _f(r["ida_ms"], 6), _f(r["acc025"], 6)]
        for r in rows
    ))
