"""
Command-line entry point: detect, evaluate, sweep-window, sweep-noise, synth.

Usage:
    python -m gcidetect detect speech.wav
    python -m gcidetect evaluate --manifest corpus.txt --output-dir data/output/eval
    python -m gcidetect sweep-window --manifest corpus.txt --factors 0.5:0.25:3.0
    python -m gcidetect sweep-noise --manifest corpus.txt --noise both
    python -m gcidetect synth --count 50 --f0-range 60:300 --output-dir data/synth
"""
import argparse
import json
import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from pydantic import ValidationError

from .corpus import evaluate_corpus, load_corpus, load_manifest, summarize
from .detect import run_detector
from .evaluator import (
    DEFAULT_FACTORS,
    DEFAULT_SNRS,
    SNR_REFERENCE,
    fraction_within,
    histogram,
    sweep_noise,
    sweep_window,
)
from .io_formats import (
    write_events_csv,
    write_events_jsonl,
    write_histogram_csv,
    write_intervals_csv,
    write_report_json,
    write_signal_csv,
    write_summary_csv,
    write_sweep_csv,
)
from .models import (
    ConfigError,
    DetectorConfig,
    EvaluationError,
    GciDetectError,
    LpConfig,
    MeanSignalConfig,
    RunConfig,
    SweepRow,
    SynthSpec,
)
from .settings import configure_logging, get_settings
from .signal_core import ensure_rate, load_wav, save_wav
from .synth import synth_corpus, synthesize

logger = logging.getLogger(__name__)

DEFAULT_F0_RANGE = (60.0, 300.0)


# =============================================================================
# Argument parsing
# =============================================================================

def parse_grid(text: str) -> List[float]:
    """`start:step:stop` (inclusive) or a comma-separated list."""
    try:
        if ":" in text:
            start, step, stop = (float(p) for p in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            count = int(round((stop - start) / step)) + 1
            return [round(start + k * step, 10) for k in range(count)]
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected start:step:stop or a comma list, got {text!r}")


def parse_range(text: str) -> tuple:
    try:
        lo, hi = (float(p) for p in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}")
    return lo, hi


def _detector_options() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("detector")
    g.add_argument("--order", type=int, default=24,
                   help="LP order (default: 24, the published configuration at 16 kHz)")
    g.add_argument("--frame-len-ms", type=float, default=25.0,
                   help="LP frame length in ms (default: 25, Hanning-windowed)")
    g.add_argument("--frame-shift-ms", type=float, default=5.0,
                   help="LP frame shift in ms (default: 5)")
    g.add_argument("--lp-window", choices=["hanning", "blackman", "rectangular"], default="hanning",
                   help="LP analysis window (default: hanning)")
    g.add_argument("--preemphasis", type=float, default=None,
                   help="pre-emphasis coefficient before LP analysis, e.g. 0.97 (default: off)")
    g.add_argument("--window-factor", type=float, default=1.75,
                   help="mean-signal Blackman window length as a multiple of T0,mean "
                        "(default: 1.75, inside the 1.5-2 valley of lowest misidentification)")
    g.add_argument("--t0-mean-ms", type=float, default=None,
                   help="mean pitch period in ms (default: estimated by autocorrelation)")
    g.add_argument("--extremum-spacing", type=float, default=0.6,
                   help="closest same-kind extrema of the mean signal, as a fraction of T0,mean "
                        "(default: 0.6; 0 disables)")
    g.add_argument("--polarity", choices=["auto", "positive", "negative", "absolute"], default="auto",
                   help="residual peak sign (default: auto, speech sign from residual skewness, "
                        "peak sign from GCI intervals)")
    g.add_argument("--margin-ms", type=float, default=0.25,
                   help="GOI interval widening on both sides in ms (default: 0.25)")
    g.add_argument("--gci-margin-ms", type=float, default=0.0,
                   help="GCI interval widening in ms (default: 0)")
    return p


def _run_options() -> argparse.ArgumentParser:
    settings = get_settings()
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("run")
    g.add_argument("--output-dir", type=Path, default=None,
                   help=f"output directory (default: next to the input for detect, "
                        f"else GCIDETECT_OUTPUT_DIR or {settings.output_dir})")
    g.add_argument("--seed", type=int, default=settings.seed,
                   help=f"seed for every stochastic step (default: GCIDETECT_SEED or {settings.seed})")
    g.add_argument("--jobs", type=int, default=settings.jobs,
                   help=f"parallel utterances (default: GCIDETECT_JOBS or {settings.jobs})")
    g.add_argument("--channel", type=int, default=None,
                   help="channel to read from multichannel WAV files (default: require mono)")
    g.add_argument("--resample", action="store_true",
                   help="resample inputs to 16 kHz instead of rejecting other rates")
    g.add_argument("--log-level", default=settings.log_level,
                   help=f"logging level (default: GCIDETECT_LOG_LEVEL or {settings.log_level})")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gcidetect",
        description="Glottal closure and opening instant detection from speech.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    det, run = _detector_options(), _run_options()

    p = sub.add_parser("detect", parents=[det, run], help="detect GCIs/GOIs in WAV files")
    p.add_argument("inputs", nargs="+", type=Path, help="16 kHz WAV files")
    only = p.add_mutually_exclusive_group()
    only.add_argument("--gci-only", action="store_true", help="write GCIs only")
    only.add_argument("--goi-only", action="store_true", help="write GOIs only")
    p.add_argument("--format", dest="event_format", choices=["csv", "jsonl"], default="csv",
                   help="event file format (default: csv)")
    p.add_argument("--dump-mean-signal", action="store_true",
                   help="also write the mean-based signal and its intervals as CSV")
    p.add_argument("--dump-residual", action="store_true",
                   help="also write the LP residual as a float WAV")

    p = sub.add_parser("evaluate", parents=[det, run], help="score against EGG-derived references")
    p.add_argument("--manifest", type=Path, required=True,
                   help="lines of speech_path[,egg_path][,t0_mean_s][,speaker]")
    p.add_argument("--bin-width-ms", type=float, default=0.25,
                   help="timing-error histogram bin width in ms (default: 0.25)")

    p = sub.add_parser("sweep-window", parents=[det, run], help="misidentification vs window factor")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--factors", type=parse_grid, default=DEFAULT_FACTORS,
                   help="window factors as start:step:stop or a list (default: 0.5:0.25:3.0)")

    p = sub.add_parser("sweep-noise", parents=[det, run], help="misidentification vs SNR")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--snrs", type=parse_grid, default=DEFAULT_SNRS,
                   help="SNRs in dB as start:step:stop or a list, e.g. --snrs=-10:10:80 (default: -10 to 80 in 10 dB steps)")
    p.add_argument("--noise", choices=["white", "babble", "both"], default="white",
                   help="noise type (default: white)")
    p.add_argument("--noise-file", type=Path, default=None,
                   help="babble recording (default: mix of the corpus's other utterances)")

    p = sub.add_parser("synth", parents=[run], help="write synthetic speech/EGG/truth triples")
    p.add_argument("--count", type=int, default=1, help="number of utterances (default: 1)")
    p.add_argument("--f0", type=float, default=100.0, help="constant f0 in Hz for a single utterance")
    p.add_argument("--f0-range", type=parse_range, default=None,
                   help="corpus f0 range lo:hi in Hz (default: 60:300 when --count > 1)")
    p.add_argument("--duration", type=float, default=1.0, help="seconds per utterance (default: 1.0)")
    p.add_argument("--open-quotient", type=float, default=0.5, help="open phase share of a period")
    p.add_argument("--jitter", type=float, default=0.0, help="relative period perturbation")
    p.add_argument("--shimmer", type=float, default=0.0, help="relative amplitude perturbation")
    p.add_argument("--invert", action="store_true", help="flip the speech polarity")
    return parser


def _ms(v: Optional[float]) -> Optional[float]:
    return None if v is None else v / 1000.0


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """Validated RunConfig; raises pydantic.ValidationError on bad values."""
    values: Dict = {"subcommand": args.subcommand, "seed": args.seed, "jobs": args.jobs,
                    "channel": args.channel, "resample": args.resample, "output_dir": args.output_dir}
    if args.subcommand != "synth":
        values["detector"] = DetectorConfig(
            lp=LpConfig(order=args.order, frame_len=_ms(args.frame_len_ms),
                        frame_shift=_ms(args.frame_shift_ms), window=args.lp_window,
                        preemphasis=args.preemphasis),
            mean=MeanSignalConfig(window_factor=args.window_factor, t0_mean=_ms(args.t0_mean_ms),
                                  extremum_spacing=args.extremum_spacing),
            polarity=args.polarity,
            gci_margin=_ms(args.gci_margin_ms),
            goi_margin=_ms(args.margin_ms),
        )
    if args.subcommand == "detect":
        values.update(inputs=args.inputs, gci_only=args.gci_only, goi_only=args.goi_only,
                      event_format=args.event_format, dump_mean_signal=args.dump_mean_signal,
                      dump_residual=args.dump_residual)
    elif args.subcommand == "evaluate":
        values.update(manifest=args.manifest, bin_width=_ms(args.bin_width_ms))
    elif args.subcommand == "sweep-window":
        values.update(manifest=args.manifest, factors=args.factors)
    elif args.subcommand == "sweep-noise":
        values.update(manifest=args.manifest, snrs_db=args.snrs, noise=args.noise,
                      noise_file=args.noise_file)
    else:
        values.update(
            synth=SynthSpec(f0_contour=[(0.0, args.f0)], open_quotient=args.open_quotient,
                            jitter=args.jitter, shimmer=args.shimmer, duration=args.duration,
                            invert=args.invert, seed=args.seed),
            synth_count=args.count,
            f0_range=args.f0_range,
        )
    return RunConfig(**values)


# =============================================================================
# Subcommands
# =============================================================================

def _banner(title: str) -> None:
    print("\n" + "=" * 60)
    print(title)
    print("=" * 60)


def _out_dir(config: RunConfig) -> Path:
    return config.output_dir if config.output_dir is not None else get_settings().output_dir


def _write_summary(path: Path, name: str, results: List[Dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump({
            "run": name,
            "total": len(results),
            "successful": sum(1 for r in results if r.get("status") == "ok"),
            "failed": sum(1 for r in results if r.get("status") == "error"),
            "completed_at": datetime.now().isoformat(),
            "results": results,
        }, f, indent=2, default=str)


def run_detect(config: RunConfig) -> None:
    _banner("GCI/GOI DETECTION")
    cfg = config.detector
    failed = []
    for i, path in enumerate(config.inputs, 1):
        print(f"\n[{i}/{len(config.inputs)}] {path.name}")
        try:
            x = ensure_rate(load_wav(path, config.channel), config.resample)
            det = run_detector(x, cfg)
        except GciDetectError as e:
            print(f"   ✗ {e}")
            failed.append(str(path))
            continue

        base = (config.output_dir or path.parent) / path.stem
        suffix = "csv" if config.event_format == "csv" else "jsonl"
        write = write_events_csv if config.event_format == "csv" else write_events_jsonl
        if not config.goi_only:
            write(Path(f"{base}.gci.{suffix}"), det.gcis)
        if not config.gci_only:
            write(Path(f"{base}.goi.{suffix}"), det.gois)
        if config.dump_mean_signal:
            lo, hi = det.reliable_span
            write_signal_csv(Path(f"{base}.mean.csv"), det.mean_signal,
                             note=f"edge_unreliable: index < {lo} or index >= {hi}")
            write_intervals_csv(Path(f"{base}.intervals.csv"),
                                det.gci_intervals + det.goi_intervals, x.sample_rate)
        if config.dump_residual:
            save_wav(Path(f"{base}.residual.wav"), det.residual.signal, subtype="FLOAT")

        print(f"   ✓ {len(det.gcis)} GCIs, {len(det.gois)} GOIs "
              f"(T0,mean {det.t0_mean * 1000:.2f} ms, polarity {det.polarity})")
        for note in det.diagnostics:
            print(f"   ⚠ {note}")

    if failed:
        raise GciDetectError(f"{len(failed)} of {len(config.inputs)} inputs failed", fields=failed)


def run_evaluate(config: RunConfig) -> None:
    _banner("GCI/GOI EVALUATION")
    out = _out_dir(config)
    utterances = load_manifest(config.manifest)
    print(f"Utterances: {len(utterances)}")
    print(f"Output directory: {out}")

    results = evaluate_corpus(utterances, config.detector, config.channel, config.resample,
                              config.jobs, progress=True)

    statuses = []
    for i, r in enumerate(results, 1):
        name = r["utterance"]
        if r["status"] != "ok":
            print(f"[{i}/{len(results)}] {name}: ✗ {r['error']}")
            statuses.append({"utterance": name, "status": "error", "error": r["error"]})
            continue
        gci = r["gci"]
        print(f"[{i}/{len(results)}] {name}: IDR {gci.idr * 100:.2f}%  IDA {gci.ida * 1000:.3f} ms")
        write_report_json(out / "reports" / f"{name}.gci.json", gci)
        write_events_csv(out / "events" / f"{name}.gci.csv", r["gcis"])
        write_events_csv(out / "events" / f"{name}.goi.csv", r["gois"])
        if r["goi"] is not None:
            write_report_json(out / "reports" / f"{name}.goi.json", r["goi"])
        statuses.append({"utterance": name, "speaker": r["speaker"], "status": "ok",
                         "gci_idr": gci.idr, "n_cycles": gci.n_cycles})

    rows = summarize(results)
    if not rows:
        raise EvaluationError("no utterance could be evaluated", fields=["manifest"])
    write_summary_csv(out / "summary.csv", rows)
    for row in rows:
        if row["speaker"] != "ALL":
            continue
        kind = row["event"].lower()
        write_report_json(out / f"report_{kind}.json", row["report"])
        write_histogram_csv(out / f"histogram_{kind}.csv",
                            histogram(row["report"].errors, config.bin_width))
    _write_summary(out / "evaluate_summary.json", "evaluate", statuses)

    _banner("SUMMARY")
    print(f"{'speaker':<10} {'event':<5} {'IDR%':>7} {'MR%':>6} {'FAR%':>6} {'IDA ms':>7} {'acc025%':>8}")
    for row in rows:
        print(f"{row['speaker']:<10} {row['event']:<5} {row['idr'] * 100:7.2f} {row['mr'] * 100:6.2f} "
              f"{row['far'] * 100:6.2f} {row['ida_ms']:7.3f} {row['acc025'] * 100:8.2f}")
        if row["speaker"] == "ALL" and row["event"] == "GOI":
            within = fraction_within(row["report"].errors, 0.001)
            print(f"{'':<10} GOIs with |error| < 1 ms: {within * 100:.1f}%")
    print(f"\n📁 Reports saved to: {out}")


def _print_sweep(rows: Sequence[SweepRow]) -> None:
    for r in rows:
        label = f"{r.noise_kind or '':<7}" if r.parameter == "snr_db" else ""
        print(f"{label}{r.parameter}={r.value:>7.2f}  1-IDR {r.misidentification * 100:6.2f}%  "
              f"MR {r.mr * 100:5.2f}%  FAR {r.far * 100:5.2f}%")


def run_sweep_window(config: RunConfig) -> None:
    _banner("WINDOW-LENGTH SWEEP")
    out = _out_dir(config)
    items, statuses = load_corpus(load_manifest(config.manifest), config.detector, config.channel,
                                  config.resample, config.jobs, progress=True)
    if not items:
        raise EvaluationError("no usable utterance in manifest", fields=["manifest"])
    factors = config.factors or DEFAULT_FACTORS
    rows = sweep_window(items, factors, config.detector, config.jobs, progress=True)
    if not rows:
        raise EvaluationError("every sweep point failed", fields=["factors"])
    write_sweep_csv(out / "sweep_window.csv", rows)
    _write_summary(out / "sweep_window_summary.json", "sweep-window", statuses)
    _print_sweep(rows)
    best = min(rows, key=lambda r: (r.misidentification, r.value))
    print(f"\nLowest misidentification at factor {best.value:.2f}")


def run_sweep_noise(config: RunConfig) -> None:
    _banner("NOISE-ROBUSTNESS SWEEP")
    out = _out_dir(config)
    items, statuses = load_corpus(load_manifest(config.manifest), config.detector, config.channel,
                                  config.resample, config.jobs, progress=True)
    if not items:
        raise EvaluationError("no usable utterance in manifest", fields=["manifest"])
    noise = None
    if config.noise_file is not None:
        noise = ensure_rate(load_wav(config.noise_file, config.channel), config.resample)

    kinds = ["white", "babble"] if config.noise == "both" else [config.noise]
    rows: List[SweepRow] = []
    for kind in kinds:
        rows += sweep_noise(items, kind, config.snrs_db or DEFAULT_SNRS, config.detector,
                            seed=config.seed, noise=noise, jobs=config.jobs, progress=True,
                            clean_baseline=True)
    if not rows:
        raise EvaluationError("every sweep point failed", fields=["snrs_db"])
    write_sweep_csv(out / "sweep_noise.csv", rows, note=f"snr_reference: {SNR_REFERENCE}")
    _write_summary(out / "sweep_noise_summary.json", "sweep-noise", statuses)
    _print_sweep(rows)


def run_synth(config: RunConfig) -> None:
    _banner("SYNTHETIC CORPUS")
    out = _out_dir(config)
    spec = config.synth
    out.mkdir(parents=True, exist_ok=True)
    if config.synth_count > 1 or config.f0_range is not None:
        specs = synth_corpus(config.synth_count, config.seed, config.f0_range or DEFAULT_F0_RANGE,
                             duration=spec.duration, jitter=spec.jitter, shimmer=spec.shimmer,
                             open_quotient=spec.open_quotient)
        specs = [s.model_copy(update={"invert": spec.invert}) for s in specs]
    else:
        specs = [spec]

    manifest, truth_manifest = [], []
    for i, s in enumerate(specs):
        name = f"synth_{i:03d}"
        print(f"[{i + 1}/{len(specs)}] {name}  f0 {s.f0_contour[0][1]:.1f}->{s.f0_contour[-1][1]:.1f} Hz")
        speech, egg, truth = synthesize(s)
        save_wav(out / f"{name}.wav", speech)
        save_wav(out / f"{name}.egg.wav", egg)
        events = sorted(truth.gcis + truth.gois, key=lambda e: (e.index, e.kind))
        write_events_csv(out / f"{name}.truth.csv", events)
        manifest.append(f"{name}.wav,{name}.egg.wav,,synth")
        truth_manifest.append(f"{name}.wav,{name}.truth.csv,,synth")

    (out / "manifest.txt").write_text("\n".join(manifest) + "\n")
    (out / "manifest_truth.txt").write_text("\n".join(truth_manifest) + "\n")
    print(f"\n📁 {len(specs)} triples saved to: {out}")


HANDLERS = {
    "detect": run_detect,
    "evaluate": run_evaluate,
    "sweep-window": run_sweep_window,
    "sweep-noise": run_sweep_noise,
    "synth": run_synth,
}


# =============================================================================
# Entry points
# =============================================================================

def _emit_error(kind: str, message: str, fields: Sequence[str]) -> None:
    print(json.dumps({"error": kind, "message": message, "fields": list(fields)}), file=sys.stderr)


def _validation_fields(e: ValidationError) -> List[str]:
    return [".".join(str(p) for p in err["loc"]) or "config" for err in e.errors()]


def run(config: RunConfig) -> int:
    """
    Execute one subcommand.

    Returns:
        0 on success, 1 on runtime failure, 2 on configuration errors; failures
        print one JSON object {"error", "message", "fields"} to stderr
    """
    try:
        HANDLERS[config.subcommand](config)
        return 0
    except ValidationError as e:
        _emit_error("ValidationError", str(e), _validation_fields(e))
        return 2
    except ConfigError as e:
        _emit_error(type(e).__name__, str(e), e.fields)
        return 2
    except GciDetectError as e:
        _emit_error(type(e).__name__, str(e), e.fields)
        return 1
    except OSError as e:
        _emit_error("OSError", str(e), [str(e.filename)] if e.filename else [])
        return 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        config = config_from_args(args)
    except ValidationError as e:
        _emit_error("ValidationError", str(e), _validation_fields(e))
        return 2
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
