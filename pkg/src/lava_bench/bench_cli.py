"""Command-line harness: pipeline runs, RVQ sweeps, trace/SNR/endpoint analysis.

Exit codes: 0 success, 1 runtime stage failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .endpointing import EndpointConfig, NoSpeechError, detect_endpoint
from .latency_metrics import TABLE_ROW_LABELS, StreamTrace, TraceFormatError, summarize, underrun_report
from .quality_metrics import SilentSignalError, reference_snr, wada_snr
from .rvq_codec import CodebookSet, Padding, RvqConfig
from .signal_core import Waveform, WavFormatError, read_wav
from .stream_pipeline import ConfigError, Mode, PipelineConfig, StageError, run_pipeline
from .synth_stages import (
    DEFAULT_DIM,
    LatencyModel,
    default_codebooks,
    synth_tts,
    text_of_length,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

PIPELINE_SCHEMA = "lava-bench/pipeline/v1"
SWEEP_SCHEMA = "lava-bench/sweep/v1"
TRACE_SCHEMA = "lava-bench/trace-report/v1"
SEED_ENV = "LAVA_BENCH_SEED"

SWEEP_CONFIG_LABELS = {
    Padding.NONE: "n Mimi Codebooks",
    Padding.MEAN: "32 Mimi Codebooks + Mean Pad",
    Padding.CONCAT: "32 Mimi Codebooks + Concat Pad",
}
SNR_ROW = "SNR (dB)"
WADA_ROW = "WADA-SNR (dB)"
WADA_CHUNK_ROW = "WADA-SNR per-chunk mean (dB)"

_ROW_DECIMALS = {
    "First Chunk Latency (ms)": 1,
    "Real-Time Factor (RTF)": 3,
    "Number of Chunks": 0,
    "Avg. Chunk Size": 1,
    "Avg. Inter-Chunk Latency (ms)": 1,
    "Min Inter-Chunk Latency (ms)": 1,
    "Max Inter-Chunk Latency (ms)": 1,
    "Chunks per Second": 2,
    SNR_ROW: 3,
    WADA_ROW: 3,
    WADA_CHUNK_ROW: 3,
}


class UsageError(Exception):
    pass


def _fmt(value, decimals: int) -> str:
    if value is None:
        return ""
    if decimals == 0:
        return str(int(round(value)))
    return f"{value:.{decimals}f}"


def resolve_seed(explicit: int | None, default: int = 0) -> int:
    if explicit is not None:
        return explicit
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return default
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _read_file(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None


def _load_wav(path: str) -> Waveform:
    try:
        return read_wav(_read_file(path))
    except WavFormatError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _rvq_from_flags(base: RvqConfig, q, padding, decoder, n_stages: int) -> RvqConfig:
    q = base.q_iterations if q is None else q
    padding = base.padding if padding is None else Padding(padding)
    if decoder is None:
        # padding widens to the full trained depth unless told otherwise
        decoder = q if padding is Padding.NONE else n_stages
    try:
        return RvqConfig(q, decoder, padding)
    except ValueError as exc:
        raise UsageError(f"rvq flags: {exc}") from None


# ---------------------------------------------------------------- pipeline


def cmd_pipeline(args) -> int:
    if args.config:
        try:
            cfg = PipelineConfig.from_json(_read_file(args.config).decode("utf-8"))
        except ConfigError as exc:
            raise UsageError(f"config {args.config}: {exc}") from None
    else:
        cfg = PipelineConfig()
    w = _load_wav(args.wav)
    overrides = {"seed": resolve_seed(args.seed, cfg.seed)}
    if args.clock:
        overrides["clock"] = args.clock
    if any(v is not None for v in (args.q, args.padding, args.decoder_codebooks)):
        overrides["rvq"] = _rvq_from_flags(cfg.rvq, args.q, args.padding, args.decoder_codebooks, cfg.n_stages)
    try:
        cfg = replace(cfg, **overrides)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    modes = [Mode.ONESHOT, Mode.STREAMING] if args.mode == "both" else [Mode(args.mode or cfg.mode)]
    runs = {}
    for mode in modes:
        try:
            result = run_pipeline(w, replace(cfg, mode=mode))
        except NoSpeechError as exc:
            raise UsageError(f"{args.wav}: {exc}") from None
        except ConfigError as exc:
            raise UsageError(str(exc)) from None
        runs[mode.value] = {
            "profile": result.profile.to_dict(),
            "report": summarize(result.trace).to_dict(),
            "endpoint_s": result.endpoint_s,
            "n_segments": len(result.segments),
        }
    doc = {"schema": PIPELINE_SCHEMA, "clock": cfg.clock.value, "seed": cfg.seed, "runs": runs}
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------- sweep


@dataclass
class SweepSpec:
    """Axes and fixed settings of an RVQ-iteration sweep."""

    q_values: list[int] = field(default_factory=lambda: [16, 20, 24, 32])
    paddings: list[Padding] = field(default_factory=lambda: [Padding.NONE, Padding.MEAN, Padding.CONCAT])
    texts: list[tuple[str, str]] = field(
        default_factory=lambda: [("short-151", text_of_length(151)), ("long-451", text_of_length(451))]
    )
    repetitions: int = 1
    decoder_codebooks: int = 32
    chunk_frames: int = 50
    tts_model: LatencyModel = field(default_factory=lambda: LatencyModel(0.0, 2.0e-5))
    seed: int = 0
    clock: str = "virtual"
    out: str | None = None

    def check(self, codebooks: CodebookSet) -> None:
        if not self.q_values:
            raise UsageError("sweep needs at least one q value")
        for q in self.q_values:
            if not 1 <= q <= codebooks.n_stages:
                raise UsageError(f"q={q} outside [1, {codebooks.n_stages}] trained stages")
        if self.decoder_codebooks > codebooks.n_stages:
            raise UsageError(f"decoder width {self.decoder_codebooks} exceeds trained stages")
        if self.repetitions < 1:
            raise UsageError("repetitions must be >= 1")


def parse_text_arg(arg: str) -> tuple[str, str]:
    """``label=151`` picks a 151-character text; ``label:literal text`` is used verbatim."""
    if "=" in arg and arg.split("=", 1)[1].isdigit():
        label, n = arg.split("=", 1)
        return label, text_of_length(int(n))
    if ":" in arg:
        label, text = arg.split(":", 1)
        if not text:
            raise UsageError(f"empty text in {arg!r}")
        return label, text
    raise UsageError(f"text spec {arg!r} must be 'label=N' or 'label:text'")


def run_sweep(spec: SweepSpec, codebooks: CodebookSet) -> str:
    """Sweep CSV: one column per q; latency rows, then SNR rows per decoder config."""
    spec.check(codebooks)
    rows: list[list[str]] = []
    for label, text in spec.texts:
        per_cfg: dict[Padding, dict[int, dict[str, float | None]]] = {}
        for padding in spec.paddings:
            per_cfg[padding] = {}
            for q in spec.q_values:
                if padding is Padding.NONE:
                    rvq = RvqConfig(q)
                elif q < spec.decoder_codebooks:
                    rvq = RvqConfig(q, spec.decoder_codebooks, padding)
                else:
                    continue
                metrics = []
                for _ in range(spec.repetitions):
                    res = synth_tts([text], codebooks, rvq, spec.chunk_frames, spec.tts_model, spec.seed, clock=spec.clock)
                    report = summarize(res.trace)
                    m: dict[str, float | None] = dict(report.table_rows())
                    m[SNR_ROW] = reference_snr(res.reference_audio, res.audio)
                    m[WADA_ROW] = wada_snr(res.audio)
                    m[WADA_CHUNK_ROW] = float(np.mean([wada_snr(c.audio) for c in res.chunks]))
                    metrics.append(m)
                per_cfg[padding][q] = {
                    k: None if any(x[k] is None for x in metrics) else float(np.mean([x[k] for x in metrics]))
                    for k in metrics[0]
                }

        def emit(metric: str, padding: Padding):
            cells = []
            for q in spec.q_values:
                m = per_cfg[padding].get(q)
                cells.append("" if m is None else _fmt(m[metric], _ROW_DECIMALS[metric]))
            rows.append([metric, label, SWEEP_CONFIG_LABELS[padding], *cells])

        latency_cfg = Padding.NONE if Padding.NONE in per_cfg else spec.paddings[0]
        for metric in TABLE_ROW_LABELS:
            emit(metric, latency_cfg)
        for padding in spec.paddings:
            for metric in (SNR_ROW, WADA_ROW, WADA_CHUNK_ROW):
                emit(metric, padding)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["schema", SWEEP_SCHEMA])
    writer.writerow(["Metric (RVQ Iterations)", "Text", "Configuration", *map(str, spec.q_values)])
    writer.writerows(rows)
    return buf.getvalue()


def cmd_sweep(args) -> int:
    seed = resolve_seed(args.seed)
    if args.codebooks:
        try:
            codebooks = CodebookSet.from_bytes(_read_file(args.codebooks))
        except ValueError as exc:
            raise UsageError(f"{args.codebooks}: {exc}") from None
    else:
        codebooks = default_codebooks(DEFAULT_DIM, 32, 64, seed)
    spec = SweepSpec(seed=seed, clock=args.clock or "virtual", out=args.out)
    if args.q:
        spec.q_values = args.q
    if args.padding:
        spec.paddings = [Padding(p) for p in args.padding]
    if args.text:
        spec.texts = [parse_text_arg(t) for t in args.text]
    if args.repetitions is not None:
        spec.repetitions = args.repetitions
    if args.decoder_codebooks is not None:
        spec.decoder_codebooks = args.decoder_codebooks
    if args.chunk_frames is not None:
        if args.chunk_frames < 1:
            raise UsageError("--chunk-frames must be >= 1")
        spec.chunk_frames = args.chunk_frames
    text = run_sweep(spec, codebooks)
    if spec.out:
        with open(spec.out, "w", newline="") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------- analysis


def cmd_trace(args) -> int:
    try:
        trace = StreamTrace.from_text(_read_file(args.trace).decode("utf-8"))
        report = summarize(trace)
    except TraceFormatError as exc:
        raise UsageError(f"{args.trace}: {exc}") from None
    except ValueError as exc:
        raise UsageError(f"{args.trace}: {exc}") from None
    late = underrun_report(trace)
    if args.format == "csv":
        sys.stdout.write(report.to_csv())
    else:
        doc = {
            "schema": TRACE_SCHEMA,
            "report": report.to_dict(),
            "underruns": [{"chunk_index": i, "gap_s": round(g, 6)} for i, g in late],
        }
        sys.stdout.write(json.dumps(doc, indent=2) + "\n")
    for i, gap in late:
        print(f"underrun: chunk {i} arrived {gap * 1000:.1f} ms after the queue drained", file=sys.stderr)
    return EXIT_OK


def cmd_snr(args) -> int:
    w = _load_wav(args.wav)
    out = {}
    try:
        out["wada_snr_db"] = round(wada_snr(w), 3)
        if args.reference:
            ref = _load_wav(args.reference)
            out["reference_snr_db"] = round(reference_snr(ref, w), 3)
    except SilentSignalError as exc:
        raise UsageError(f"{args.wav}: {exc}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    sys.stdout.write(json.dumps(out) + "\n")
    return EXIT_OK


def cmd_endpoint(args) -> int:
    w = _load_wav(args.wav)
    try:
        cfg = EndpointConfig(
            frame_ms=args.frame_ms,
            energy_threshold_db=args.threshold_db,
            silence_window_s=args.silence_window,
            noise_floor_frames=args.noise_floor_frames,
        )
        t = detect_endpoint(w, cfg)
    except ValueError as exc:
        raise UsageError(f"{args.wav}: {exc}") from None
    print("none" if t is None else f"{t:.3f}")
    return EXIT_OK


def cmd_train(args) -> int:
    seed = resolve_seed(args.seed)
    cb = default_codebooks(args.dim, args.stages, args.codebook_size, seed)
    Path(args.out).write_bytes(cb.to_bytes())
    print(f"wrote {args.out}: {cb.n_stages} stages x {cb.codebook_size} x {cb.dim}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lava-bench", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def rvq_flags(sp):
        sp.add_argument("--q", type=int, help="RVQ iterations")
        sp.add_argument("--padding", choices=[m.value for m in Padding])
        sp.add_argument("--decoder-codebooks", type=int)
        sp.add_argument("--seed", type=int, help=f"defaults to ${SEED_ENV}, then 0")

    sp = sub.add_parser("pipeline", help="run the VAD/ASR/LLM/TTS pipeline on a WAV file")
    sp.add_argument("wav")
    sp.add_argument("--config", help="PipelineConfig JSON document")
    sp.add_argument("--mode", choices=["oneshot", "streaming", "both"])
    sp.add_argument("--clock", choices=["virtual", "wall"])
    sp.add_argument("--out")
    rvq_flags(sp)
    sp.set_defaults(func=cmd_pipeline)

    sp = sub.add_parser("sweep", help="sweep RVQ iterations and padding, emit CSV")
    sp.add_argument("--q", type=int, nargs="+")
    sp.add_argument("--padding", nargs="+", choices=[m.value for m in Padding])
    sp.add_argument("--decoder-codebooks", type=int)
    sp.add_argument("--text", action="append", help="'label=N' or 'label:literal text'; repeatable")
    sp.add_argument("--repetitions", type=int)
    sp.add_argument("--chunk-frames", type=int)
    sp.add_argument("--codebooks", help="codebook file from 'train'")
    sp.add_argument("--clock", choices=["virtual", "wall"])
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("trace", help="summarize a chunk trace file")
    sp.add_argument("trace")
    sp.add_argument("--format", choices=["json", "csv"], default="json")
    sp.set_defaults(func=cmd_trace)

    sp = sub.add_parser("snr", help="blind WADA-SNR, plus reference SNR if given")
    sp.add_argument("wav")
    sp.add_argument("reference", nargs="?")
    sp.set_defaults(func=cmd_snr)

    defaults = EndpointConfig()
    sp = sub.add_parser("endpoint", help="end-of-speech time of a WAV file")
    sp.add_argument("wav")
    sp.add_argument("--frame-ms", type=int, default=defaults.frame_ms)
    sp.add_argument("--threshold-db", type=float, default=defaults.energy_threshold_db)
    sp.add_argument("--silence-window", type=float, default=defaults.silence_window_s)
    sp.add_argument("--noise-floor-frames", type=int, default=defaults.noise_floor_frames)
    sp.set_defaults(func=cmd_endpoint)

    sp = sub.add_parser("train", help="train and save default codebooks")
    sp.add_argument("--out", required=True)
    sp.add_argument("--dim", type=int, default=DEFAULT_DIM)
    sp.add_argument("--stages", type=int, default=32)
    sp.add_argument("--codebook-size", type=int, default=64)
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_train)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"lava-bench: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        print(f"lava-bench: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
