"""Streaming metrics computed from chunk-arrival traces.

A trace is the list of audio chunks a TTS stream produced, each with the
time it became available and the seconds of audio it holds. Every row of
the inference tables (first-chunk latency, RTF, inter-chunk statistics,
chunks per second) is a function of that list, as is playback underrun.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np


class TraceFormatError(ValueError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        prefix = f"line {lineno}: " if lineno is not None else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class ChunkEvent:
    arrival_s: float
    audio_duration_s: float

    def __post_init__(self):
        if not self.arrival_s >= 0:
            raise ValueError(f"arrival must be >= 0, got {self.arrival_s}")
        if not self.audio_duration_s > 0:
            raise ValueError(f"audio duration must be > 0, got {self.audio_duration_s}")


@dataclass(frozen=True)
class StreamTrace:
    events: tuple[ChunkEvent, ...]
    generation_end_s: float

    def __post_init__(self):
        events = tuple(self.events)
        object.__setattr__(self, "events", events)
        for a, b in zip(events, events[1:]):
            if b.arrival_s < a.arrival_s:
                raise ValueError("chunk arrivals must be in time order")
        if events and self.generation_end_s < events[-1].arrival_s:
            raise ValueError("generation_end_s precedes the last chunk")
        if self.generation_end_s < 0:
            raise ValueError("generation_end_s must be >= 0")

    @classmethod
    def from_pairs(cls, pairs, generation_end_s: float | None = None) -> "StreamTrace":
        events = tuple(ChunkEvent(float(a), float(d)) for a, d in pairs)
        if generation_end_s is None:
            generation_end_s = events[-1].arrival_s if events else 0.0
        return cls(events, generation_end_s)

    @property
    def arrivals(self) -> np.ndarray:
        return np.array([e.arrival_s for e in self.events])

    @property
    def durations(self) -> np.ndarray:
        return np.array([e.audio_duration_s for e in self.events])

    @property
    def total_audio_s(self) -> float:
        return float(sum(e.audio_duration_s for e in self.events))

    def shifted(self, offset_s: float) -> "StreamTrace":
        return StreamTrace(
            tuple(ChunkEvent(e.arrival_s + offset_s, e.audio_duration_s) for e in self.events),
            self.generation_end_s + offset_s,
        )

    def to_text(self) -> str:
        lines = [f"# generation_end_s={self.generation_end_s!r}"]
        lines += [f"{e.arrival_s!r} {e.audio_duration_s!r}" for e in self.events]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "StreamTrace":
        """Parse the line format written by :meth:`to_text`.

        Floats are written with ``repr`` so a write/parse round trip is exact.
        """
        end = None
        pairs = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("generation_end_s="):
                    try:
                        end = float(body.split("=", 1)[1])
                    except ValueError:
                        raise TraceFormatError("bad generation_end_s value", lineno) from None
                continue
            parts = line.split()
            if len(parts) != 2:
                raise TraceFormatError(f"expected 'arrival_s audio_duration_s', got {line!r}", lineno)
            try:
                pairs.append(ChunkEvent(float(parts[0]), float(parts[1])))
            except ValueError as exc:
                raise TraceFormatError(str(exc), lineno) from None
        if end is None:
            raise TraceFormatError("missing '# generation_end_s=<v>' header")
        try:
            return cls(tuple(pairs), end)
        except ValueError as exc:
            raise TraceFormatError(str(exc)) from None


def _require_events(t: StreamTrace, n: int = 1) -> None:
    if len(t.events) < n:
        raise ValueError(f"trace needs at least {n} chunk event(s), has {len(t.events)}")


def first_chunk_latency(t: StreamTrace) -> float:
    """Arrival of the first chunk, in milliseconds."""
    _require_events(t)
    return t.events[0].arrival_s * 1000.0


def rtf(t: StreamTrace) -> float:
    """Generation time over audio produced; below 1 means faster than real time."""
    _require_events(t)
    audio = t.total_audio_s
    if audio <= 0:
        raise ValueError("trace holds no audio")
    return t.generation_end_s / audio


def inter_chunk_stats(t: StreamTrace) -> tuple[float, float, float]:
    """(avg, min, max) gap between consecutive arrivals, in milliseconds."""
    _require_events(t, 2)
    gaps = np.diff(t.arrivals) * 1000.0
    return float(gaps.mean()), float(gaps.min()), float(gaps.max())


def chunks_per_second(t: StreamTrace) -> float:
    _require_events(t)
    if t.generation_end_s <= 0:
        raise ValueError("trace has zero duration")
    return len(t.events) / t.generation_end_s


def underrun_report(t: StreamTrace) -> list[tuple[int, float]]:
    """Chunks that arrive after the player has drained everything before them.

    Playback starts the moment chunk 0 arrives and there is no device buffer,
    so chunk ``i`` is late when it lands after ``arrival[0] + sum(duration[:i])``.
    Returns ``(chunk_index, gap_s)`` for each late chunk.
    """
    _require_events(t)
    start = t.events[0].arrival_s
    played = 0.0
    late = []
    for i, ev in enumerate(t.events):
        if i > 0:
            due = start + played
            if ev.arrival_s > due:
                late.append((i, ev.arrival_s - due))
        played += ev.audio_duration_s
    return late


@dataclass(frozen=True)
class LatencyReport:
    first_chunk_latency_ms: float
    rtf: float
    n_chunks: int
    avg_chunk_size_ms: float
    avg_inter_chunk_latency_ms: float | None
    min_inter_chunk_latency_ms: float | None
    max_inter_chunk_latency_ms: float | None
    chunks_per_second: float | None
    underrun_count: int

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        names = [f.name for f in fields(self)]
        writer.writerow(names)
        writer.writerow(["" if getattr(self, n) is None else getattr(self, n) for n in names])
        return buf.getvalue()

    def table_rows(self) -> list[tuple[str, float | int | None]]:
        """(label, value) pairs in the row order of the RVQ-iteration tables."""
        values = (
            self.first_chunk_latency_ms,
            self.rtf,
            self.n_chunks,
            self.avg_chunk_size_ms,
            self.avg_inter_chunk_latency_ms,
            self.min_inter_chunk_latency_ms,
            self.max_inter_chunk_latency_ms,
            self.chunks_per_second,
        )
        return list(zip(TABLE_ROW_LABELS, values))


# labels as printed in the CPU RVQ-iteration table
TABLE_ROW_LABELS: Sequence[str] = (
    "First Chunk Latency (ms)",
    "Real-Time Factor (RTF)",
    "Number of Chunks",
    "Avg. Chunk Size",
    "Avg. Inter-Chunk Latency (ms)",
    "Min Inter-Chunk Latency (ms)",
    "Max Inter-Chunk Latency (ms)",
    "Chunks per Second",
)


def summarize(t: StreamTrace) -> LatencyReport:
    """All metrics at once; rounding happens only here, after full-precision math."""
    _require_events(t)
    if len(t.events) >= 2:
        avg, lo, hi = (round(v, 1) for v in inter_chunk_stats(t))
    else:
        avg = lo = hi = None
    cps = round(chunks_per_second(t), 2) if t.generation_end_s > 0 else None
    return LatencyReport(
        first_chunk_latency_ms=round(first_chunk_latency(t), 1),
        rtf=round(rtf(t), 3),
        n_chunks=len(t.events),
        avg_chunk_size_ms=round(1000.0 * t.total_audio_s / len(t.events), 1),
        avg_inter_chunk_latency_ms=avg,
        min_inter_chunk_latency_ms=lo,
        max_inter_chunk_latency_ms=hi,
        chunks_per_second=cps,
        underrun_count=len(underrun_report(t)),
    )
