"""Deterministic stand-ins for the ASR, LLM and TTS stages.

None of these stages runs a neural model. Their *content* is derived from
content hashes (so identical inputs give identical outputs) and their
*timing* comes from an affine :class:`LatencyModel`. The TTS stand-in does
run real residual quantization: characters are embedded as frames, pushed
through the RVQ codec at the configured number of iterations, and the
decoded frame values are emitted directly as audio samples.
"""

from __future__ import annotations

import hashlib
import re
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .rvq_codec import CodebookSet, RvqConfig, decode, encode, train_codebooks
from .latency_metrics import ChunkEvent, StreamTrace
from .signal_core import DEFAULT_SAMPLE_RATE, Waveform

DEFAULT_DIM = 16
DEFAULT_FRAMES_PER_CHAR = 2
CONTEXT_CHARS = 2

BENCHMARK_SENTENCE = (
    "I am an AI, I am designed to assist and provide helpful responses to your queries. "
    "I am a machine learning model, trained on a vast amount of text data"
)

RESPONSE_BANK = (
    BENCHMARK_SENTENCE + ".",
    "Thanks for reaching out, I can help you track the order you placed last week.",
    "Your refund was issued on Monday and should reach your account within five business days.",
    "I have updated the delivery address, and you will receive a confirmation message shortly.",
    "Could you share the last four digits of the card so I can verify the payment?",
    "The premium plan includes priority support, extra storage, and a monthly usage report.",
    "I understand the frustration, let me escalate this ticket to a senior specialist right away.",
    "Your appointment is confirmed for Thursday at three in the afternoon at the downtown branch.",
)

ASR_WORDS = (
    "hello", "order", "refund", "please", "account", "delivery", "help", "cancel",
    "payment", "status", "yesterday", "ticket", "address", "change", "support", "plan",
    "invoice", "thanks", "when", "where", "my", "the", "is", "a", "can", "you",
    "check", "update", "number", "card", "late", "today",
)

# speaking-rate assumption for the pseudo transcript length
_ASR_WORDS_PER_S = 2.5

_TOKEN_RE = re.compile(r"\s*\S+")


@dataclass(frozen=True)
class LatencyModel:
    """Affine stage cost: ``fixed_s + per_unit_s * units``.

    A unit is an input second for ASR, a token for the LLM and a
    frame x RVQ-stage for TTS. The first ``warmup_runs`` invocations of a
    stage also pay ``warmup_s`` (cold start).
    """

    fixed_s: float = 0.0
    per_unit_s: float = 0.0
    warmup_runs: int = 2
    warmup_s: float = 0.0

    def __post_init__(self):
        for name in ("fixed_s", "per_unit_s", "warmup_s"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.warmup_runs < 0:
            raise ValueError("warmup_runs must be >= 0")

    def cost(self, units: float, run_index: int | None = None) -> float:
        c = self.fixed_s + self.per_unit_s * units
        if run_index is not None and run_index < self.warmup_runs:
            c += self.warmup_s
        return c


def _digest(*parts) -> bytes:
    h = hashlib.blake2b(digest_size=32)
    for p in parts:
        if isinstance(p, str):
            p = p.encode("utf-8")
        elif isinstance(p, int):
            p = p.to_bytes(8, "little", signed=True)
        h.update(len(p).to_bytes(4, "little"))
        h.update(p)
    return h.digest()


def _hash_int(*parts) -> int:
    return int.from_bytes(_digest(*parts)[:8], "little")


def waveform_digest(w: Waveform) -> bytes:
    return _digest(w.samples.astype("<f8").tobytes(), int(w.sample_rate_hz))


# ---------------------------------------------------------------- ASR


def pseudo_transcript(w: Waveform) -> str:
    """Word sequence picked from a fixed list by the waveform's content hash."""
    n_words = max(1, int(round(w.duration_s * _ASR_WORDS_PER_S)))
    rng = np.random.default_rng(int.from_bytes(waveform_digest(w)[:8], "little"))
    return " ".join(ASR_WORDS[i] for i in rng.integers(len(ASR_WORDS), size=n_words))


def synth_asr(
    w: Waveform, model: LatencyModel, clock: str = "virtual", run_index: int | None = None
) -> tuple[str, float]:
    """Transcribe (mock) and report elapsed time.

    In ``virtual`` mode elapsed is the model cost. In ``wall`` mode the model
    cost is slept and the real elapsed time is measured.
    """
    modeled = model.cost(w.duration_s, run_index)
    if clock == "virtual":
        return pseudo_transcript(w), modeled
    if clock != "wall":
        raise ValueError(f"unknown clock {clock!r}")
    t0 = time.perf_counter()
    text = pseudo_transcript(w)
    time.sleep(modeled)
    return text, time.perf_counter() - t0


# ---------------------------------------------------------------- LLM


@dataclass(frozen=True)
class Token:
    text: str
    available_s: float


def tokenize(text: str) -> list[str]:
    """Whitespace-attached word pieces; ``"".join(tokenize(t)) == t`` minus leading space."""
    return _TOKEN_RE.findall(text)


def response_tokens(text: str, context: Sequence[str] = (), seed: int = 0, n_tokens: int | None = None) -> list[str]:
    """Templated reply chosen by hashing the prompt, context and seed.

    Without ``n_tokens`` the reply is two bank sentences; with it, bank
    sentences are cycled and the token list cut to exactly ``n_tokens``.
    """
    start = _hash_int("llm", seed, text, *context) % len(RESPONSE_BANK)
    tokens: list[str] = []
    i = start
    target = 2 if n_tokens is None else None
    while True:
        sentence = RESPONSE_BANK[i % len(RESPONSE_BANK)]
        tokens.extend(tokenize(sentence if not tokens else " " + sentence))
        i += 1
        if target is not None and i - start >= target:
            return tokens
        if n_tokens is not None and len(tokens) >= n_tokens:
            return tokens[:n_tokens]


def synth_llm(
    text: str,
    context: Sequence[str],
    model: LatencyModel,
    stream: bool,
    seed: int = 0,
    n_tokens: int | None = None,
    run_index: int | None = None,
) -> list[Token]:
    """Reply tokens with availability times measured from the request.

    Streaming makes token ``k`` (1-based) available at ``fixed + per_unit*k``;
    one-shot releases every token at ``fixed + per_unit*n``.
    """
    if not text:
        raise ValueError("LLM prompt must be non-empty")
    if n_tokens is not None and n_tokens < 1:
        raise ValueError("n_tokens must be >= 1")
    pieces = response_tokens(text, context, seed, n_tokens)
    warm = model.cost(0, run_index) - model.cost(0)
    if stream:
        return [
            Token(p, model.fixed_s + warm + model.per_unit_s * (k + 1)) for k, p in enumerate(pieces)
        ]
    done = model.cost(len(pieces), run_index)
    return [Token(p, done) for p in pieces]


@dataclass(frozen=True)
class Segment:
    """A run of reply text handed to TTS at ``available_s``."""

    text: str
    available_s: float


def flush_segments(tokens: Sequence[Token], every: int, stream: bool) -> list[Segment]:
    """Group tokens into TTS segments: every ``every`` tokens, or all at once."""
    if every < 1:
        raise ValueError("flush size must be >= 1")
    if not tokens:
        return []
    if not stream:
        return [Segment("".join(t.text for t in tokens), tokens[-1].available_s)]
    out = []
    for i in range(0, len(tokens), every):
        group = tokens[i : i + every]
        out.append(Segment("".join(t.text for t in group), group[-1].available_s))
    return out


# ---------------------------------------------------------------- TTS front end


def _hash_vector(key: bytes, dim: int) -> np.ndarray:
    words = []
    counter = 0
    while len(words) * 16 < dim:
        words.append(hashlib.blake2b(key + counter.to_bytes(4, "little"), digest_size=64).digest())
        counter += 1
    raw = np.frombuffer(b"".join(words), dtype="<u4")[:dim].astype(np.float64)
    return raw / 2.0**31 - 1.0


@lru_cache(maxsize=65536)
def _context_frames(context: str, dim: int, seed: int, frames_per_char: int) -> np.ndarray:
    key = _digest("char", seed, context)
    return np.stack([_hash_vector(key + bytes([j]), dim) for j in range(frames_per_char)])


def char_embed(
    text_segment: str,
    dim: int = DEFAULT_DIM,
    seed: int = 0,
    frames_per_char: int = DEFAULT_FRAMES_PER_CHAR,
    history: str = "",
) -> np.ndarray:
    """Embed characters as ``frames_per_char`` pseudo-random frames each.

    A character's frames depend on the character and the two characters
    before it (taken from ``history`` at a segment start), so a text split
    into segments embeds exactly as the unsplit text does. Values lie in [-1, 1).
    """
    if not text_segment:
        raise ValueError("cannot embed an empty segment")
    full = history[-CONTEXT_CHARS:] + text_segment
    off = len(full) - len(text_segment)
    frames = [
        _context_frames(full[max(0, i - CONTEXT_CHARS) : i + 1], dim, seed, frames_per_char)
        for i in range(off, len(full))
    ]
    return np.concatenate(frames, axis=0)


_EXTRA_TRAINING = (
    "The quick brown fox jumps over the lazy dog while twelve boxing wizards jump quickly.",
    "Please hold on a moment while I look up the details of your booking in our system.",
    "We value your feedback and will use it to improve how our agents answer questions.",
)

TRAINING_TEXT = " ".join(RESPONSE_BANK + _EXTRA_TRAINING)


@lru_cache(maxsize=8)
def default_codebooks(
    dim: int = DEFAULT_DIM, n_stages: int = 32, codebook_size: int = 64, seed: int = 0
) -> CodebookSet:
    """Codebooks trained on embeddings of the built-in reply bank (cached per process)."""
    frames = char_embed(TRAINING_TEXT, dim=dim, seed=seed)
    return train_codebooks(frames, n_stages=n_stages, codebook_size=codebook_size, seed=seed)


def default_chunk_frames(dim: int = DEFAULT_DIM, sample_rate_hz: int = DEFAULT_SAMPLE_RATE) -> int:
    """Frames per chunk giving about 1.5 s of audio."""
    return max(1, int(round(1.5 * sample_rate_hz / dim)))


# ---------------------------------------------------------------- TTS


@dataclass(frozen=True, eq=False)
class AudioChunk:
    index: int
    segment_index: int
    audio: Waveform
    reference: Waveform
    available_s: float
    arrival_s: float
    n_frames: int


@dataclass
class TtsResult:
    chunks: list[AudioChunk]
    trace: StreamTrace
    reference_frames: np.ndarray

    @property
    def audio(self) -> Waveform:
        return Waveform.concat([c.audio for c in self.chunks], DEFAULT_SAMPLE_RATE)

    @property
    def reference_audio(self) -> Waveform:
        return Waveform.concat([c.reference for c in self.chunks], DEFAULT_SAMPLE_RATE)


@dataclass
class TtsFrontEnd:
    """Stateful text-to-frames-to-audio renderer shared by both clocks."""

    codebooks: CodebookSet
    cfg: RvqConfig
    chunk_frames: int
    seed: int = 0
    frames_per_char: int = DEFAULT_FRAMES_PER_CHAR
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE
    history: str = field(default="", init=False)

    def __post_init__(self):
        if self.chunk_frames < 1:
            raise ValueError("chunk_frames must be >= 1")
        self.cfg.check(self.codebooks)

    def render(self, text: str) -> list[tuple[np.ndarray, np.ndarray]]:
        """(decoded, reference) frame blocks of at most ``chunk_frames`` rows."""
        ref = char_embed(
            text, self.codebooks.dim, self.seed, self.frames_per_char, history=self.history
        )
        self.history = (self.history + text)[-CONTEXT_CHARS:]
        out = decode(encode(ref, self.codebooks, self.cfg), self.codebooks)
        step = self.chunk_frames
        return [(out[i : i + step], ref[i : i + step]) for i in range(0, len(ref), step)]

    def to_audio(self, frames: np.ndarray) -> Waveform:
        # each frame's D values become D consecutive samples
        return Waveform(frames.reshape(-1), self.sample_rate_hz)


def synth_tts(
    segments: Iterable,
    codebooks: CodebookSet,
    cfg: RvqConfig,
    chunk_frames: int,
    model: LatencyModel,
    seed: int = 0,
    frames_per_char: int = DEFAULT_FRAMES_PER_CHAR,
    run_index: int | None = None,
    clock: str = "virtual",
) -> TtsResult:
    """Render text segments to audio chunks.

    ``segments`` holds :class:`Segment` objects or plain strings (available
    at t=0). Segments are consumed in order by a single worker; a chunk
    finishes ``fixed_s + per_unit_s * frames * q_iterations`` after the later
    of its segment's availability and the previous chunk's completion.

    With ``clock="wall"`` the modeled cost is slept instead of added, and
    arrivals are measured, so codec compute time shows up in the trace.
    """
    if clock not in ("virtual", "wall"):
        raise ValueError(f"unknown clock {clock!r}")
    wall = clock == "wall"
    front = TtsFrontEnd(codebooks, cfg, chunk_frames, seed, frames_per_char)
    t0 = time.perf_counter()
    free_at = 0.0
    chunks: list[AudioChunk] = []
    refs = []
    for si, seg in enumerate(segments):
        if isinstance(seg, str):
            seg = Segment(seg, 0.0)
        if wall:
            wait = seg.available_s - (time.perf_counter() - t0)
            if wait > 0:
                time.sleep(wait)
        for dec, ref in front.render(seg.text):
            cost = model.cost(len(dec) * cfg.q_iterations, run_index if not chunks else None)
            if wall:
                time.sleep(cost)
                free_at = time.perf_counter() - t0
            else:
                free_at = max(free_at, seg.available_s) + cost
            chunks.append(
                AudioChunk(
                    index=len(chunks),
                    segment_index=si,
                    audio=front.to_audio(dec),
                    reference=front.to_audio(ref),
                    available_s=seg.available_s,
                    arrival_s=free_at,
                    n_frames=len(dec),
                )
            )
            refs.append(ref)
    if not chunks:
        raise ValueError("no text to synthesize")
    events = tuple(ChunkEvent(c.arrival_s, c.audio.duration_s) for c in chunks)
    return TtsResult(chunks, StreamTrace(events, free_at), np.concatenate(refs))


def text_of_length(n_chars: int) -> str:
    """The reply bank cycled and cut to ``n_chars`` characters.

    The first 151 characters are the benchmark sentence.
    """
    if n_chars < 1:
        raise ValueError("n_chars must be >= 1")
    text = ""
    i = 0
    while len(text) < n_chars:
        text += (" " if text else "") + RESPONSE_BANK[i % len(RESPONSE_BANK)]
        i += 1
    return text[:n_chars]
