"""VAD -> ASR -> LLM -> TTS orchestration on a virtual or wall clock.

Stages are simpy processes joined by FIFO stores. Under the virtual clock
time only advances through scheduled stage costs, so runs are exact and
repeatable; under the wall clock the same processes run on a real-time
simpy environment and chunk arrivals are stamped with ``perf_counter``.

Time zero is the moment the endpointer declares end of speech. Reported
profile fields follow the time-profile table: ``llm_s`` is full reply time
in one-shot mode and time to the first flush when streaming, ``tts_s`` runs
from the TTS input becoming available to the first chunk, and ``total_s``
is time zero to the first chunk.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from importlib import resources
from typing import Any

import jsonschema
import simpy
import simpy.rt

from .endpointing import EndpointConfig, NoSpeechError, extract_speech, find_endpoint, label_frames
from .latency_metrics import ChunkEvent, StreamTrace
from .rvq_codec import CodebookSet, RvqConfig
from .signal_core import Waveform
from .synth_stages import (
    DEFAULT_DIM,
    AudioChunk,
    LatencyModel,
    Segment,
    TtsFrontEnd,
    default_chunk_frames,
    default_codebooks,
    flush_segments,
    pseudo_transcript,
    synth_llm,
)


class Mode(str, Enum):
    ONESHOT = "oneshot"
    STREAMING = "streaming"


class Clock(str, Enum):
    VIRTUAL = "virtual"
    WALL = "wall"


class ConfigError(ValueError):
    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class StageError(RuntimeError):
    # args must rebuild the exception: simpy re-raises process failures as
    # type(exc)(*exc.args)
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(stage, cause)

    def __str__(self) -> str:
        return f"{self.stage} stage failed: {self.cause}"


# Per-column stage times of the time-profile table, in seconds.
TIME_PROFILE = {
    ("gpu", Mode.ONESHOT): (0.5056, 2.1502, 0.6695),
    ("gpu", Mode.STREAMING): (0.4986, 0.1504, 0.6345),
    ("cpu", Mode.ONESHOT): (2.4502, 1.3272, 1.6299),
    ("cpu", Mode.STREAMING): (2.2245, 0.1496, 1.4647),
}
PROFILE_TOTALS = {
    ("gpu", Mode.ONESHOT): 3.3253,
    ("gpu", Mode.STREAMING): 1.2835,
    ("cpu", Mode.ONESHOT): 5.4073,
    ("cpu", Mode.STREAMING): 3.8388,
}


@dataclass(frozen=True)
class StageModels:
    asr: LatencyModel = field(default_factory=lambda: LatencyModel(0.05, 0.1))
    llm: LatencyModel = field(default_factory=lambda: LatencyModel(0.02, 0.013))
    tts: LatencyModel = field(default_factory=lambda: LatencyModel(0.0, 2.0e-5))


@dataclass(frozen=True)
class PipelineConfig:
    mode: Mode = Mode.STREAMING
    flush_every_tokens: int = 10
    clock: Clock = Clock.VIRTUAL
    rvq: RvqConfig = field(default_factory=lambda: RvqConfig(16))
    endpoint: EndpointConfig = field(default_factory=EndpointConfig)
    models: StageModels = field(default_factory=StageModels)
    # optional per-mode model overrides, used to pin each mode to its own profile column
    mode_models: dict = field(default_factory=dict)
    seed: int = 0
    n_tokens: int | None = None
    chunk_frames: int | None = None
    dim: int = DEFAULT_DIM
    n_stages: int = 32
    codebook_size: int = 64
    cold_start: bool = True
    llm_can_stream: bool = True
    context: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "clock", Clock(self.clock))
        object.__setattr__(self, "context", tuple(self.context))
        object.__setattr__(
            self, "mode_models", {Mode(k): v for k, v in dict(self.mode_models).items()}
        )
        if self.flush_every_tokens < 1:
            raise ConfigError("must be >= 1", "flush_every_tokens")
        if self.mode is Mode.STREAMING and not self.llm_can_stream:
            raise ConfigError("streaming mode needs a stream-capable LLM stage", "mode")
        if self.rvq.decoder_codebooks > self.n_stages:
            raise ConfigError("exceeds n_stages", "rvq.decoder_codebooks")

    def models_for(self, mode: Mode) -> StageModels:
        return self.mode_models.get(Mode(mode), self.models)

    @property
    def effective_chunk_frames(self) -> int:
        return self.chunk_frames or default_chunk_frames(self.dim)

    # -- JSON --------------------------------------------------------------

    def to_dict(self) -> dict:
        def model(m: LatencyModel) -> dict:
            return asdict(m)

        def models(ms: StageModels) -> dict:
            return {"asr": model(ms.asr), "llm": model(ms.llm), "tts": model(ms.tts)}

        return {
            "mode": self.mode.value,
            "flush_every_tokens": self.flush_every_tokens,
            "clock": self.clock.value,
            "rvq": {
                "q_iterations": self.rvq.q_iterations,
                "decoder_codebooks": self.rvq.decoder_codebooks,
                "padding": self.rvq.padding.value,
            },
            "endpoint": asdict(self.endpoint),
            "models": models(self.models),
            "mode_models": {k.value: models(v) for k, v in self.mode_models.items()},
            "seed": self.seed,
            "n_tokens": self.n_tokens,
            "chunk_frames": self.chunk_frames,
            "dim": self.dim,
            "n_stages": self.n_stages,
            "codebook_size": self.codebook_size,
            "cold_start": self.cold_start,
            "llm_can_stream": self.llm_can_stream,
            "context": list(self.context),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        validate_config_dict(doc)

        def models(d: dict | None) -> StageModels:
            d = d or {}
            base = StageModels()
            return StageModels(
                **{k: LatencyModel(**d[k]) if k in d else getattr(base, k) for k in ("asr", "llm", "tts")}
            )

        kwargs: dict[str, Any] = {k: v for k, v in doc.items() if k not in ("rvq", "endpoint", "models", "mode_models")}
        if "rvq" in doc:
            kwargs["rvq"] = _build(RvqConfig, doc["rvq"], "rvq")
        if "endpoint" in doc:
            kwargs["endpoint"] = _build(EndpointConfig, doc["endpoint"], "endpoint")
        if "models" in doc:
            kwargs["models"] = models(doc["models"])
        if "mode_models" in doc:
            kwargs["mode_models"] = {k: models(v) for k, v in doc["mode_models"].items()}
        if "context" in doc:
            kwargs["context"] = tuple(doc["context"])
        return _build(cls, kwargs, "")

    @classmethod
    def from_json(cls, text: str) -> "PipelineConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        return cls.from_dict(doc)


def _build(factory, kwargs: dict, path: str):
    try:
        return factory(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), path or "<root>") from None


def config_schema() -> dict:
    text = resources.files("lava_bench").joinpath("data", "pipeline_config.schema.json").read_text()
    return json.loads(text)


def validate_config_dict(doc: Any) -> None:
    """Check a config document against the shipped JSON schema."""
    validator = jsonschema.Draft202012Validator(config_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = ".".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(err.message, path)


# ---------------------------------------------------------------- profile


@dataclass(frozen=True)
class TimeProfile:
    asr_s: float
    llm_s: float
    tts_s: float
    total_s: float

    def __post_init__(self):
        for name in ("asr_s", "llm_s", "tts_s", "total_s"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


def replay_profile(asr_s: float, llm_s: float, tts_s: float, mode) -> TimeProfile:
    """Compose stage times into a profile.

    Both modes add up: the streaming ``llm_s`` is already time-to-first-flush.
    """
    Mode(mode)
    for name, v in (("asr_s", asr_s), ("llm_s", llm_s), ("tts_s", tts_s)):
        if v < 0:
            raise ValueError(f"{name} must be >= 0, got {v}")
    return TimeProfile(asr_s, llm_s, tts_s, asr_s + llm_s + tts_s)


def fit_llm_model(oneshot_s: float, first_flush_s: float, n_tokens: int, flush_every: int = 10) -> LatencyModel:
    """Affine LLM model hitting both a full-reply time and a first-flush time."""
    if n_tokens <= flush_every:
        raise ValueError("need more tokens than one flush to separate the two times")
    per = (oneshot_s - first_flush_s) / (n_tokens - flush_every)
    fixed = first_flush_s - flush_every * per
    if per < 0 or fixed < 0:
        raise ValueError("times are not consistent with a non-negative affine model")
    return LatencyModel(fixed, per)


CALIBRATION_TOKENS = 160


def calibrated_config(environment: str = "gpu", **overrides) -> PipelineConfig:
    """Config whose virtual-clock runs land exactly on the time-profile columns.

    ASR and TTS costs are flat (the column values); the LLM is fitted so
    full reply and first flush match the two columns at ``CALIBRATION_TOKENS``
    tokens.
    """
    env = environment.lower()
    per_mode = {}
    one = TIME_PROFILE[(env, Mode.ONESHOT)]
    stream = TIME_PROFILE[(env, Mode.STREAMING)]
    llm = fit_llm_model(one[1], stream[1], CALIBRATION_TOKENS)
    for mode, (asr, _, tts) in ((Mode.ONESHOT, one), (Mode.STREAMING, stream)):
        per_mode[mode] = StageModels(LatencyModel(asr, 0.0), llm, LatencyModel(tts, 0.0))
    kwargs = dict(
        rvq=RvqConfig(16),
        models=per_mode[Mode.ONESHOT],
        mode_models=per_mode,
        n_tokens=CALIBRATION_TOKENS,
    )
    kwargs.update(overrides)
    return PipelineConfig(**kwargs)


# ---------------------------------------------------------------- run


@dataclass
class PipelineResult:
    chunks: list[AudioChunk]
    trace: StreamTrace
    profile: TimeProfile
    endpoint_s: float
    transcript: str
    reply: str
    segments: list[Segment]

    @property
    def audio(self) -> Waveform:
        return Waveform.concat([c.audio for c in self.chunks])

    @property
    def reference_audio(self) -> Waveform:
        return Waveform.concat([c.reference for c in self.chunks])


class _Stamp:
    def __init__(self, env: simpy.Environment, clock: Clock):
        self.env = env
        self.wall = clock is Clock.WALL
        self.t0 = time.perf_counter()

    def now(self) -> float:
        return time.perf_counter() - self.t0 if self.wall else float(self.env.now)


class Pipeline:
    """A reusable pipeline instance; repeated runs share cold-start state."""

    def __init__(self, cfg: PipelineConfig, codebooks: CodebookSet | None = None):
        self.cfg = cfg
        self.codebooks = codebooks or default_codebooks(cfg.dim, cfg.n_stages, cfg.codebook_size, cfg.seed)
        if self.codebooks.dim != cfg.dim:
            raise ConfigError("codebook dimension differs from config", "dim")
        cfg.rvq.check(self.codebooks)
        self.runs = 0

    def warm_up(self, w: Waveform) -> None:
        ms = self.cfg.models_for(self.cfg.mode)
        n = max(ms.asr.warmup_runs, ms.llm.warmup_runs, ms.tts.warmup_runs)
        while self.runs < n:
            self.run(w)

    def run(self, w: Waveform, mode: Mode | None = None) -> PipelineResult:
        cfg = self.cfg
        mode = Mode(mode or cfg.mode)
        if mode is Mode.STREAMING and not cfg.llm_can_stream:
            raise ConfigError("streaming mode needs a stream-capable LLM stage", "mode")
        models = cfg.models_for(mode)
        run_index = self.runs
        self.runs += 1

        labels = label_frames(w, cfg.endpoint)
        endpoint = find_endpoint(labels, cfg.endpoint)
        if endpoint is None:
            raise NoSpeechError("no end of speech detected in input")
        speech = extract_speech(w, cfg.endpoint)

        if cfg.clock is Clock.VIRTUAL:
            env = simpy.Environment()
        else:
            env = simpy.rt.RealtimeEnvironment(factor=1.0, strict=False)
        stamp = _Stamp(env, cfg.clock)
        text_q = simpy.Store(env)
        seg_q = simpy.Store(env)
        marks: dict[str, Any] = {}
        chunks: list[AudioChunk] = []
        segments: list[Segment] = []
        front = TtsFrontEnd(self.codebooks, cfg.rvq, cfg.effective_chunk_frames, cfg.seed)
        stream = mode is Mode.STREAMING

        def asr():
            try:
                yield env.timeout(models.asr.cost(speech.duration_s, run_index))
                text = pseudo_transcript(speech)
            except Exception as exc:
                raise StageError("asr", exc) from exc
            marks["asr_done"] = stamp.now()
            marks["transcript"] = text
            yield text_q.put(text)

        def llm():
            text = yield text_q.get()
            start = env.now
            try:
                tokens = synth_llm(text, cfg.context, models.llm, stream, cfg.seed, cfg.n_tokens, run_index)
                plan = flush_segments(tokens, cfg.flush_every_tokens, stream)
            except Exception as exc:
                raise StageError("llm", exc) from exc
            marks["reply"] = "".join(t.text for t in tokens)
            for seg in plan:
                delay = start + seg.available_s - env.now
                if delay > 0:
                    yield env.timeout(delay)
                ready = Segment(seg.text, stamp.now())
                marks.setdefault("first_segment", ready.available_s)
                yield seg_q.put((len(segments), ready))
                segments.append(ready)
            yield seg_q.put(None)

        def tts():
            first = True
            while True:
                item = yield seg_q.get()
                if item is None:
                    return
                seg_index, seg = item
                try:
                    blocks = front.render(seg.text)
                except Exception as exc:
                    raise StageError("tts", exc) from exc
                for dec, ref in blocks:
                    cost = models.tts.cost(len(dec) * cfg.rvq.q_iterations, run_index if first else None)
                    first = False
                    yield env.timeout(cost)
                    chunks.append(
                        AudioChunk(
                            index=len(chunks),
                            segment_index=seg_index,
                            audio=front.to_audio(dec),
                            reference=front.to_audio(ref),
                            available_s=seg.available_s,
                            arrival_s=stamp.now(),
                            n_frames=len(dec),
                        )
                    )

        env.process(asr())
        env.process(llm())
        env.process(tts())
        env.run()
        if not chunks:
            raise StageError("tts", RuntimeError("no audio produced"))

        asr_s = marks["asr_done"]
        llm_s = marks["first_segment"] - asr_s
        tts_s = chunks[0].arrival_s - marks["first_segment"]
        profile = TimeProfile(asr_s, llm_s, tts_s, chunks[0].arrival_s)
        events = tuple(ChunkEvent(c.arrival_s, c.audio.duration_s) for c in chunks)
        trace = StreamTrace(events, chunks[-1].arrival_s)
        return PipelineResult(
            chunks, trace, profile, endpoint, marks["transcript"], marks["reply"], segments
        )


def run_pipeline(w: Waveform, cfg: PipelineConfig, codebooks: CodebookSet | None = None) -> PipelineResult:
    """One measured run; cold-start runs are spent first when ``cfg.cold_start``."""
    pipe = Pipeline(cfg, codebooks)
    if cfg.cold_start:
        pipe.warm_up(w)
    return pipe.run(w)


def compare_modes(
    w: Waveform, cfg: PipelineConfig, codebooks: CodebookSet | None = None
) -> tuple[TimeProfile, TimeProfile]:
    """(one-shot, streaming) profiles from otherwise identical runs."""
    one = run_pipeline(w, replace(cfg, mode=Mode.ONESHOT), codebooks)
    streaming = run_pipeline(w, replace(cfg, mode=Mode.STREAMING), codebooks)
    return one.profile, streaming.profile
