"""Energy-based voice activity detection and silence-window endpointing.

Frames are labelled speech when their RMS level clears a noise floor,
estimated from the leading frames, by ``energy_threshold_db``. End of
speech is declared once ``silence_window_s`` of consecutive silence
follows speech; with 30 ms frames the default 1.5 s window is 50 frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .signal_core import Waveform

SPEECH = True
SILENCE = False

_POWER_FLOOR = 1e-12  # -120 dBFS, keeps log10 finite on digital silence


class NoSpeechError(ValueError):
    """Raised when no speech (or no completed endpoint) is found."""


@dataclass(frozen=True)
class EndpointConfig:
    frame_ms: int = 30
    energy_threshold_db: float = 10.0
    silence_window_s: float = 1.5
    noise_floor_frames: int = 10
    # loud leading frames are not noise; cap the floor estimate
    max_noise_floor_dbfs: float = -50.0

    def __post_init__(self):
        if self.frame_ms <= 0:
            raise ValueError("frame_ms must be positive")
        if self.silence_window_s <= 0:
            raise ValueError("silence_window_s must be positive")
        if self.noise_floor_frames < 1:
            raise ValueError("noise_floor_frames must be >= 1")

    @property
    def frame_s(self) -> float:
        return self.frame_ms / 1000.0

    @property
    def window_frames(self) -> int:
        # 1.5 / 0.03 is 50.000000000000007 in floating point
        return max(1, math.ceil(self.silence_window_s / self.frame_s - 1e-9))

    def frame_len(self, sample_rate_hz: int) -> int:
        return max(1, int(round(self.frame_ms * sample_rate_hz / 1000.0)))


def frame_levels_db(w: Waveform, cfg: EndpointConfig) -> np.ndarray:
    """RMS level of each non-overlapping frame in dBFS; a trailing partial frame counts."""
    n = cfg.frame_len(w.sample_rate_hz)
    x = w.samples
    starts = range(0, len(x), n)
    power = np.array([np.mean(x[i : i + n] ** 2) for i in starts])
    return 10.0 * np.log10(np.maximum(power, _POWER_FLOOR))


def label_frames(w: Waveform, cfg: EndpointConfig | None = None) -> list[bool]:
    """Speech/silence label per frame (``True`` is speech)."""
    cfg = cfg or EndpointConfig()
    if len(w) < cfg.frame_len(w.sample_rate_hz):
        raise ValueError("waveform is shorter than one frame")
    levels = frame_levels_db(w, cfg)
    lead = levels[: cfg.noise_floor_frames]
    floor_db = 10.0 * np.log10(np.mean(10.0 ** (lead / 10.0)))
    floor_db = min(floor_db, cfg.max_noise_floor_dbfs)
    return [bool(v) for v in levels > floor_db + cfg.energy_threshold_db]


class EndpointDetector:
    """Incremental endpointing over a stream of frame labels.

    Feed labels in arrival order with :meth:`push`; it returns the endpoint
    time the first time a full silence window has followed speech.
    """

    def __init__(self, cfg: EndpointConfig | None = None):
        self.cfg = cfg or EndpointConfig()
        self.frames_seen = 0
        self.last_speech_end: float | None = None
        self.silent_run = 0
        self.endpoint_s: float | None = None

    def push(self, is_speech: bool) -> float | None:
        self.frames_seen += 1
        if self.endpoint_s is not None:
            return None
        if is_speech:
            self.last_speech_end = self.frames_seen * self.cfg.frame_s
            self.silent_run = 0
            return None
        if self.last_speech_end is None:
            return None
        self.silent_run += 1
        if self.silent_run >= self.cfg.window_frames:
            self.endpoint_s = self.last_speech_end + self.cfg.window_frames * self.cfg.frame_s
            return self.endpoint_s
        return None


def find_endpoint(labels, cfg: EndpointConfig | None = None) -> float | None:
    """Time in seconds at which end of speech is declared, or ``None``.

    The endpoint is the end of the last speech frame plus the silence window
    rounded up to whole frames.
    """
    labels = list(labels)
    if not labels:
        raise ValueError("no frame labels")
    det = EndpointDetector(cfg)
    for lab in labels:
        hit = det.push(lab)
        if hit is not None:
            return hit
    return None


def detect_endpoint(w: Waveform, cfg: EndpointConfig | None = None) -> float | None:
    cfg = cfg or EndpointConfig()
    return find_endpoint(label_frames(w, cfg), cfg)


def extract_speech(w: Waveform, cfg: EndpointConfig | None = None) -> Waveform:
    """Concatenate the speech-labelled frames of ``w``."""
    cfg = cfg or EndpointConfig()
    labels = label_frames(w, cfg)
    if not any(labels):
        raise NoSpeechError("no speech detected")
    n = cfg.frame_len(w.sample_rate_hz)
    parts = [w.samples[i * n : (i + 1) * n] for i, lab in enumerate(labels) if lab]
    return Waveform(np.concatenate(parts), w.sample_rate_hz)
