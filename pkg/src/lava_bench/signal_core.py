"""Waveform container, 16-bit PCM WAV I/O and synthetic signal builders."""

from __future__ import annotations

import io
import wave
from dataclasses import dataclass

import numpy as np

DEFAULT_SAMPLE_RATE = 24000

_READ_SCALE = 32768.0
_INT16_MIN = -32768
_INT16_MAX = 32767


class WavFormatError(ValueError):
    """Raised when bytes are not a well-formed RIFF/WAVE PCM container."""


class UnsupportedWavError(WavFormatError):
    """Raised for well-formed WAV files outside the mono 16-bit PCM subset."""


@dataclass(frozen=True, eq=False)
class Waveform:
    """Mono audio samples with their sample rate.

    Samples are stored as a read-only float64 array. Values are expected in
    [-1, 1]; mixtures and codec output may overshoot, which is why the range
    is only enforced when writing PCM.
    """

    samples: np.ndarray
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(arr)):
            raise ValueError("waveform samples must be finite")
        if int(self.sample_rate_hz) <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self) -> int:
        return self.samples.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, Waveform):
            return NotImplemented
        return self.sample_rate_hz == other.sample_rate_hz and np.array_equal(
            self.samples, other.samples
        )

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    def power(self) -> float:
        """Mean square amplitude."""
        if self.samples.size == 0:
            return 0.0
        return float(np.mean(self.samples**2))

    def peak_normalized(self, peak: float = 0.95) -> "Waveform":
        top = np.max(np.abs(self.samples)) if self.samples.size else 0.0
        if top == 0.0:
            raise ValueError("cannot peak-normalize a silent waveform")
        return Waveform(self.samples * (peak / top), self.sample_rate_hz)

    @classmethod
    def concat(cls, parts, sample_rate_hz: int | None = None) -> "Waveform":
        parts = list(parts)
        if not parts:
            return cls(np.zeros(0), sample_rate_hz or DEFAULT_SAMPLE_RATE)
        rate = parts[0].sample_rate_hz
        if any(p.sample_rate_hz != rate for p in parts):
            raise ValueError("cannot concatenate waveforms with different sample rates")
        return cls(np.concatenate([p.samples for p in parts]), rate)


def read_wav(data: bytes) -> Waveform:
    """Decode a mono 16-bit PCM WAV byte string.

    Sample values are divided by 32768, so -32768 maps to exactly -1.0.

    Raises:
        WavFormatError: the RIFF/WAVE structure is malformed.
        UnsupportedWavError: the file is not mono 16-bit PCM.
    """
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavFormatError("missing RIFF/WAVE signature")
    try:
        with wave.open(io.BytesIO(data), "rb") as wf:
            channels = wf.getnchannels()
            width = wf.getsampwidth()
            rate = wf.getframerate()
            n = wf.getnframes()
            raw = wf.readframes(n)
    except wave.Error as exc:
        # wave reports non-PCM compression types as "unknown format"
        if "unknown format" in str(exc):
            raise UnsupportedWavError(str(exc)) from exc
        raise WavFormatError(str(exc)) from exc
    except EOFError as exc:
        raise WavFormatError("truncated WAV header") from exc
    if channels != 1:
        raise UnsupportedWavError(f"only mono is supported, got {channels} channels")
    if width != 2:
        raise UnsupportedWavError(f"only 16-bit PCM is supported, got {8 * width}-bit")
    if len(raw) != 2 * n:
        raise WavFormatError("data chunk shorter than declared")
    pcm = np.frombuffer(raw, dtype="<i2")
    return Waveform(pcm.astype(np.float64) / _READ_SCALE, rate)


def to_pcm16(samples) -> np.ndarray:
    """Clamp to [-1, 1] and quantize to little-endian int16 (scale 32768, top code 32767)."""
    x = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    q = np.round(x * _READ_SCALE)
    return np.clip(q, _INT16_MIN, _INT16_MAX).astype("<i2")


def write_wav(w: Waveform) -> bytes:
    """Encode a waveform as a canonical 44-byte-header mono 16-bit WAV."""
    if len(w) == 0:
        raise ValueError("zero-length audio cannot be written")
    buf = io.BytesIO()
    with wave.open(buf, "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(w.sample_rate_hz)
        wf.writeframes(to_pcm16(w.samples).tobytes())
    return buf.getvalue()


def load_wav(path) -> Waveform:
    with open(path, "rb") as fh:
        return read_wav(fh.read())


def save_wav(path, w: Waveform) -> None:
    with open(path, "wb") as fh:
        fh.write(write_wav(w))


def mix_at_snr(signal: Waveform, noise: Waveform, target_snr_db: float) -> Waveform:
    """Add ``noise`` to ``signal`` scaled so the power ratio equals ``target_snr_db``.

    Noise longer than the signal is truncated. Power is mean square amplitude.
    """
    if signal.sample_rate_hz != noise.sample_rate_hz:
        raise ValueError(
            f"sample rate mismatch: {signal.sample_rate_hz} vs {noise.sample_rate_hz}"
        )
    if len(noise) < len(signal):
        raise ValueError("noise must be at least as long as the signal")
    if not np.isfinite(target_snr_db):
        raise ValueError("target SNR must be finite")
    n = noise.samples[: len(signal)]
    p_sig = signal.power()
    p_noise = float(np.mean(n**2)) if n.size else 0.0
    if p_sig == 0.0 or p_noise == 0.0:
        raise ValueError("signal and noise must both have non-zero power")
    gain = np.sqrt(p_sig / (p_noise * 10.0 ** (target_snr_db / 10.0)))
    return Waveform(signal.samples + gain * n, signal.sample_rate_hz)


def gen_gamma_signal(
    n: int, shape: float = 0.4, seed: int = 0, sample_rate_hz: int = DEFAULT_SAMPLE_RATE
) -> Waveform:
    """Speech-like test signal: Gamma(shape, 1) magnitudes with random signs, peak 0.95.

    Magnitudes come from numpy's PCG64 generator, whose gamma sampler is
    Marsaglia-Tsang.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    if shape <= 0:
        raise ValueError("shape must be positive")
    rng = np.random.default_rng(seed)
    mag = rng.gamma(shape, 1.0, size=n)
    sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    return Waveform(sign * mag, sample_rate_hz).peak_normalized(0.95)


def white_noise(n: int, seed: int = 0, sample_rate_hz: int = DEFAULT_SAMPLE_RATE) -> Waveform:
    rng = np.random.default_rng(seed)
    return Waveform(rng.standard_normal(n), sample_rate_hz)


def tone(
    duration_s: float,
    freq_hz: float = 440.0,
    amplitude: float = 0.5,
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE,
) -> Waveform:
    n = int(round(duration_s * sample_rate_hz))
    t = np.arange(n) / sample_rate_hz
    return Waveform(amplitude * np.sin(2 * np.pi * freq_hz * t), sample_rate_hz)


def silence(
    duration_s: float, dither: float = 0.0, seed: int = 0, sample_rate_hz: int = DEFAULT_SAMPLE_RATE
) -> Waveform:
    """Zeros, optionally with a little uniform dither so log-energies stay finite."""
    n = int(round(duration_s * sample_rate_hz))
    if dither == 0.0:
        return Waveform(np.zeros(n), sample_rate_hz)
    rng = np.random.default_rng(seed)
    return Waveform(rng.uniform(-dither, dither, n), sample_rate_hz)
