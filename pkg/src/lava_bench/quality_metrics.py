"""Blind (WADA) and reference-based SNR estimation.

WADA-SNR models clean speech amplitudes as Gamma(0.4)-distributed and noise
as Gaussian. The statistic ``G = ln(mean|x|) - mean(ln|x|)`` then depends
only on the SNR of the mixture, and a lookup table maps it back to dB.

The table shipped in ``data/wada_gamma04.txt`` is generated by
:func:`derive_wada_table`, which evaluates the expected statistic of the
model mixture by numerical integration. ``python -m lava_bench.quality_metrics``
rewrites the file.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import integrate, special

from .rvq_codec import SNR_SENTINEL_DB
from .signal_core import Waveform

SPEECH_GAMMA_SHAPE = 0.4
LOG_FLOOR = 1e-10
TABLE_MIN_DB = -20.0
TABLE_MAX_DB = 100.0
TABLE_POINTS = 100
TABLE_FILE = "wada_gamma04.txt"


class SilentSignalError(ValueError):
    """Raised when a waveform carries no usable amplitude."""


@dataclass(frozen=True, eq=False)
class SnrLookupTable:
    g_values: np.ndarray
    snr_db: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.g_values, dtype=np.float64)
        d = np.asarray(self.snr_db, dtype=np.float64)
        if g.shape != d.shape or g.ndim != 1 or g.size < 2:
            raise ValueError("table needs two equal-length 1-D columns")
        if np.any(np.diff(d) <= 0):
            raise ValueError("snr_db column must be strictly increasing")
        if np.any(np.diff(g) <= 0):
            raise ValueError("g column must be strictly increasing")
        object.__setattr__(self, "g_values", g)
        object.__setattr__(self, "snr_db", d)

    def lookup(self, g: float) -> float:
        # np.interp clamps to the end values outside the table
        return float(np.interp(g, self.g_values, self.snr_db))

    def to_text(self) -> str:
        lines = [f"{g:.10f} {d:.6f}" for g, d in zip(self.g_values, self.snr_db)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SnrLookupTable":
        rows = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected 'g_value snr_db'")
            rows.append((float(parts[0]), float(parts[1])))
        if not rows:
            raise ValueError("empty table")
        g, d = zip(*rows)
        return cls(np.array(g), np.array(d))


def _mean_log_abs_shifted_normal(a: np.ndarray) -> np.ndarray:
    """E[ln|a + Z|] for Z ~ N(0, 1), elementwise over ``a``.

    Uses the Poisson-weighted digamma series of the log of a noncentral
    chi-square(1) variable for |a| < 20 and the asymptotic expansion beyond.
    """
    a = np.abs(np.asarray(a, dtype=np.float64))
    out = np.empty_like(a)
    small = a < 20.0
    if small.any():
        lam = a[small] ** 2 / 2.0
        j = np.arange(800)
        with np.errstate(divide="ignore", invalid="ignore"):
            logw = j * np.log(lam[:, None]) - lam[:, None] - special.gammaln(j + 1)
        logw[lam == 0.0, 0] = 0.0
        out[small] = 0.5 * (np.log(2.0) + np.exp(logw) @ special.digamma(0.5 + j))
    big = ~small
    ab = a[big]
    out[big] = np.log(ab) - 0.5 / ab**2 - 0.75 / ab**4 - 2.5 / ab**6
    return out


def expected_g(snr_db: float, shape: float = SPEECH_GAMMA_SHAPE) -> float:
    """Expected WADA statistic of Gamma(shape) speech plus Gaussian noise at ``snr_db``."""
    speech_power = shape * (shape + 1.0)
    sigma = np.sqrt(speech_power * 10.0 ** (-snr_db / 10.0))
    # integrate over u = ln(s); the density s*p(s) is smooth in u
    u = np.linspace(np.log(sigma) - 30.0, np.log(80.0), 60001)
    s = np.exp(u)
    weight = np.exp(shape * u - s - special.gammaln(shape))
    a = s / sigma
    mean_abs = sigma * np.sqrt(2.0 / np.pi) * np.exp(-(a**2) / 2.0) + s * special.erf(a / np.sqrt(2.0))
    mean_log = np.log(sigma) + _mean_log_abs_shifted_normal(a)
    # mass below the grid behaves like s = 0
    tail = special.gammainc(shape, s[0])
    e_abs = integrate.simpson(weight * mean_abs, x=u) + tail * sigma * np.sqrt(2.0 / np.pi)
    e_log = integrate.simpson(weight * mean_log, x=u) + tail * (
        np.log(sigma) + _mean_log_abs_shifted_normal(np.zeros(1))[0]
    )
    return float(np.log(e_abs) - e_log)


def derive_wada_table(
    n_points: int = TABLE_POINTS, lo_db: float = TABLE_MIN_DB, hi_db: float = TABLE_MAX_DB
) -> SnrLookupTable:
    grid = np.linspace(lo_db, hi_db, n_points)
    return SnrLookupTable(np.array([expected_g(d) for d in grid]), grid)


@lru_cache(maxsize=1)
def default_table() -> SnrLookupTable:
    text = resources.files("lava_bench").joinpath("data", TABLE_FILE).read_text()
    return SnrLookupTable.from_text(text)


def wada_statistic(samples) -> float:
    x = np.abs(np.asarray(samples, dtype=np.float64))
    if x.size == 0:
        raise SilentSignalError("empty waveform")
    mean_abs = x.mean()
    if mean_abs == 0.0:
        raise SilentSignalError("all-zero waveform")
    x = x / mean_abs
    x = x[x > LOG_FLOOR]
    if x.size == 0:
        raise SilentSignalError("no samples above the log floor")
    return float(np.log(x.mean()) - np.mean(np.log(x)))


def wada_snr(w: Waveform, table: SnrLookupTable | None = None) -> float:
    """Blind SNR estimate in dB, clamped to the table range."""
    table = table or default_table()
    return table.lookup(wada_statistic(w.samples))


def reference_snr(reference: Waveform, test: Waveform) -> float:
    """10*log10(sum r^2 / sum (r - t)^2); exact match returns the sentinel."""
    if reference.sample_rate_hz != test.sample_rate_hz:
        raise ValueError("sample rate mismatch")
    if len(reference) != len(test):
        raise ValueError(f"length mismatch: {len(reference)} vs {len(test)}")
    if not np.any(reference.samples):
        raise SilentSignalError("reference is silent")
    p_sig = float(np.sum(reference.samples**2))
    p_err = float(np.sum((reference.samples - test.samples) ** 2))
    if p_err == 0.0:
        return SNR_SENTINEL_DB
    return min(10.0 * np.log10(p_sig / p_err), SNR_SENTINEL_DB)


def _write_default_table(path: Path | None = None) -> Path:
    path = path or Path(__file__).parent / "data" / TABLE_FILE
    path.write_text(derive_wada_table().to_text())
    return path


if __name__ == "__main__":
    print(_write_default_table())
