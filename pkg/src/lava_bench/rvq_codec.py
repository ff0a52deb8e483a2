"""Residual vector quantization with stage truncation and index padding.

Each stage quantizes the residual left by the stages before it, and
reconstruction is the sum of the selected codewords. Encoding can stop
after ``q`` stages; the resulting ``q`` indices may then be padded up to a
wider decoder (``mean`` or ``concat`` padding) so a decoder built for more
stages can consume them.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np

SNR_SENTINEL_DB = 200.0
LLOYD_ITERATIONS = 25

CODEBOOK_MAGIC = b"LAVARVQ\x01"
_HEADER = struct.Struct("<8sIII")


class Padding(str, Enum):
    NONE = "none"
    MEAN = "mean"
    CONCAT = "concat"


@dataclass(frozen=True, eq=False)
class CodebookSet:
    """Per-stage codebooks, ``vectors[s, k]`` is codeword ``k`` of stage ``s``."""

    vectors: np.ndarray

    def __post_init__(self):
        v = np.array(self.vectors, dtype=np.float64)
        if v.ndim != 3:
            raise ValueError("codebook vectors must have shape (n_stages, K, D)")
        n_stages, k, d = v.shape
        if n_stages < 1 or k < 2 or d < 1:
            raise ValueError(f"need n_stages>=1, K>=2, D>=1; got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("codebook vectors must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "vectors", v)

    @property
    def n_stages(self) -> int:
        return self.vectors.shape[0]

    @property
    def codebook_size(self) -> int:
        return self.vectors.shape[1]

    @property
    def dim(self) -> int:
        return self.vectors.shape[2]

    def __eq__(self, other):
        if not isinstance(other, CodebookSet):
            return NotImplemented
        return np.array_equal(self.vectors, other.vectors)

    def to_bytes(self) -> bytes:
        """Versioned binary layout: magic, uint32 n_stages/K/D, float64 LE row-major."""
        head = _HEADER.pack(CODEBOOK_MAGIC, self.n_stages, self.codebook_size, self.dim)
        return head + self.vectors.astype("<f8").tobytes(order="C")

    @classmethod
    def from_bytes(cls, data: bytes) -> "CodebookSet":
        if len(data) < _HEADER.size:
            raise ValueError("codebook file too short")
        magic, n_stages, k, d = _HEADER.unpack_from(data)
        if magic != CODEBOOK_MAGIC:
            raise ValueError(f"bad codebook magic {magic!r}")
        expected = _HEADER.size + 8 * n_stages * k * d
        if len(data) != expected:
            raise ValueError(f"codebook payload is {len(data)} bytes, expected {expected}")
        flat = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
        return cls(flat.reshape(n_stages, k, d))

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "CodebookSet":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


@dataclass(frozen=True)
class RvqConfig:
    q_iterations: int = 32
    decoder_codebooks: int | None = None
    padding: Padding = Padding.NONE

    def __post_init__(self):
        padding = Padding(self.padding)
        object.__setattr__(self, "padding", padding)
        if self.decoder_codebooks is None:
            object.__setattr__(self, "decoder_codebooks", self.q_iterations)
        if self.q_iterations < 1:
            raise ValueError("q_iterations must be >= 1")
        if self.decoder_codebooks < self.q_iterations:
            raise ValueError("decoder_codebooks must be >= q_iterations")
        if (padding is Padding.NONE) != (self.decoder_codebooks == self.q_iterations):
            raise ValueError(
                "padding must be 'none' exactly when decoder_codebooks == q_iterations"
            )

    def check(self, codebooks: CodebookSet) -> None:
        if self.decoder_codebooks > codebooks.n_stages:
            raise ValueError(
                f"config needs {self.decoder_codebooks} stages, codebooks have {codebooks.n_stages}"
            )


@dataclass(frozen=True, eq=False)
class RvqCode:
    """Per-frame stage indices; ``q`` of the columns came from the encoder."""

    indices: np.ndarray
    q: int

    def __post_init__(self):
        idx = np.array(self.indices, dtype=np.int64)
        if idx.ndim != 2:
            raise ValueError("indices must be a (n_frames, width) matrix")
        if not 1 <= self.q <= idx.shape[1]:
            raise ValueError("q must be between 1 and the index width")
        idx.flags.writeable = False
        object.__setattr__(self, "indices", idx)


def _as_frames(frames, dim: int) -> np.ndarray:
    x = np.asarray(frames, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2 or x.shape[1] != dim:
        raise ValueError(f"frames must have dimension {dim}, got shape {np.shape(frames)}")
    return x


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    # explicit differences, not the |x|^2 - 2xc + |c|^2 expansion, so ties and
    # exact matches resolve the same way a direct search would
    diff = x[:, None, :] - c[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _nearest(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    # argmin returns the first minimum, which gives the lowest-index tie rule
    return np.argmin(_sq_dists(x, c), axis=1)


def _nearest_blas(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    # training only: the expanded form is much faster and its rounding only
    # matters on near-ties, which do not affect determinism
    d = (c**2).sum(axis=1)[None, :] - 2.0 * (x @ c.T)
    return np.argmin(d, axis=1)


def _kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # every point already coincides with a center
            centers[i] = x[rng.integers(n)]
        else:
            centers[i] = x[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((x - centers[i]) ** 2, axis=1))
    return centers


def kmeans(x: np.ndarray, k: int, rng: np.random.Generator, iterations: int = LLOYD_ITERATIONS):
    """k-means++ seeding followed by a fixed number of Lloyd steps.

    Empty clusters are re-seeded from the point farthest from its centroid.
    Returns ``(centers, labels)``.
    """
    centers = _kmeans_pp_init(x, k, rng)
    labels = _nearest_blas(x, centers)
    for _ in range(iterations):
        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(centers)
        np.add.at(sums, labels, x)
        filled = counts > 0
        centers[filled] = sums[filled] / counts[filled, None]
        if not filled.all():
            err = np.sum((x - centers[labels]) ** 2, axis=1)
            for j in np.flatnonzero(~filled):
                far = int(np.argmax(err))
                centers[j] = x[far]
                err[far] = -1.0
        labels = _nearest_blas(x, centers)
    return centers, labels


def train_codebooks(frames, n_stages: int = 32, codebook_size: int = 64, seed: int = 0) -> CodebookSet:
    """Greedy stage-wise codebook training: k-means on each stage's residuals."""
    x = np.array(frames, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 1:
        raise ValueError("frames must be a non-empty list of equal-length vectors")
    if x.shape[0] < codebook_size:
        raise ValueError(f"need at least {codebook_size} frames, got {x.shape[0]}")
    if n_stages < 1:
        raise ValueError("n_stages must be >= 1")
    rng = np.random.default_rng(seed)
    stages = []
    residual = x.copy()
    for _ in range(n_stages):
        centers, labels = kmeans(residual, codebook_size, rng)
        stages.append(centers)
        residual = residual - centers[labels]
    return CodebookSet(np.stack(stages))


def encode_frames(frames, codebooks: CodebookSet, q: int) -> np.ndarray:
    """Greedy residual encoding of many frames at once, shape (n_frames, q)."""
    if not 1 <= q <= codebooks.n_stages:
        raise ValueError(f"q must be in [1, {codebooks.n_stages}], got {q}")
    residual = _as_frames(frames, codebooks.dim).copy()
    out = np.empty((residual.shape[0], q), dtype=np.int64)
    for s in range(q):
        book = codebooks.vectors[s]
        idx = _nearest(residual, book)
        out[:, s] = idx
        residual -= book[idx]
    return out


def encode_frame(frame, codebooks: CodebookSet, q: int) -> list[int]:
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 1:
        raise ValueError("encode_frame takes a single vector")
    return [int(i) for i in encode_frames(frame, codebooks, q)[0]]


def decode_frames(indices, codebooks: CodebookSet) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim == 1:
        idx = idx.reshape(1, -1)
    width = idx.shape[1]
    if width > codebooks.n_stages:
        raise ValueError(f"{width} indices but only {codebooks.n_stages} stages")
    if idx.size and (idx.min() < 0 or idx.max() >= codebooks.codebook_size):
        raise IndexError(f"index out of range [0, {codebooks.codebook_size})")
    out = np.zeros((idx.shape[0], codebooks.dim))
    for s in range(width):
        out += codebooks.vectors[s][idx[:, s]]
    return out


def decode_frame(indices, codebooks: CodebookSet) -> np.ndarray:
    return decode_frames(np.asarray(indices).reshape(1, -1), codebooks)[0]


def pad_indices(indices, target_len: int, strategy, codebook_size: int | None = None) -> list[int]:
    """Widen a list of stage indices to ``target_len`` entries.

    ``mean`` appends the per-frame mean index, rounded half up and clamped to
    ``codebook_size - 1`` when a size is given. ``concat`` repeats the input
    cyclically and cuts the last repetition at ``target_len``.
    """
    idx = [int(i) for i in indices]
    q = len(idx)
    if q == 0:
        raise ValueError("cannot pad an empty index list")
    if target_len < q:
        raise ValueError(f"target length {target_len} shorter than input {q}")
    strategy = Padding(strategy)
    if strategy is Padding.NONE:
        if target_len != q:
            raise ValueError("padding 'none' requires target_len == len(indices)")
        return idx
    if strategy is Padding.MEAN:
        # floor(sum/q + 1/2) in integer arithmetic
        fill = (2 * sum(idx) + q) // (2 * q)
        if codebook_size is not None:
            fill = min(max(fill, 0), codebook_size - 1)
        return idx + [fill] * (target_len - q)
    return [idx[i % q] for i in range(target_len)]


def _pad_matrix(idx: np.ndarray, target: int, strategy: Padding, k: int) -> np.ndarray:
    n, q = idx.shape
    if target == q:
        return idx
    if strategy is Padding.MEAN:
        fill = (2 * idx.sum(axis=1) + q) // (2 * q)
        fill = np.clip(fill, 0, k - 1)
        return np.concatenate([idx, np.repeat(fill[:, None], target - q, axis=1)], axis=1)
    return idx[:, np.arange(target) % q]


def encode(frames, codebooks: CodebookSet, cfg: RvqConfig) -> RvqCode:
    cfg.check(codebooks)
    idx = encode_frames(frames, codebooks, cfg.q_iterations)
    padded = _pad_matrix(idx, cfg.decoder_codebooks, cfg.padding, codebooks.codebook_size)
    return RvqCode(padded, cfg.q_iterations)


def decode(code: RvqCode, codebooks: CodebookSet) -> np.ndarray:
    return decode_frames(code.indices, codebooks)


def snr_db(reference, estimate) -> float:
    """10*log10(sum r^2 / sum (r - e)^2), capped at the exact-match sentinel."""
    r = np.asarray(reference, dtype=np.float64)
    e = np.asarray(estimate, dtype=np.float64)
    if r.shape != e.shape:
        raise ValueError(f"shape mismatch {r.shape} vs {e.shape}")
    p_sig = float(np.sum(r**2))
    if p_sig == 0.0:
        raise ValueError("reference has zero power")
    p_err = float(np.sum((r - e) ** 2))
    if p_err == 0.0:
        return SNR_SENTINEL_DB
    return min(10.0 * np.log10(p_sig / p_err), SNR_SENTINEL_DB)


def reconstruction_snr_db(frames, codebooks: CodebookSet, cfg: RvqConfig) -> float:
    x = _as_frames(frames, codebooks.dim)
    if x.shape[0] == 0:
        raise ValueError("no frames")
    return snr_db(x, decode(encode(x, codebooks, cfg), codebooks))
