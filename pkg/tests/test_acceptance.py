"""Acceptance suite: one test per criterion, each reported as a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the summary lines
appear under "acceptance criteria" at the end of the run.
"""

import io
import string
from contextlib import redirect_stdout

import numpy as np
import pytest

from lava_bench.bench_cli import main as cli_main
from lava_bench.endpointing import EndpointConfig, detect_endpoint
from lava_bench.latency_metrics import StreamTrace, first_chunk_latency, inter_chunk_stats, rtf, underrun_report
from lava_bench.quality_metrics import reference_snr, wada_snr
from lava_bench.rvq_codec import CodebookSet, Padding, RvqConfig, encode_frame, pad_indices
from lava_bench.signal_core import Waveform, gen_gamma_signal, mix_at_snr, silence, tone, white_noise
from lava_bench.stream_pipeline import (
    PROFILE_TOTALS,
    TIME_PROFILE,
    Mode,
    PipelineConfig,
    StageModels,
    compare_modes,
    replay_profile,
)
from lava_bench.synth_stages import LatencyModel, default_chunk_frames, default_codebooks, synth_tts, text_of_length

Q_VALUES = (16, 20, 24, 32)


@pytest.fixture(scope="module")
def books():
    # 32 stages, K=64, D=16, seed 0
    cb = default_codebooks(16, 32, 64, 0)
    assert (cb.n_stages, cb.codebook_size, cb.dim) == (32, 64, 16)
    return cb


@pytest.fixture(scope="module")
def utterance():
    return Waveform.concat([tone(1.0, amplitude=0.5), silence(2.0, dither=1e-4)])


@pytest.mark.criterion(1, "time-profile replay totals", "1e-9 s", limit_s=1)
def test_criterion_01_profile_replay(criterion):
    assert len(TIME_PROFILE) == 4
    expected = {
        ("gpu", Mode.ONESHOT): 3.3253,
        ("gpu", Mode.STREAMING): 1.2835,
        ("cpu", Mode.ONESHOT): 5.4073,
        ("cpu", Mode.STREAMING): 3.8388,
    }
    assert PROFILE_TOTALS == expected
    for key, (asr, llm, tts) in TIME_PROFILE.items():
        prof = replay_profile(asr, llm, tts, key[1])
        assert abs(prof.total_s - expected[key]) <= 1e-9, key


def _random_models(rng):
    def m(fixed_hi, per_lo, per_hi):
        return LatencyModel(float(rng.uniform(0, fixed_hi)), float(rng.uniform(per_lo, per_hi)))

    return StageModels(asr=m(1.0, 0.0, 0.5), llm=m(1.0, 1e-4, 0.05), tts=m(0.5, 0.0, 1e-4))


@pytest.mark.criterion(2, "streaming beats one-shot on random configs", "strict <, 100% of runs", limit_s=10)
def test_criterion_02_streaming_dominance(criterion, utterance, books):
    rng = np.random.default_rng(2)
    strict = 0
    # token counts stay moderate: every flush really runs the codec, and the
    # run has a 10 s budget
    for _ in range(105):
        every = int(rng.integers(1, 16))
        cfg = PipelineConfig(
            models=_random_models(rng),
            flush_every_tokens=every,
            n_tokens=int(rng.integers(max(11, every + 1), 50)),
            rvq=RvqConfig(int(rng.choice(Q_VALUES))),
            chunk_frames=int(rng.integers(10, 3000)),
            seed=int(rng.integers(1000)),
            cold_start=False,
        )
        one, stream = compare_modes(utterance, cfg, books)
        assert stream.total_s < one.total_s, cfg
        strict += 1
    equal = 0
    for _ in range(30):
        every = int(rng.integers(1, 40))
        cfg = PipelineConfig(
            models=_random_models(rng),
            flush_every_tokens=every,
            n_tokens=int(rng.integers(1, every + 1)),
            cold_start=False,
        )
        one, stream = compare_modes(utterance, cfg, books)
        assert stream.total_s == one.total_s, cfg
        equal += 1
    assert strict >= 100 and equal == 30


def _random_text(rng):
    alphabet = list(string.ascii_letters + " .,!?'")
    return "".join(rng.choice(alphabet, int(rng.integers(20, 300))))


@pytest.mark.criterion(3, "reference SNR non-decreasing in q on 20+ texts", "zero inversions", limit_s=30)
def test_criterion_03_quality_monotone(criterion, books):
    rng = np.random.default_rng(3)
    model = LatencyModel(0.0, 2e-5)
    inversions = 0
    for _ in range(24):
        text = _random_text(rng)
        snrs = []
        for q in Q_VALUES:
            res = synth_tts([text], books, RvqConfig(q), default_chunk_frames(), model)
            snrs.append(reference_snr(res.reference_audio, res.audio))
        inversions += sum(b < a for a, b in zip(snrs, snrs[1:]))
    assert inversions == 0


@pytest.mark.criterion(4, "first-chunk latency strictly increasing in q", "strict", limit_s=5)
def test_criterion_04_latency_monotone(criterion, books):
    for model in (LatencyModel(0.0, 2e-5), LatencyModel(0.3, 1e-5), LatencyModel(0.05, 3e-4)):
        for text in (text_of_length(151), text_of_length(451)):
            lat = [
                first_chunk_latency(synth_tts([text], books, RvqConfig(q), 50, model).trace)
                for q in Q_VALUES
            ]
            assert all(b > a for a, b in zip(lat, lat[1:])), lat


@pytest.mark.criterion(5, "padding golden cases and identity property", "exact")
def test_criterion_05_padding(criterion):
    assert pad_indices([3, 5, 7, 9], 8, "mean") == [3, 5, 7, 9, 6, 6, 6, 6]
    assert pad_indices([3, 5], 5, "concat") == [3, 5, 3, 5, 3]
    rng = np.random.default_rng(5)
    for _ in range(1000):
        code = [int(v) for v in rng.integers(0, 64, int(rng.integers(1, 33)))]
        for strategy in Padding:
            assert pad_indices(code, len(code), strategy) == code


def _exhaustive_stage_search(frame, vectors, q):
    residual = [float(v) for v in frame]
    out = []
    for s in range(q):
        best, best_d = None, None
        for k in range(len(vectors[s])):
            d = 0.0
            for r, c in zip(residual, vectors[s][k]):
                d += (r - float(c)) ** 2
            if best_d is None or d < best_d:
                best, best_d = k, d
        out.append(best)
        residual = [r - float(c) for r, c in zip(residual, vectors[s][best])]
    return out


@pytest.mark.criterion(6, "codec equals exhaustive search for K<=8, D<=4, q<=4", "exact index equality")
def test_criterion_06_brute_force(criterion):
    rng = np.random.default_rng(6)
    instances = [(k, d, q) for k in range(2, 9) for d in range(1, 5) for q in range(1, 5)]
    n_frames = 0
    for i in range(1000):
        k, d, q = instances[i % len(instances)]
        if i % 2:
            # small integer grid: exact ties happen and must go to the lowest index
            cb = CodebookSet(rng.integers(-2, 3, size=(q, k, d)).astype(float))
            frame = rng.integers(-3, 4, size=d).astype(float)
        else:
            cb = CodebookSet(rng.normal(size=(q, k, d)))
            frame = rng.normal(size=d)
        assert encode_frame(frame, cb, q) == _exhaustive_stage_search(frame, cb.vectors.tolist(), q)
        n_frames += 1
    assert n_frames == 1000 and len(instances) == 7 * 4 * 4


@pytest.mark.criterion(7, "WADA-SNR recovers 0..30 dB mixtures", "+-3 dB, <=1 inversion over 10 seeds", limit_s=20)
def test_criterion_07_wada_recovery(criterion):
    targets = [0, 5, 10, 15, 20, 25, 30]
    inversions = 0
    worst = 0.0
    for seed in range(10):
        speech = gen_gamma_signal(100_000, 0.4, seed)
        noise = white_noise(100_000, 1000 + seed)
        est = [wada_snr(mix_at_snr(speech, noise, t)) for t in targets]
        worst = max(worst, max(abs(e - t) for e, t in zip(est, targets)))
        inversions += sum(b < a for a, b in zip(est, est[1:]))
    assert worst <= 3.0, worst
    assert inversions <= 1


@pytest.mark.criterion(8, "fast generation implies no underruns", "zero counterexamples")
def test_criterion_08_underrun_theorem(criterion):
    rng = np.random.default_rng(8)
    checked = 0
    for _ in range(2000):
        n = int(rng.integers(2, 40))
        durations = rng.uniform(0.01, 3.0, n)
        min_dur = durations.min()
        gaps = rng.uniform(0.0, 1.0, n - 1) * min_dur * (1 - 1e-9)
        arrivals = float(rng.uniform(0, 5)) + np.concatenate([[0.0], np.cumsum(gaps)])
        t = StreamTrace.from_pairs(zip(arrivals, durations))
        _, _, max_gap_ms = inter_chunk_stats(t)
        if max_gap_ms / 1000.0 < min_dur:
            assert underrun_report(t) == []
            checked += 1
    assert checked >= 1000


@pytest.mark.criterion(9, "endpoint after speech ending at 2.000 s", "3.500 s +- 30 ms")
def test_criterion_09_endpoint(criterion):
    cfg = EndpointConfig()
    w = Waveform.concat([tone(2.0, amplitude=0.5), silence(3.0, dither=1e-4)])
    end = detect_endpoint(w, cfg)
    # frame-quantized expectation: speech frame 66 ends at 67 * 0.03 = 2.01 s, plus 50 frames
    assert end == pytest.approx(67 * 0.030 + 50 * 0.030, abs=1e-9)
    assert abs(end - 3.500) <= 0.030


@pytest.mark.criterion(10, "RTF independent of text length; first chunk tracks length", "1e-9 RTF, 5% ratio")
def test_criterion_10_length_invariant_rtf(criterion, books):
    model = LatencyModel(0.0, 2e-5)
    for q in Q_VALUES:
        short = synth_tts([text_of_length(151)], books, RvqConfig(q), default_chunk_frames(), model)
        long = synth_tts([text_of_length(451)], books, RvqConfig(q), default_chunk_frames(), model)
        assert abs(rtf(short.trace) - rtf(long.trace)) <= 1e-9
        ratio = first_chunk_latency(long.trace) / first_chunk_latency(short.trace)
        assert abs(ratio / (451 / 151) - 1) <= 0.05


@pytest.mark.criterion(11, "sweep CSV byte-identical across runs", "byte-identical")
def test_criterion_11_sweep_determinism(criterion, monkeypatch):
    monkeypatch.delenv("LAVA_BENCH_SEED", raising=False)
    outputs = []
    for _ in range(2):
        buf = io.StringIO()
        with redirect_stdout(buf):
            assert cli_main(["sweep", "--clock", "virtual", "--seed", "0"]) == 0
        outputs.append(buf.getvalue().encode("utf-8"))
    assert outputs[0] == outputs[1]
    assert outputs[0].startswith(b"schema,lava-bench/sweep/v1\n")
