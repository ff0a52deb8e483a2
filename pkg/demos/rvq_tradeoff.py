"""Fewer RVQ iterations: faster first chunk, noisier audio.

    python demos/rvq_tradeoff.py
"""

from lava_bench.latency_metrics import summarize
from lava_bench.quality_metrics import reference_snr
from lava_bench.rvq_codec import RvqConfig
from lava_bench.synth_stages import LatencyModel, default_codebooks, synth_tts, text_of_length

books = default_codebooks()
text = text_of_length(151)
model = LatencyModel(0.0, 2e-5)

print(f"{'config':<12}{'first chunk ms':>16}{'RTF':>8}{'SNR dB':>9}")
for q, padding in ((16, "none"), (16, "mean"), (16, "concat"), (20, "none"), (24, "none"), (32, "none")):
    cfg = RvqConfig(q, decoder_codebooks=32 if padding != "none" else None, padding=padding)
    res = synth_tts([text], books, cfg, 50, model)
    rep = summarize(res.trace)
    snr = reference_snr(res.reference_audio, res.audio)
    print(f"q={q} {padding:<7}{rep.first_chunk_latency_ms:>16.1f}{rep.rtf:>8.3f}{snr:>9.2f}")
