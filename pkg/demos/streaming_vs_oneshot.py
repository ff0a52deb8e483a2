"""Run the calibrated pipeline in both modes and print where the time goes.

    python demos/streaming_vs_oneshot.py [gpu|cpu]
"""

import sys

from lava_bench.signal_core import Waveform, silence, tone
from lava_bench.stream_pipeline import calibrated_config, compare_modes


def main(env: str = "gpu") -> None:
    utterance = Waveform.concat([tone(1.5, amplitude=0.5), silence(2.0, dither=1e-4)])
    one, stream = compare_modes(utterance, calibrated_config(env))
    print(f"{env.upper()} profile (seconds)")
    print(f"{'stage':<8}{'one-shot':>10}{'streaming':>11}")
    for name in ("asr_s", "llm_s", "tts_s", "total_s"):
        print(f"{name[:-2]:<8}{getattr(one, name):>10.4f}{getattr(stream, name):>11.4f}")
    print(f"speedup: {one.total_s / stream.total_s:.2f}x")


if __name__ == "__main__":
    main(*sys.argv[1:2])
