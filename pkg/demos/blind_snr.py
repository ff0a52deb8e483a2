"""Blind WADA-SNR on gamma-distributed "speech" mixed with white noise.

    python demos/blind_snr.py
"""

from lava_bench.quality_metrics import wada_snr
from lava_bench.signal_core import gen_gamma_signal, mix_at_snr, white_noise

speech = gen_gamma_signal(100_000, 0.4, 1)
noise = white_noise(100_000, 2)
print(f"{'true dB':>8}{'estimate dB':>13}")
for target in range(0, 35, 5):
    print(f"{target:>8}{wada_snr(mix_at_snr(speech, noise, target)):>13.2f}")
