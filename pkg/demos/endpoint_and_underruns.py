"""Energy endpointing on a synthetic turn, then a playback check on a trace.

    python demos/endpoint_and_underruns.py
"""

from lava_bench.endpointing import detect_endpoint
from lava_bench.latency_metrics import StreamTrace, summarize, underrun_report
from lava_bench.signal_core import Waveform, silence, tone

turn = Waveform.concat([silence(0.5, dither=1e-4), tone(1.5, amplitude=0.4), silence(3.0, dither=1e-4)])
print(f"speech ends at 2.00 s, endpoint fires at {detect_endpoint(turn):.3f} s")

smooth = StreamTrace.from_pairs([(0.6, 1.0), (1.2, 1.0), (1.9, 1.0), (2.5, 1.0)])
bursty = StreamTrace.from_pairs([(0.6, 0.5), (0.9, 0.5), (2.4, 0.5), (2.6, 0.5)])
for name, trace in (("smooth", smooth), ("bursty", bursty)):
    rep = summarize(trace)
    late = underrun_report(trace)
    print(f"{name}: first chunk {rep.first_chunk_latency_ms:.0f} ms, RTF {rep.rtf:.2f}, underruns {late}")
