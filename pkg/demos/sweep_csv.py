"""Reduced sweep through the CLI entry point, written to stdout as CSV.

    python demos/sweep_csv.py
"""

from lava_bench.bench_cli import main

raise SystemExit(main(["sweep", "--q", "16", "32", "--padding", "none", "mean", "--text", "short=151"]))
