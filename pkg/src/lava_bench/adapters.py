"""Line-delimited JSON bridge to external ASR/LLM/TTS engines.

An engine is any program that reads one JSON request per line on stdin
and answers with one JSON response per line on stdout, in order::

    -> {"id": 1, "stage": "asr", "payload": {"sample_rate_hz": 24000, "pcm16_b64": "..."}}
    <- {"id": 1, "ok": true, "result": {"text": "hello there"}}

    -> {"id": 2, "stage": "llm", "payload": {"text": "...", "context": ["..."]}}
    <- {"id": 2, "ok": true, "result": {"tokens": ["Sure", ",", " I", " can"]}}

    -> {"id": 3, "stage": "tts", "payload": {"text": "Sure, I can"}}
    <- {"id": 3, "ok": true, "result": {"sample_rate_hz": 24000, "pcm16_b64": "..."}}

Failures answer ``{"id": n, "ok": false, "error": "message"}``. Audio travels
as base64 of little-endian 16-bit mono PCM. See docs/adapter_protocol.md.
"""

from __future__ import annotations

import base64
import json
import subprocess
import time
from typing import Sequence

import numpy as np

from .signal_core import Waveform, to_pcm16

PROTOCOL_VERSION = 1


class AdapterError(RuntimeError):
    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"{stage}: {message}")


def pcm16_b64(w: Waveform) -> str:
    return base64.b64encode(to_pcm16(w.samples).tobytes()).decode("ascii")


def waveform_from_b64(data: str, sample_rate_hz: int) -> Waveform:
    pcm = np.frombuffer(base64.b64decode(data), dtype="<i2")
    return Waveform(pcm.astype(np.float64) / 32768.0, sample_rate_hz)


class SubprocessStage:
    """A long-lived engine process spoken to over stdin/stdout.

    Each call returns ``(result, elapsed_s)`` with elapsed measured on the
    wall clock around the round trip.
    """

    def __init__(self, command: Sequence[str], timeout_s: float = 30.0):
        self.command = list(command)
        self.timeout_s = timeout_s
        self._next_id = 0
        self._proc = subprocess.Popen(
            self.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )

    def request(self, stage: str, payload: dict) -> tuple[dict, float]:
        if self._proc.poll() is not None:
            raise AdapterError(stage, f"engine exited with code {self._proc.returncode}")
        self._next_id += 1
        msg = {"id": self._next_id, "stage": stage, "payload": payload}
        t0 = time.perf_counter()
        self._proc.stdin.write(json.dumps(msg) + "\n")
        self._proc.stdin.flush()
        line = self._proc.stdout.readline()
        elapsed = time.perf_counter() - t0
        if not line:
            raise AdapterError(stage, "engine closed its output")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError:
            raise AdapterError(stage, f"malformed reply {line.strip()!r}") from None
        if reply.get("id") != self._next_id:
            raise AdapterError(stage, f"reply id {reply.get('id')} != request id {self._next_id}")
        if not reply.get("ok", False):
            raise AdapterError(stage, str(reply.get("error", "unknown error")))
        return reply.get("result", {}), elapsed

    def transcribe(self, w: Waveform) -> tuple[str, float]:
        res, dt = self.request("asr", {"sample_rate_hz": w.sample_rate_hz, "pcm16_b64": pcm16_b64(w)})
        return str(res["text"]), dt

    def generate(self, text: str, context: Sequence[str] = ()) -> tuple[list[str], float]:
        res, dt = self.request("llm", {"text": text, "context": list(context)})
        return [str(t) for t in res["tokens"]], dt

    def synthesize(self, text: str) -> tuple[Waveform, float]:
        res, dt = self.request("tts", {"text": text})
        return waveform_from_b64(res["pcm16_b64"], int(res["sample_rate_hz"])), dt

    def close(self) -> None:
        if self._proc.poll() is None:
            self._proc.stdin.close()
            try:
                self._proc.wait(timeout=self.timeout_s)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
