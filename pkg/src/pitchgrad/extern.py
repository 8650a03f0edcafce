"""Subprocess wire protocol for external distance evaluators.

The harness is the client.  A worker process speaks newline-delimited
JSON over its standard streams: it announces itself with a single banner
line, then answers each request line with one response line, in order.

Banner:   {"protocol": "pitchgrad-extern", "version": 1, "name": "..."}
Request:  {"id": N, "sample_rate_hz": F, "target": [...], "prediction": [...]}
Response: {"id": N, "distance": D}  or  {"id": N, "error": "..."}

A timeout fails the single trial; a malformed line or an out-of-contract
distance (negative, NaN) aborts the session.
"""

from __future__ import annotations

import json
import math
import os
import select
import shlex
import subprocess
import time

import numpy as np

__all__ = [
    "PROTOCOL_NAME",
    "PROTOCOL_VERSION",
    "ExternError",
    "HandshakeError",
    "ProtocolError",
    "WorkerTimeout",
    "WorkerReportedError",
    "ExternSession",
]

PROTOCOL_NAME = "pitchgrad-extern"
PROTOCOL_VERSION = 1


class ExternError(RuntimeError):
    """Base class for extern-protocol failures."""


class HandshakeError(ExternError):
    """The worker's banner was missing, malformed, or incompatible."""


class ProtocolError(ExternError):
    """The session broke contract and has been aborted."""


class WorkerTimeout(ExternError):
    """One request timed out; the trial fails, the session is aborted."""


class WorkerReportedError(ExternError):
    """The worker answered a request with an error payload (trial error)."""


class ExternSession:
    """One worker process; requests are serialized with increasing ids."""

    def __init__(self, cmd, timeout_s: float = 30.0,
                 handshake_timeout_s: float | None = None,
                 name_hint: str | None = None):
        argv = shlex.split(cmd) if isinstance(cmd, str) else list(cmd)
        self._proc = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=None,
        )
        self._timeout_s = float(timeout_s)
        # model loading can dominate startup; keep a generous floor
        self._handshake_timeout_s = (float(handshake_timeout_s)
                                     if handshake_timeout_s is not None
                                     else max(self._timeout_s, 10.0))
        self._buf = b""
        self._next_id = 1
        self._closed = False
        self.worker_name = name_hint
        try:
            self._handshake()
        except Exception:
            self.close()
            raise

    # line transport ----------------------------------------------------

    def _read_line(self, timeout_s: float) -> bytes:
        deadline = time.monotonic() + timeout_s
        fd = self._proc.stdout.fileno()
        while True:
            nl = self._buf.find(b"\n")
            if nl >= 0:
                line, self._buf = self._buf[:nl], self._buf[nl + 1:]
                return line
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise WorkerTimeout(
                    f"no response from worker within {timeout_s:g}s")
            ready, _, _ = select.select([fd], [], [], min(remaining, 0.5))
            if not ready:
                if self._proc.poll() is not None and not self._buf:
                    raise ProtocolError("worker exited before responding")
                continue
            chunk = os.read(fd, 1 << 16)
            if not chunk:
                raise ProtocolError("worker closed its output stream")
            self._buf += chunk

    def _write_line(self, text: str):
        try:
            self._proc.stdin.write(text.encode("utf-8") + b"\n")
            self._proc.stdin.flush()
        except BrokenPipeError as exc:
            raise ProtocolError("worker closed its input stream") from exc

    # protocol ----------------------------------------------------------

    def _handshake(self):
        try:
            line = self._read_line(self._handshake_timeout_s)
        except WorkerTimeout as exc:
            raise HandshakeError(str(exc)) from exc
        except ProtocolError as exc:
            raise HandshakeError(str(exc)) from exc
        try:
            banner = json.loads(line)
        except json.JSONDecodeError as exc:
            raise HandshakeError(f"malformed banner: {line[:200]!r}") from exc
        if not isinstance(banner, dict) or banner.get("protocol") != PROTOCOL_NAME:
            raise HandshakeError(f"unexpected banner: {banner!r}")
        if banner.get("version") != PROTOCOL_VERSION:
            raise HandshakeError(
                f"protocol version mismatch: worker speaks "
                f"{banner.get('version')!r}, client speaks {PROTOCOL_VERSION}")
        self.worker_name = str(banner.get("name", self.worker_name or "unnamed"))

    def distance(self, target, prediction,
                 sample_rate_hz: float = 44100.0) -> float:
        """One request/response round trip; returns the worker's distance."""
        if self._closed:
            raise ProtocolError("session is closed")
        target = np.asarray(target, dtype=np.float64)
        prediction = np.asarray(prediction, dtype=np.float64)
        if target.shape != prediction.shape:
            raise ValueError("target and prediction must have equal lengths")
        req_id = self._next_id
        self._next_id += 1
        self._write_line(json.dumps({
            "id": req_id,
            "sample_rate_hz": sample_rate_hz,
            "target": target.tolist(),
            "prediction": prediction.tolist(),
        }))
        try:
            line = self._read_line(self._timeout_s)
        except (WorkerTimeout, ProtocolError):
            self.close()
            raise
        try:
            resp = json.loads(line)
        except json.JSONDecodeError as exc:
            self.close()
            raise ProtocolError(f"malformed response: {line[:200]!r}") from exc
        if not isinstance(resp, dict) or resp.get("id") != req_id:
            self.close()
            raise ProtocolError(
                f"response id {resp.get('id') if isinstance(resp, dict) else None!r}"
                f" does not match request id {req_id}")
        if "error" in resp:
            raise WorkerReportedError(str(resp["error"]))
        d = resp.get("distance")
        if not isinstance(d, (int, float)) or not math.isfinite(d) or d < 0.0:
            self.close()
            raise ProtocolError(f"distance out of contract: {d!r}")
        return float(d)

    @property
    def requests_sent(self) -> int:
        return self._next_id - 1

    def close(self):
        if self._closed:
            return
        self._closed = True
        try:
            if self._proc.stdin:
                self._proc.stdin.close()
        except OSError:
            pass
        try:
            self._proc.wait(timeout=5.0)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False
