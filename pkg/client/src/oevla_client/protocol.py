"""Client side of the oe-vla-rpc/1 protocol.

run_client(endpoint, policy) dials a listening evaluator and serves one
session on the calling thread: answer the hello, then reset/step until
bye.  The evaluator always speaks first.

Everything the policy sees is decoded: instruction image segments and
observations arrive as (H, W, 3) uint8 arrays, not base64 blobs.  On the
way out, token replies are range-checked before they are sent; an
out-of-range id raises TokenRangeError here instead of reaching the
evaluator.  Error messages sent by the evaluator (for a rejected act,
say a truncated chunk) are recorded on the session and logged, and the
session keeps going, mirroring the evaluator's own behavior.

The codec constants are pinned to the values in PROTOCOL.md; the hello
handshake cross-checks them via codec_hash, so a client built against a
different layout refuses to run rather than mis-decode actions.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import socket
from dataclasses import dataclass, field

import numpy as np

from .png import decode_png

log = logging.getLogger("oevla_client")

PROTOCOL_VERSION = "oe-vla-rpc/1"
DEFAULT_TIMEOUT = 30.0

N_BINS = 256
VOCAB_SIZE = 152064
CHUNK_LEN = 5
ACTION_DIM = 7
TOKEN_LO = VOCAB_SIZE - N_BINS  # 151808; valid action tokens are [TOKEN_LO, VOCAB_SIZE)

CODEC = {
    "n_bins": N_BINS,
    "vocab_size": VOCAB_SIZE,
    "chunk_len": CHUNK_LEN,
    "action_dim": ACTION_DIM,
}
CODEC_HASH = hashlib.sha256(
    json.dumps(CODEC, sort_keys=True, separators=(",", ":")).encode()
).hexdigest()[:16]


class ClientError(RuntimeError):
    """Protocol-level failure; .code matches the wire error codes."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


class TokenRangeError(ClientError):
    """A policy tried to emit a token outside [TOKEN_LO, VOCAB_SIZE)."""

    def __init__(self, token: int):
        super().__init__(
            "non_action_token",
            f"token {token} outside [{TOKEN_LO}, {VOCAB_SIZE})",
        )
        self.token = token


class MissingHintsError(ClientError):
    """Raised by hint-dependent policies when the step has no debug block."""

    def __init__(self):
        super().__init__("no_hints", "this policy needs the evaluator's debug hints")


@dataclass
class Step:
    """One control cycle as the policy sees it."""

    obs: np.ndarray  # (H, W, 3) uint8, static view left, wrist view right
    proprio: list[float]
    step_index: int
    debug: dict | None = None


@dataclass
class SessionStats:
    resets: int = 0
    steps: int = 0
    errors: list[tuple[str, str]] = field(default_factory=list)  # (code, message)
    completed: bool = False  # True when the evaluator said bye


def _send(wfile, obj: dict) -> None:
    wfile.write((json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n").encode())
    wfile.flush()


def _recv(rfile) -> dict:
    line = rfile.readline()
    if not line:
        raise ClientError("closed", "evaluator closed the connection")
    try:
        obj = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ClientError("malformed", f"bad message line: {exc}") from exc
    if not isinstance(obj, dict) or "type" not in obj:
        raise ClientError("malformed", "message must be an object with a type")
    return obj


def decode_instruction(wire: dict) -> dict:
    """Inline base64 images -> pixel arrays; text passes through."""
    segments = []
    for seg in wire.get("segments", []):
        if "text" in seg:
            segments.append({"text": seg["text"]})
        elif "image_b64" in seg:
            segments.append({"image": decode_png(base64.b64decode(seg["image_b64"]))})
        else:
            raise ClientError("malformed", f"segment carries neither text nor image: {seg}")
    return {"form": wire.get("form"), "segments": segments}


def _act_message(reply) -> dict:
    """Normalize a policy's return value into an act message.

    Lists/tuples of ints are token replies and get range-checked here;
    anything array-like is a chunk, flattened row-major.  Length is NOT
    checked: the evaluator owns that contract and reports violations
    back, which is exactly what the adapter tests exercise.
    """
    if isinstance(reply, (list, tuple)) and all(isinstance(t, (int, np.integer)) for t in reply):
        tokens = [int(t) for t in reply]
        for t in tokens:
            if not TOKEN_LO <= t < VOCAB_SIZE:
                raise TokenRangeError(t)
        return {"type": "act", "tokens": tokens}
    chunk = np.asarray(reply, dtype=np.float64)
    return {"type": "act", "chunk": [float(v) for v in chunk.ravel()]}


def run_client(endpoint: str, policy, timeout: float = DEFAULT_TIMEOUT) -> SessionStats:
    """Serve one evaluation session; returns counters for the run.

    endpoint is "host:port" of a listening evaluator.  policy provides
    .name, .reset(instruction, sequence_id, reset_seed, subtask_index)
    and .act(step); act may raise ClientError to answer with a typed
    error instead of an act.
    """
    host, _, port = endpoint.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"endpoint must be host:port, got {endpoint!r}")
    sock = socket.create_connection((host, int(port)), timeout=timeout)
    sock.settimeout(timeout)
    rfile = sock.makefile("rb")
    wfile = sock.makefile("wb")
    try:
        return _session(rfile, wfile, policy)
    finally:
        for f in (rfile, wfile, sock):
            try:
                f.close()
            except OSError:
                pass


def _session(rfile, wfile, policy) -> SessionStats:
    stats = SessionStats()

    hello = _recv(rfile)
    if hello.get("type") != "hello" or hello.get("version") != PROTOCOL_VERSION:
        _send(wfile, {"type": "error", "code": "version_mismatch",
                      "message": f"this client speaks {PROTOCOL_VERSION}"})
        raise ClientError("version_mismatch", f"evaluator sent {hello!r}")
    if hello.get("codec_hash") != CODEC_HASH:
        _send(wfile, {"type": "error", "code": "codec_mismatch",
                      "message": f"client codec is {CODEC_HASH}"})
        raise ClientError("codec_mismatch",
                          f"evaluator codec {hello.get('codec_hash')!r} != {CODEC_HASH}")
    _send(wfile, {"type": "hello", "version": PROTOCOL_VERSION,
                  "name": getattr(policy, "name", policy.__class__.__name__)})

    sequence_id = None
    reset_seed = None
    while True:
        msg = _recv(rfile)
        mtype = msg["type"]

        if mtype == "error":
            code = msg.get("code", "?")
            text = msg.get("message", "")
            log.warning("evaluator rejected our act (%s): %s", code, text)
            stats.errors.append((code, text))
            continue

        if mtype == "bye":
            try:
                _send(wfile, {"type": "bye"})
            except OSError:
                pass
            stats.completed = True
            return stats

        if mtype == "reset":
            sequence_id = msg.get("sequence_id")
            reset_seed = msg.get("reset_seed")
            instruction = decode_instruction(msg.get("instruction", {}))
            policy.reset(instruction, sequence_id, reset_seed, msg.get("subtask_index", 0))
            stats.resets += 1
            _send(wfile, {"type": "ok"})
            continue

        if mtype == "step":
            step = Step(
                obs=decode_png(base64.b64decode(msg["obs_b64"])),
                proprio=list(msg.get("proprio", [])),
                step_index=msg.get("step_index", 0),
                debug=msg.get("debug"),
            )
            try:
                reply = _act_message(policy.act(step))
            except TokenRangeError as exc:
                # never transmit a bad token: tell the evaluator why no
                # act is coming, then fail loudly on this side
                try:
                    _send(wfile, {"type": "error", "code": exc.code, "message": str(exc)})
                except OSError:
                    pass
                raise
            except ClientError as exc:
                _send(wfile, {"type": "error", "code": exc.code, "message": str(exc)})
                continue
            stats.steps += 1
            _send(wfile, reply)
            continue

        _send(wfile, {"type": "error", "code": "malformed",
                      "message": f"unexpected message type {mtype!r}"})
        raise ClientError("malformed", f"unexpected message type {mtype!r}")
