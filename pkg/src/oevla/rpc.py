"""Line-delimited JSON policy protocol, version oe-vla-rpc/1.

One JSON object per line, UTF-8.  The evaluation side always opens the
conversation, whichever end dialed the TCP connection:

    -> {"type": "hello", "version": "oe-vla-rpc/1", "codec": {...}, "codec_hash": h}
    <- {"type": "hello", "version": "oe-vla-rpc/1", "name": "..."}
    -> {"type": "reset", "sequence_id": s, "reset_seed": n, "subtask_index": k,
        "instruction": {"form": f, "segments": [{"text": t} | {"image_b64": b}]}}
    <- {"type": "ok"}
    -> {"type": "step", "obs_b64": png, "proprio": [7 floats], "step_index": n}
    <- {"type": "act", "tokens": [35 ints]}        (or "chunk": [35 floats, row-major])
    ... more steps / resets ...
    -> {"type": "bye"}
    <- {"type": "bye"}

Version or codec-hash mismatch at hello aborts with an "error" message.
When an act is rejected (bad token, wrong count, non-finite values), the
evaluator sends an "error" message naming the failure class before moving
on, so the policy side can surface it with context.
When the evaluator runs with debug hints enabled, each step message gains a
"debug" object carrying the ground-truth task, the full world state, and the
scripted oracle's chunk, which lets a remote policy (or a bare echo) prove
the wire adds nothing: its scores must match the in-process equivalent
exactly.

A peer that takes longer than the timeout (default 30s) fails the current
subtask with reason "timeout".
"""

from __future__ import annotations

import base64
import json
import socket
import threading

import numpy as np

from .codec import CodecConfig, DEFAULT_CONFIG, config_hash
from .images import encode_png
from .policy import (
    BasePolicy,
    PolicyResponse,
    derive_policy_seed,
    oracle_act,
    random_chunk,
)
from .types import Instruction

PROTOCOL_VERSION = "oe-vla-rpc/1"
DEFAULT_TIMEOUT = 30.0
SERVER_POLICIES = ("random", "echo-oracle")


class ProtocolError(RuntimeError):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


def _send(wfile, obj: dict) -> None:
    line = json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"
    wfile.write(line.encode("utf-8"))
    wfile.flush()


def _recv(rfile, error_ok: bool = False) -> dict:
    try:
        line = rfile.readline()
    except TimeoutError:
        raise
    except OSError as exc:  # includes socket timeouts surfaced as OSError
        raise ProtocolError("io", str(exc)) from exc
    if not line:
        raise ProtocolError("closed", "peer closed the connection")
    try:
        obj = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError("malformed", f"bad message line: {exc}") from exc
    if not isinstance(obj, dict) or "type" not in obj:
        raise ProtocolError("malformed", "message must be an object with a type")
    if obj["type"] == "error" and not error_ok:
        raise ProtocolError(obj.get("code", "remote_error"), obj.get("message", ""))
    return obj


def wire_instruction(instruction: Instruction, store) -> dict:
    """Instruction with media inlined as base64 PNG, ready for the wire."""
    segments = []
    for seg in instruction.segments:
        if hasattr(seg, "text"):
            segments.append({"text": seg.text})
        else:
            data = store.get_bytes(seg.image_id)
            segments.append({"image_b64": base64.b64encode(data).decode("ascii")})
    return {"form": instruction.form.value, "segments": segments}


class RemotePolicy(BasePolicy):
    """Evaluator-side adapter: drives one remote policy over a byte pair."""

    def __init__(
        self,
        rfile,
        wfile,
        store,
        config: CodecConfig = DEFAULT_CONFIG,
        debug_hints: bool = False,
        owns=None,
    ):
        self.rfile = rfile
        self.wfile = wfile
        self.store = store
        self.config = config
        self.debug_hints = debug_hints
        self._owns = owns  # socket to close with the session
        self._sequence_id = None
        self._reset_seed = None
        _send(wfile, {
            "type": "hello",
            "version": PROTOCOL_VERSION,
            "codec": config.to_json(),
            "codec_hash": config_hash(config),
        })
        reply = _recv(rfile)
        if reply.get("type") != "hello" or reply.get("version") != PROTOCOL_VERSION:
            _send(wfile, {"type": "error", "code": "version_mismatch",
                          "message": f"need {PROTOCOL_VERSION}"})
            raise ProtocolError("version_mismatch", f"peer sent {reply!r}")

    @property
    def privileged(self):
        return self.debug_hints

    def begin_sequence(self, sequence_id, reset_seed):
        self._sequence_id = sequence_id
        self._reset_seed = reset_seed

    def begin_subtask(self, instruction, subtask_index):
        _send(self.wfile, {
            "type": "reset",
            "sequence_id": self._sequence_id,
            "reset_seed": self._reset_seed,
            "subtask_index": subtask_index,
            "instruction": wire_instruction(instruction, self.store),
        })
        reply = _recv(self.rfile)
        if reply.get("type") != "ok":
            raise ProtocolError("protocol", f"expected ok after reset, got {reply!r}")

    def act(self, request, state=None, task=None):
        msg = {
            "type": "step",
            "obs_b64": base64.b64encode(encode_png(request.obs)).decode("ascii"),
            "proprio": [float(v) for v in request.proprio],
            "step_index": request.step_index,
        }
        if self.debug_hints and state is not None and task is not None:
            msg["debug"] = {
                "task": task,
                "state": state.to_json(),
                "oracle_chunk": [float(v) for v in oracle_act(state, task).ravel()],
            }
        _send(self.wfile, msg)
        reply = _recv(self.rfile)
        if reply.get("type") != "act":
            raise ProtocolError("protocol", f"expected act, got {reply!r}")
        if "tokens" in reply:
            tokens = reply["tokens"]
            if not isinstance(tokens, list) or not all(isinstance(t, int) for t in tokens):
                raise ProtocolError("malformed", "tokens must be a list of ints")
            return PolicyResponse(tokens=tuple(tokens))
        if "chunk" in reply:
            flat = reply["chunk"]
            if not isinstance(flat, list) or len(flat) != 35:
                raise ProtocolError("malformed", "chunk must be 35 floats, row-major")
            arr = np.asarray(flat, dtype=np.float64).reshape(5, 7)
            return PolicyResponse(chunk=arr)
        raise ProtocolError("malformed", "act carries neither tokens nor chunk")

    def report_error(self, code: str, message: str) -> None:
        _send(self.wfile, {"type": "error", "code": code, "message": message})

    def close(self):
        try:
            _send(self.wfile, {"type": "bye"})
            self.rfile.readline()
        except Exception:
            pass
        for f in (self.rfile, self.wfile, self._owns):
            try:
                if f is not None:
                    f.close()
            except Exception:
                pass


def _open_socket_files(sock, timeout: float):
    sock.settimeout(timeout)
    return sock.makefile("rb"), sock.makefile("wb")


def connect_policy(
    host: str,
    port: int,
    store,
    config: CodecConfig = DEFAULT_CONFIG,
    debug_hints: bool = False,
    timeout: float = DEFAULT_TIMEOUT,
) -> RemotePolicy:
    """Dial a listening policy server."""
    sock = socket.create_connection((host, port), timeout=timeout)
    rfile, wfile = _open_socket_files(sock, timeout)
    return RemotePolicy(rfile, wfile, store, config, debug_hints, owns=sock)


class PolicyListener:
    """Evaluator-side listener for policies that dial out to us."""

    def __init__(self, port: int = 0, host: str = "127.0.0.1", timeout: float = DEFAULT_TIMEOUT):
        self.timeout = timeout
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self.sock.bind((host, port))
        self.sock.listen()
        self.port = self.sock.getsockname()[1]

    def accept_policy(self, store, config=DEFAULT_CONFIG, debug_hints=False) -> RemotePolicy:
        self.sock.settimeout(self.timeout)
        conn, _addr = self.sock.accept()
        rfile, wfile = _open_socket_files(conn, self.timeout)
        return RemotePolicy(rfile, wfile, store, config, debug_hints, owns=conn)

    def close(self):
        self.sock.close()


def handle_connection(rfile, wfile, policy_name: str, seed: int = 0,
                      config: CodecConfig = DEFAULT_CONFIG) -> None:
    """Policy side of the conversation, over any byte-file pair.

    Built-in behaviours: "random" draws the same chunks as the in-process
    random policy (same per-sequence seed derivation, same rng consumption),
    "echo-oracle" returns the oracle chunk from the debug hints.
    """
    if policy_name not in SERVER_POLICIES:
        raise ValueError(f"unknown server policy {policy_name!r}")
    try:
        hello = _recv(rfile)
    except ProtocolError:
        return
    if hello.get("type") != "hello" or hello.get("version") != PROTOCOL_VERSION:
        _send(wfile, {"type": "error", "code": "version_mismatch",
                      "message": f"this server speaks {PROTOCOL_VERSION}"})
        return
    if hello.get("codec_hash") != config_hash(config):
        _send(wfile, {"type": "error", "code": "codec_mismatch",
                      "message": "action codec configuration differs"})
        return
    _send(wfile, {"type": "hello", "version": PROTOCOL_VERSION, "name": policy_name})

    rng = np.random.default_rng(seed)
    current_sequence = None
    while True:
        try:
            msg = _recv(rfile, error_ok=True)
        except ProtocolError:
            return
        mtype = msg.get("type")
        if mtype == "error":
            continue  # evaluator explaining a rejected act; session goes on
        if mtype == "bye":
            try:
                _send(wfile, {"type": "bye"})
            except Exception:
                pass
            return
        if mtype == "reset":
            if msg.get("sequence_id") != current_sequence:
                current_sequence = msg.get("sequence_id")
                rng = np.random.default_rng(derive_policy_seed(seed, current_sequence))
            _send(wfile, {"type": "ok"})
            continue
        if mtype == "step":
            if policy_name == "random":
                chunk = random_chunk(rng)
                _send(wfile, {"type": "act", "chunk": [float(v) for v in chunk.ravel()]})
            else:  # echo-oracle
                debug = msg.get("debug")
                if not debug or "oracle_chunk" not in debug:
                    # stay in the session; the evaluator fails this subtask
                    # and may still reset for the next sequence
                    _send(wfile, {"type": "error", "code": "no_hints",
                                  "message": "echo-oracle needs debug hints enabled"})
                    continue
                _send(wfile, {"type": "act", "chunk": list(debug["oracle_chunk"])})
            continue
        _send(wfile, {"type": "error", "code": "malformed",
                      "message": f"unexpected message type {mtype!r}"})
        return


class RpcServer:
    """TCP policy server; each accepted connection gets its own thread."""

    def __init__(self, policy_name: str, seed: int = 0, host: str = "127.0.0.1",
                 port: int = 0, config: CodecConfig = DEFAULT_CONFIG):
        self.policy_name = policy_name
        self.seed = seed
        self.config = config
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self.sock.bind((host, port))
        self.sock.listen()
        self.port = self.sock.getsockname()[1]
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []

    def _handle(self, conn: socket.socket) -> None:
        rfile, wfile = _open_socket_files(conn, DEFAULT_TIMEOUT)
        try:
            handle_connection(rfile, wfile, self.policy_name, self.seed, self.config)
        finally:
            for f in (rfile, wfile, conn):
                try:
                    f.close()
                except Exception:
                    pass

    def serve(self, max_conns: int | None = None) -> None:
        served = 0
        self.sock.settimeout(0.2)
        while not self._stop.is_set():
            try:
                conn, _addr = self.sock.accept()
            except TimeoutError:
                continue
            except OSError:
                break
            t = threading.Thread(target=self._handle, args=(conn,), daemon=True)
            t.start()
            self._threads.append(t)
            served += 1
            if max_conns is not None and served >= max_conns:
                break
        for t in self._threads:
            t.join(timeout=DEFAULT_TIMEOUT)

    def start(self) -> threading.Thread:
        t = threading.Thread(target=self.serve, daemon=True)
        t.start()
        return t

    def stop(self) -> None:
        self._stop.set()
        try:
            self.sock.close()
        except Exception:
            pass


def serve_stdio(policy_name: str, seed: int = 0, config: CodecConfig = DEFAULT_CONFIG) -> None:
    import sys

    handle_connection(sys.stdin.buffer, sys.stdout.buffer, policy_name, seed, config)


def dial_out(host: str, port: int, policy_name: str, seed: int = 0,
             config: CodecConfig = DEFAULT_CONFIG, timeout: float = DEFAULT_TIMEOUT) -> None:
    """Policy side dials an evaluator that is listening (listen:PORT mode)."""
    sock = socket.create_connection((host, port), timeout=timeout)
    rfile, wfile = _open_socket_files(sock, timeout)
    try:
        handle_connection(rfile, wfile, policy_name, seed, config)
    finally:
        for f in (rfile, wfile, sock):
            try:
                f.close()
            except Exception:
                pass
