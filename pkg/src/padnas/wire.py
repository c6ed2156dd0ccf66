"""Client side of the external-evaluator wire protocol.

Newline-delimited JSON messages (UTF-8) over either a child process's
stdin/stdout or a TCP connection. Protocol version 1.

Engine -> evaluator:
    {"v": 1, "type": "hello", "seed": S, "space": {profile...}}
    {"v": 1, "id": N, "arch": ["op", ...]}
    {"v": 1, "type": "finetune", "epochs": E, "lr": L}
    {"v": 1, "type": "rebind", "space": {profile...}}
    {"v": 1, "type": "shutdown"}

Evaluator -> engine:
    {"v": 1, "type": "hello", "mode": "surrogate" | "tiny-train"}
    {"v": 1, "id": N, "acc": A}  or  {"v": 1, "id": N, "error": "msg"}
    {"v": 1, "type": "ack", "of": "finetune" | "rebind"}

Evaluation responses may arrive in any order and are matched by id.
Unanswered requests are re-sent (same id) up to ``max_retries`` times
after ``timeout_s`` each; a version mismatch anywhere is fatal.
"""
from __future__ import annotations

import json
import queue
import socket
import subprocess
import threading

PROTOCOL_VERSION = 1


class ProtocolError(RuntimeError):
    """Fatal wire-protocol violation (bad version, dead peer, timeout)."""


class EvaluationError(RuntimeError):
    """The evaluator answered a request with an error message."""


def encode(message: dict) -> bytes:
    return (json.dumps(message, sort_keys=True) + "\n").encode("utf-8")


def decode(line: bytes) -> dict:
    message = json.loads(line.decode("utf-8"))
    if not isinstance(message, dict):
        raise ProtocolError(f"expected a JSON object, got {type(message).__name__}")
    if message.get("v") != PROTOCOL_VERSION:
        raise ProtocolError(f"protocol version mismatch: {message.get('v')!r}")
    return message


class _Transport:
    def send_line(self, data: bytes) -> None:
        raise NotImplementedError

    def read_line(self) -> bytes:
        """Blocking read of one line; b"" on EOF."""
        raise NotImplementedError

    def close(self) -> None:
        raise NotImplementedError


class StdioTransport(_Transport):
    """Child process speaking the protocol on its stdin/stdout."""

    def __init__(self, cmd: list[str]):
        self.proc = subprocess.Popen(
            cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE, bufsize=0
        )

    def send_line(self, data: bytes) -> None:
        try:
            self.proc.stdin.write(data)
            self.proc.stdin.flush()
        except (BrokenPipeError, ValueError) as exc:
            raise ProtocolError(f"evaluator process is gone: {exc}") from None

    def read_line(self) -> bytes:
        return self.proc.stdout.readline()

    def close(self) -> None:
        for stream in (self.proc.stdin, self.proc.stdout):
            try:
                stream.close()
            except OSError:
                pass
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()


class TcpTransport(_Transport):
    def __init__(self, host: str, port: int, connect_timeout_s: float = 10.0):
        self.sock = socket.create_connection((host, port), timeout=connect_timeout_s)
        self.sock.settimeout(None)
        self._reader = self.sock.makefile("rb")

    def send_line(self, data: bytes) -> None:
        try:
            self.sock.sendall(data)
        except OSError as exc:
            raise ProtocolError(f"evaluator connection lost: {exc}") from None

    def read_line(self) -> bytes:
        return self._reader.readline()

    def close(self) -> None:
        try:
            self._reader.close()
        finally:
            self.sock.close()


class EvaluatorClient:
    """Thread-safe client; evaluations are matched by id, any arrival order."""

    def __init__(self, transport: _Transport, timeout_s: float = 30.0, max_retries: int = 2):
        self.transport = transport
        self.timeout_s = timeout_s
        self.max_retries = max_retries
        self._lock = threading.Lock()
        self._next_id = 0
        self._results: dict[int, dict] = {}
        self._inbox: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()
        self.peer_mode: str | None = None

    @classmethod
    def spawn(cls, cmd: list[str], **kwargs) -> "EvaluatorClient":
        return cls(StdioTransport(cmd), **kwargs)

    @classmethod
    def connect(cls, host: str, port: int, **kwargs) -> "EvaluatorClient":
        return cls(TcpTransport(host, port), **kwargs)

    def _read_loop(self) -> None:
        while True:
            try:
                line = self.transport.read_line()
            except (OSError, ValueError):
                self._inbox.put(ProtocolError("transport read failed"))
                return
            if not line:
                self._inbox.put(ProtocolError("evaluator closed the connection"))
                return
            if not line.strip():
                continue
            try:
                self._inbox.put(decode(line))
            except (json.JSONDecodeError, ProtocolError) as exc:
                self._inbox.put(ProtocolError(str(exc)))
                return

    def _next_message(self, timeout_s: float) -> dict:
        try:
            message = self._inbox.get(timeout=timeout_s)
        except queue.Empty:
            raise TimeoutError("evaluator response timed out") from None
        if isinstance(message, ProtocolError):
            raise message
        return message

    def _await_type(self, expected: str) -> dict:
        deadline_tries = self.max_retries + 1
        for _ in range(deadline_tries):
            try:
                message = self._next_message(self.timeout_s)
            except TimeoutError:
                continue
            if message.get("type") == expected:
                return message
            if "id" in message:
                self._results[message["id"]] = message
        raise ProtocolError(f"no {expected!r} message from evaluator")

    def hello(self, seed: int, space_profile: dict) -> str:
        with self._lock:
            self.transport.send_line(
                encode({"v": 1, "type": "hello", "seed": seed, "space": space_profile})
            )
            reply = self._await_type("hello")
            self.peer_mode = reply.get("mode", "unknown")
            return self.peer_mode

    def finetune(self, epochs: int, lr: float) -> None:
        with self._lock:
            self.transport.send_line(encode({"v": 1, "type": "finetune", "epochs": epochs, "lr": lr}))
            self._await_type("ack")

    def rebind(self, space_profile: dict) -> None:
        with self._lock:
            self.transport.send_line(encode({"v": 1, "type": "rebind", "space": space_profile}))
            self._await_type("ack")

    def evaluate(self, arch: list[str]) -> float:
        return self.evaluate_many([arch])[0]

    def evaluate_many(self, archs: list[list[str]]) -> list[float]:
        """Pipeline all requests, collect responses in any order."""
        with self._lock:
            ids = []
            for arch in archs:
                rid = self._next_id
                self._next_id += 1
                ids.append(rid)
            pending = {rid: arch for rid, arch in zip(ids, archs)}
            for rid in ids:
                self.transport.send_line(encode({"v": 1, "id": rid, "arch": pending[rid]}))
            for attempt in range(self.max_retries + 1):
                self._drain(pending)
                if not pending:
                    break
                if attempt < self.max_retries:
                    for rid in pending:  # re-send unanswered requests, same ids
                        self.transport.send_line(encode({"v": 1, "id": rid, "arch": pending[rid]}))
            if pending:
                raise ProtocolError(f"no response for request ids {sorted(pending)}")
            out = []
            for rid, arch in zip(ids, archs):
                message = self._results.pop(rid)
                if "error" in message:
                    raise EvaluationError(f"evaluator rejected {arch}: {message['error']}")
                acc = message.get("acc")
                if not isinstance(acc, (int, float)):
                    raise ProtocolError(f"malformed response for id {rid}: {message}")
                out.append(float(acc))
            return out

    def _drain(self, pending: dict) -> None:
        while pending:
            try:
                message = self._next_message(self.timeout_s)
            except TimeoutError:
                return
            rid = message.get("id")
            if rid in pending:
                self._results[rid] = message
                del pending[rid]

    def shutdown(self) -> None:
        try:
            self.transport.send_line(encode({"v": 1, "type": "shutdown"}))
        except ProtocolError:
            pass

    def close(self) -> None:
        self.shutdown()
        self.transport.close()
