"""Line-JSON evaluation server (protocol version 1).

Speaks newline-delimited JSON over stdio or a TCP socket:

    -> {"v": 1, "type": "hello", "seed": S, "space": {...}}
    <- {"v": 1, "type": "hello", "mode": "surrogate"}
    -> {"v": 1, "id": N, "arch": ["op", ...]}
    <- {"v": 1, "id": N, "acc": A}          (or {"v":1,"id":N,"error":"..."})
    -> {"v": 1, "type": "finetune"|"rebind"|"shutdown", ...}
    <- {"v": 1, "type": "ack", "of": ...}

Requests are answered in arrival order unless ``reorder_window`` is set,
in which case evaluation responses are buffered and flushed in reverse
order (a deterministic out-of-order delivery for client testing).
Malformed lines that still carry an id get an error response; unparseable
lines produce a protocol-fault log on stderr. A version mismatch is fatal.
"""
from __future__ import annotations

import json
import socket
import sys

PROTOCOL_VERSION = 1


class VersionMismatch(Exception):
    pass


class EvalServer:
    def __init__(self, mode: str = "surrogate", seed: int = 0, reorder_window: int = 0):
        if mode not in ("surrogate", "tiny-train"):
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode
        self.seed = seed
        self.reorder_window = reorder_window
        self.layers: list[list[str]] | None = None
        self.model = None
        self._pending: list[dict] = []

    # -- message handling ------------------------------------------------

    def _layer_menus(self, space: dict) -> list[list[str]]:
        return [list(layer["candidates"]) for layer in space["layers"]]

    def _ensure_model(self) -> None:
        if self.mode == "tiny-train" and self.model is None and self.layers is not None:
            from .tiny_train import TinyTrainModel

            self.model = TinyTrainModel(self.seed, self.layers)

    def _evaluate(self, arch: list[str]) -> dict:
        if self.layers is not None:
            if len(arch) != len(self.layers):
                return {"error": f"architecture has {len(arch)} layers, expected {len(self.layers)}"}
            for j, op in enumerate(arch):
                if op not in self.layers[j]:
                    return {"error": f"unknown op id {op!r} at layer {j}"}
        if self.mode == "surrogate":
            from .surrogate import surrogate_accuracy

            return {"acc": surrogate_accuracy(self.seed, arch)}
        self._ensure_model()
        if self.model is None:
            return {"error": "no handshake: tiny-train needs the space profile"}
        return {"acc": self.model.evaluate(arch)}

    def handle(self, message: dict) -> list[dict]:
        """Replies for one message; may release buffered replies too."""
        if message.get("v") != PROTOCOL_VERSION:
            raise VersionMismatch(f"got protocol version {message.get('v')!r}")
        kind = message.get("type")
        if kind == "hello":
            self.seed = int(message.get("seed", self.seed))
            self.layers = self._layer_menus(message["space"]) if "space" in message else None
            self.model = None
            self._ensure_model()
            return [{"v": 1, "type": "hello", "mode": self.mode}]
        if kind == "finetune":
            out = self._flush()
            self._ensure_model()
            if self.model is not None:
                self.model.finetune(int(message.get("epochs", 0)), float(message.get("lr", 0.1)))
            out.append({"v": 1, "type": "ack", "of": "finetune"})
            return out
        if kind == "rebind":
            out = self._flush()
            self.layers = self._layer_menus(message["space"])
            if self.model is not None:
                self.model.rebind(self.layers)
            out.append({"v": 1, "type": "ack", "of": "rebind"})
            return out
        if kind == "shutdown":
            out = self._flush()
            out.append(None)  # sentinel: stop serving
            return out
        if "id" in message and "arch" in message and isinstance(message["arch"], list):
            reply = {"v": 1, "id": message["id"], **self._evaluate(message["arch"])}
            if self.reorder_window > 1:
                self._pending.append(reply)
                if len(self._pending) >= self.reorder_window:
                    return self._flush()
                return []
            return [reply]
        if "id" in message:
            return [{"v": 1, "id": message["id"], "error": "malformed request"}]
        return [{"v": 1, "type": "error", "error": f"unrecognized message {sorted(message)}"}]

    def _flush(self) -> list[dict]:
        out = list(reversed(self._pending))
        self._pending = []
        return out

    # -- transports --------------------------------------------------------

    def serve_stream(self, reader, writer) -> bool:
        """Serve one line stream; True means a shutdown message arrived."""
        while True:
            raw = reader.readline()  # no iterator: avoids read-ahead stalls on pipes
            if not raw:
                break
            if not raw.strip():
                continue
            try:
                message = json.loads(raw)
                if not isinstance(message, dict):
                    raise ValueError("not an object")
            except ValueError as exc:
                print(f"protocol-fault: unparseable line ({exc})", file=sys.stderr, flush=True)
                continue
            try:
                replies = self.handle(message)
            except VersionMismatch as exc:
                print(f"protocol-fault: {exc}", file=sys.stderr, flush=True)
                raise
            for reply in replies:
                if reply is None:
                    self._write(writer, self._flush())
                    return True
                self._write(writer, [reply])
        self._write(writer, self._flush())
        return False

    @staticmethod
    def _write(writer, replies: list[dict]) -> None:
        for reply in replies:
            writer.write((json.dumps(reply, sort_keys=True) + "\n").encode("utf-8"))
        writer.flush()

    def serve_stdio(self) -> None:
        self.serve_stream(sys.stdin.buffer, sys.stdout.buffer)

    def serve_tcp(self, host: str, port: int, ready_file=None) -> None:
        with socket.create_server((host, port)) as server:
            if ready_file is not None:
                print(server.getsockname()[1], file=ready_file, flush=True)
            while True:
                conn, _ = server.accept()
                with conn:
                    reader = conn.makefile("rb")
                    writer = conn.makefile("wb")
                    try:
                        done = self.serve_stream(reader, writer)
                    except VersionMismatch:
                        return
                    finally:
                        try:
                            writer.close()
                            reader.close()
                        except OSError:
                            pass
                    if done:
                        return
