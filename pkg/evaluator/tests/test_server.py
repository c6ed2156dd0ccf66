import io
import json
import socket
import subprocess
import sys
import threading

import pytest

from padnas_evaluator import EvalServer, VersionMismatch, surrogate_accuracy

SPACE = {
    "layers": [
        {"stage": "L0", "allows_identity": False, "fixed_expansion_one": False,
         "candidates": ["IBConv_K3_E3", "IBConv_K5_E3"]},
        {"stage": "L1", "allows_identity": True, "fixed_expansion_one": False,
         "candidates": ["IBConv_K3_E3", "Identity"]},
    ],
    "catalog": {
        "IBConv_K3_E3": {"kernel": 3, "expansion": 3, "is_identity": False},
        "IBConv_K5_E3": {"kernel": 5, "expansion": 3, "is_identity": False},
        "Identity": {"kernel": None, "expansion": None, "is_identity": True},
    },
}


def run_lines(server, messages):
    raw = "".join(json.dumps(m) + "\n" for m in messages).encode()
    out = io.BytesIO()
    server.serve_stream(io.BytesIO(raw), out)
    return [json.loads(line) for line in out.getvalue().decode().splitlines()]


def hello(seed=5):
    return {"v": 1, "type": "hello", "seed": seed, "space": SPACE}


def test_hello_and_eval_round_trip():
    server = EvalServer()
    replies = run_lines(server, [
        hello(),
        {"v": 1, "id": 0, "arch": ["IBConv_K3_E3", "Identity"]},
    ])
    assert replies[0] == {"v": 1, "type": "hello", "mode": "surrogate"}
    assert replies[1]["id"] == 0
    assert replies[1]["acc"] == surrogate_accuracy(5, ["IBConv_K3_E3", "Identity"])


def test_same_arch_same_value_across_restarts():
    arch = ["IBConv_K5_E3", "IBConv_K3_E3"]
    vals = []
    for _ in range(2):
        server = EvalServer()
        replies = run_lines(server, [hello(9), {"v": 1, "id": 1, "arch": arch}])
        vals.append(replies[1]["acc"])
    assert vals[0] == vals[1]


def test_unknown_op_and_bad_length_get_error_responses():
    server = EvalServer()
    replies = run_lines(server, [
        hello(),
        {"v": 1, "id": 3, "arch": ["nope", "Identity"]},
        {"v": 1, "id": 4, "arch": ["IBConv_K3_E3"]},
        {"v": 1, "id": 5},
    ])
    assert "unknown op" in replies[1]["error"] and replies[1]["id"] == 3
    assert "expected 2" in replies[2]["error"]
    assert replies[3]["error"] == "malformed request"


def test_unparseable_line_logs_and_continues(capsys):
    server = EvalServer()
    raw = b'{"v": 1, "type": "hello", "seed": 1, "space": ' + json.dumps(SPACE).encode() + b"}\n"
    raw += b"this is not json\n"
    raw += b'{"v": 1, "id": 7, "arch": ["IBConv_K3_E3", "Identity"]}\n'
    out = io.BytesIO()
    server.serve_stream(io.BytesIO(raw), out)
    replies = [json.loads(l) for l in out.getvalue().decode().splitlines()]
    assert len(replies) == 2
    assert replies[1]["id"] == 7
    assert "protocol-fault" in capsys.readouterr().err


def test_version_mismatch_is_fatal():
    server = EvalServer()
    with pytest.raises(VersionMismatch):
        run_lines(server, [{"v": 2, "type": "hello", "seed": 0}])


def test_reorder_window_reverses_batches():
    server = EvalServer(reorder_window=3)
    archs = [["IBConv_K3_E3", "Identity"], ["IBConv_K5_E3", "Identity"],
             ["IBConv_K3_E3", "IBConv_K3_E3"]]
    messages = [hello()] + [{"v": 1, "id": i, "arch": a} for i, a in enumerate(archs)]
    replies = run_lines(server, messages)
    assert [r["id"] for r in replies[1:]] == [2, 1, 0]
    for i, arch in enumerate(archs):
        reply = next(r for r in replies[1:] if r["id"] == i)
        assert reply["acc"] == surrogate_accuracy(5, arch)


def test_directives_flush_pending_and_ack():
    server = EvalServer(reorder_window=10)
    replies = run_lines(server, [
        hello(),
        {"v": 1, "id": 0, "arch": ["IBConv_K3_E3", "Identity"]},
        {"v": 1, "type": "finetune", "epochs": 3, "lr": 0.1},
        {"v": 1, "type": "rebind", "space": SPACE},
        {"v": 1, "type": "shutdown"},
    ])
    kinds = [(r.get("type"), r.get("id")) for r in replies]
    assert kinds[0] == ("hello", None)
    assert kinds[1] == (None, 0)  # flushed before the ack
    assert kinds[2] == ("ack", None)
    assert kinds[3] == ("ack", None)


def test_stdio_subprocess_round_trip():
    proc = subprocess.Popen(
        [sys.executable, "-m", "padnas_evaluator", "--mode", "surrogate"],
        stdin=subprocess.PIPE, stdout=subprocess.PIPE,
    )
    try:
        msgs = [hello(11), {"v": 1, "id": 0, "arch": ["IBConv_K3_E3", "Identity"]},
                {"v": 1, "type": "shutdown"}]
        data = "".join(json.dumps(m) + "\n" for m in msgs).encode()
        out, _ = proc.communicate(data, timeout=30)
        replies = [json.loads(l) for l in out.decode().splitlines()]
        assert replies[1]["acc"] == surrogate_accuracy(11, ["IBConv_K3_E3", "Identity"])
    finally:
        proc.kill()


def test_tcp_round_trip():
    server = EvalServer(mode="surrogate")
    sock = socket.create_server(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.close()

    thread = threading.Thread(target=server.serve_tcp, args=("127.0.0.1", port), daemon=True)
    thread.start()
    for _ in range(50):
        try:
            conn = socket.create_connection(("127.0.0.1", port), timeout=0.2)
            break
        except OSError:
            import time

            time.sleep(0.05)
    with conn:
        f = conn.makefile("rwb")
        for msg in (hello(13), {"v": 1, "id": 2, "arch": ["IBConv_K5_E3", "Identity"]},
                    {"v": 1, "type": "shutdown"}):
            f.write((json.dumps(msg) + "\n").encode())
        f.flush()
        replies = [json.loads(f.readline()) for _ in range(2)]
    assert replies[1]["acc"] == surrogate_accuracy(13, ["IBConv_K5_E3", "Identity"])
    thread.join(timeout=5)
    assert not thread.is_alive()


def test_tiny_train_mode_trains_and_inherits():
    pytest.importorskip("sklearn")
    server = EvalServer(mode="tiny-train", seed=3)
    arch = ["IBConv_K3_E3", "Identity"]
    replies = run_lines(server, [
        hello(3),
        {"v": 1, "id": 0, "arch": arch},
        {"v": 1, "type": "finetune", "epochs": 10, "lr": 0.3},
        {"v": 1, "id": 1, "arch": arch},
    ])
    before = replies[1]["acc"]
    after = replies[3]["acc"]
    assert 0.0 <= before <= 1.0 and 0.0 <= after <= 1.0
    assert after > before  # training on digits beats random init

    pruned = {
        "layers": [
            {"stage": "L0", "allows_identity": False, "fixed_expansion_one": False,
             "candidates": ["IBConv_K3_E3"]},
            {"stage": "L1", "allows_identity": True, "fixed_expansion_one": False,
             "candidates": ["IBConv_K3_E3", "Identity"]},
        ],
        "catalog": SPACE["catalog"],
    }
    replies2 = run_lines(server, [
        {"v": 1, "type": "rebind", "space": pruned},
        {"v": 1, "id": 2, "arch": arch},
    ])
    assert replies2[1]["acc"] == after  # weights inherited, no retraining yet
