"""Length-prefixed request/response front end for a log over a local stream socket.

Each message is a 4-byte big-endian length followed by a canonical JSON object.
Requests carry a ``kind``; responses carry ``ok`` and either a payload or ``error``.
"""

from __future__ import annotations

import json
import socket
import socketserver
import struct
import threading

from .errors import FtlError
from .records import IssuanceOrder, Protest, SignedTreeRoot, WithdrawOrder
from .store import canonical_json
from .tree import AuthenticationPath

MAX_MESSAGE = 64 << 20


def send_msg(sock, obj):
    body = canonical_json(obj)
    sock.sendall(struct.pack(">I", len(body)) + body)


def _recv_exact(sock, n):
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise EOFError("peer closed")
        buf += chunk
    return bytes(buf)


def recv_msg(sock):
    (n,) = struct.unpack(">I", _recv_exact(sock, 4))
    if n > MAX_MESSAGE:
        raise FtlError(f"message of {n} bytes exceeds limit")
    return json.loads(_recv_exact(sock, n))


def handle_request(log, req: dict, lock: threading.Lock) -> dict:
    kind = req.get("kind")
    if kind == "issue":
        with lock:
            o = log.issue(IssuanceOrder.from_dict(req["order"]))
        return {"name": o.name, "epoch": log.epoch}
    if kind == "withdraw":
        with lock:
            o = log.withdraw(WithdrawOrder.from_dict(req["order"]))
        return {"name": o.name, "withdrawn": True}
    if kind == "protest":
        with lock:
            out = log.protest(Protest.from_dict(req["protest"]))
        return {"accepted": out.accepted, "reason": out.reason.value,
                "evidence": out.evidence is not None}
    if kind == "get_proof_avail":
        return {"path": log.prove(req["name"], req.get("epoch")).to_dict()}
    if kind == "get_proof_absence":
        return {"path": log.prove_absent(req["name"], req.get("epoch")).to_dict()}
    if kind == "get_str":
        return {"str": log.signed_root(req.get("epoch")).to_dict()}
    if kind == "advance_epoch":
        with lock:
            s = log.advance(req.get("epoch"))
        return {"str": s.to_dict()}
    raise FtlError(f"unknown request kind {kind!r}")


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        while True:
            try:
                req = recv_msg(self.request)
            except (EOFError, ConnectionError):
                return
            try:
                resp = {"ok": True, **handle_request(self.server.log, req, self.server.lock)}
            except (FtlError, KeyError, ValueError, TypeError) as exc:
                resp = {"ok": False, "error": f"{type(exc).__name__}: {exc}"}
            send_msg(self.request, resp)


class FtlServer(socketserver.ThreadingMixIn, socketserver.UnixStreamServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, path, log):
        self.log = log
        self.lock = threading.Lock()
        super().__init__(str(path), _Handler)


def serve_in_thread(path, log) -> FtlServer:
    srv = FtlServer(path, log)
    threading.Thread(target=srv.serve_forever, daemon=True).start()
    return srv


class FtlClient:
    def __init__(self, path, timeout=10.0):
        self.sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        self.sock.settimeout(timeout)
        self.sock.connect(str(path))

    def request(self, kind, **body):
        send_msg(self.sock, {"kind": kind, **body})
        resp = recv_msg(self.sock)
        if not resp.pop("ok"):
            raise FtlError(resp["error"])
        return resp

    def proof(self, name, epoch=None) -> AuthenticationPath:
        return AuthenticationPath.from_dict(self.request("get_proof_avail", name=name, epoch=epoch)["path"])

    # the same read/write surface as a local TransparencyLog
    prove = proof

    def prove_absent(self, name, epoch=None) -> AuthenticationPath:
        return AuthenticationPath.from_dict(self.request("get_proof_absence", name=name, epoch=epoch)["path"])

    def signed_root(self, epoch=None) -> SignedTreeRoot:
        return SignedTreeRoot.from_dict(self.request("get_str", epoch=epoch)["str"])

    def issue(self, order: IssuanceOrder):
        return self.request("issue", order=order.to_dict())

    def withdraw(self, order: WithdrawOrder):
        return self.request("withdraw", order=order.to_dict())

    def protest(self, p: Protest):
        return self.request("protest", protest=p.to_dict())

    def advance(self, to_epoch=None) -> SignedTreeRoot:
        return SignedTreeRoot.from_dict(self.request("advance_epoch", epoch=to_epoch)["str"])

    def close(self):
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
