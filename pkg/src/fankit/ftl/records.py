"""Log records and their canonical byte encodings.

Every hashed or signed structure has exactly one byte form: fields in a fixed
order, each prefixed by its 4-byte big-endian length.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import Optional

from .errors import DecodeError


def H(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def lp(b: bytes) -> bytes:
    return len(b).to_bytes(4, "big") + b


def u64(n: int) -> bytes:
    return int(n).to_bytes(8, "big")


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def take(self) -> bytes:
        if self.pos + 4 > len(self.data):
            raise DecodeError("truncated length prefix")
        n = int.from_bytes(self.data[self.pos:self.pos + 4], "big")
        self.pos += 4
        if self.pos + n > len(self.data):
            raise DecodeError("truncated field")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u64(self) -> int:
        b = self.take()
        if len(b) != 8:
            raise DecodeError("bad integer width")
        return int.from_bytes(b, "big")

    def count(self) -> int:
        if self.pos + 8 > len(self.data):
            raise DecodeError("truncated count")
        n = int.from_bytes(self.data[self.pos:self.pos + 8], "big")
        self.pos += 8
        if n > len(self.data):
            raise DecodeError("implausible count")
        return n

    def str(self) -> str:
        try:
            return self.take().decode()
        except UnicodeDecodeError:
            raise DecodeError("bad utf-8") from None

    def done(self):
        if self.pos != len(self.data):
            raise DecodeError("trailing bytes")


def _sigs_bytes(sigs) -> bytes:
    sigs = sorted(sigs)
    return u64(len(sigs)) + b"".join(lp(kid.encode()) + lp(s) for kid, s in sigs)


def _read_sigs(r: _Reader) -> tuple:
    return tuple((r.str(), r.take()) for _ in range(r.count()))


def issue_message(name: str, plugin_bytes: bytes, protest_epoch: int, push_epoch: int) -> bytes:
    return b"issue:" + lp(name.encode()) + lp(H(plugin_bytes)) + u64(protest_epoch) + u64(push_epoch)


def withdraw_message(name: str, epoch: int) -> bytes:
    return b"withdraw:" + lp(name.encode()) + u64(epoch)


def protest_message(relay_id: str, plugin_name: str) -> bytes:
    return f"{relay_id}:protest:{plugin_name}".encode()


@dataclass(frozen=True)
class Protest:
    relay_id: str
    plugin_name: str
    signature: bytes

    def message(self) -> bytes:
        return protest_message(self.relay_id, self.plugin_name)

    def to_dict(self):
        return {"relay_id": self.relay_id, "plugin_name": self.plugin_name,
                "signature": self.signature.hex()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["relay_id"], d["plugin_name"], bytes.fromhex(d["signature"]))


@dataclass(frozen=True)
class WithdrawOrder:
    name: str
    epoch: int
    signatures: tuple

    def message(self) -> bytes:
        return withdraw_message(self.name, self.epoch)

    def canonical(self) -> bytes:
        return lp(self.name.encode()) + lp(u64(self.epoch)) + lp(_sigs_bytes(self.signatures))

    def to_dict(self):
        return {"name": self.name, "epoch": self.epoch,
                "signatures": [[k, s.hex()] for k, s in self.signatures]}

    @classmethod
    def from_dict(cls, d):
        return cls(d["name"], d["epoch"], tuple((k, bytes.fromhex(s)) for k, s in d["signatures"]))


@dataclass(frozen=True)
class Meta:
    protest_epoch: int
    push_epoch: int
    signatures: tuple = ()
    withdraw: Optional[WithdrawOrder] = None
    protests: tuple = ()

    @property
    def withdrawn(self) -> bool:
        return self.withdraw is not None

    def canonical(self, name: str) -> bytes:
        protests = sorted(self.protests, key=lambda p: (p.relay_id, p.signature))
        plist = u64(len(protests)) + b"".join(lp(p.relay_id.encode()) + lp(p.signature) for p in protests)
        return b"".join([
            lp(name.encode()),
            lp(u64(self.protest_epoch)),
            lp(u64(self.push_epoch)),
            lp(_sigs_bytes(self.signatures)),
            lp(self.withdraw.canonical() if self.withdraw else b""),
            lp(plist),
        ])

    def to_dict(self):
        return {"protest_epoch": self.protest_epoch, "push_epoch": self.push_epoch,
                "signatures": [[k, s.hex()] for k, s in self.signatures],
                "withdraw": self.withdraw.to_dict() if self.withdraw else None,
                "protests": [p.to_dict() for p in self.protests]}

    @classmethod
    def from_dict(cls, d):
        return cls(d["protest_epoch"], d["push_epoch"],
                   tuple((k, bytes.fromhex(s)) for k, s in d["signatures"]),
                   WithdrawOrder.from_dict(d["withdraw"]) if d.get("withdraw") else None,
                   tuple(Protest.from_dict(p) for p in d.get("protests", ())))


def decode_meta(data: bytes):
    """Inverse of ``Meta.canonical``; returns (name, Meta)."""
    r = _Reader(data)
    name = r.str()
    pe = r.u64()
    pu = r.u64()
    sr = _Reader(r.take())
    sigs = _read_sigs(sr)
    sr.done()
    wraw = r.take()
    withdraw = None
    if wraw:
        wr = _Reader(wraw)
        wname = wr.str()
        wepoch = wr.u64()
        ws = _Reader(wr.take())
        withdraw = WithdrawOrder(wname, wepoch, _read_sigs(ws))
        ws.done()
        wr.done()
    pr = _Reader(r.take())
    protests = tuple(Protest(pr.str(), name, pr.take()) for _ in range(pr.count()))
    pr.done()
    r.done()
    return name, Meta(pe, pu, sigs, withdraw, protests)


@dataclass(frozen=True)
class IssuanceOrder:
    name: str
    plugin_bytes: bytes
    meta: Meta

    def message(self) -> bytes:
        return issue_message(self.name, self.plugin_bytes, self.meta.protest_epoch, self.meta.push_epoch)

    def meta_bytes(self) -> bytes:
        return self.meta.canonical(self.name)

    def digest(self) -> bytes:
        return record_digest(self.plugin_bytes, self.meta_bytes())

    def with_meta(self, **changes) -> "IssuanceOrder":
        return replace(self, meta=replace(self.meta, **changes))

    def to_dict(self):
        return {"name": self.name, "plugin": self.plugin_bytes.hex(), "meta": self.meta.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["name"], bytes.fromhex(d["plugin"]), Meta.from_dict(d["meta"]))


def record_digest(plugin_bytes: bytes, meta_bytes: bytes) -> bytes:
    return H(plugin_bytes + b"\x00" + meta_bytes)


def record_bytes(name: str, digest: bytes) -> bytes:
    return name.encode() + b"\x00" + digest


@dataclass(frozen=True)
class SignedTreeRoot:
    ftl_id: str
    epoch: int
    root: bytes
    depth: int
    signature: bytes = b""
    signer: bytes = field(default=b"", compare=False)

    def message(self) -> bytes:
        return b"str:" + lp(self.ftl_id.encode()) + u64(self.epoch) + lp(self.root) + u64(self.depth)

    def to_dict(self):
        return {"ftl_id": self.ftl_id, "epoch": self.epoch, "root": self.root.hex(),
                "depth": self.depth, "signature": self.signature.hex(), "signer": self.signer.hex()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["ftl_id"], d["epoch"], bytes.fromhex(d["root"]), d["depth"],
                   bytes.fromhex(d["signature"]), bytes.fromhex(d.get("signer", "")))
