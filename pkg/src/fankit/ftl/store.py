"""On-disk log state: an append-only record file replayed on open, plus a roots file."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import FtlError
from .log import TransparencyLog
from .records import IssuanceOrder, Protest, SignedTreeRoot, WithdrawOrder
from .signing import DeveloperKeySet, RelayKey, SigningKey

RECORDS = "records.jsonl"
ROOTS = "roots.jsonl"
CONFIG = "log.json"
KEYS = "keys"


def canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


class LogStore:
    def __init__(self, root: Path):
        self.root = Path(root)

    @classmethod
    def create(cls, root, ftl_id="ftl0", depth=8, n_dev=3, threshold=2, n_relays=3, seed=None):
        root = Path(root)
        if (root / CONFIG).exists():
            raise FtlError(f"{root} already holds a log")
        (root / KEYS).mkdir(parents=True, exist_ok=True)
        sb = seed.encode() if isinstance(seed, str) else seed
        devset, devkeys = DeveloperKeySet.generate(n_dev, threshold, sb)
        ftl_key = SigningKey.from_seed(sb + b"/ftl/" + ftl_id.encode()) if sb else SigningKey()
        for i, k in enumerate(devkeys):
            (root / KEYS / f"dev-{i}.key").write_text(k.private_bytes().hex() + "\n")
        (root / KEYS / "ftl.key").write_text(ftl_key.private_bytes().hex() + "\n")
        relays = {}
        for i in range(n_relays):
            rk = RelayKey.from_seed(sb + b"/relay/" + bytes([i])) if sb else RelayKey()
            (root / KEYS / f"relay-{i}.pem").write_bytes(rk.private_pem())
            relays[rk.relay_id] = rk.public_bytes.hex()
        cfg = {"ftl_id": ftl_id, "depth": depth, "developers": devset.to_dict(), "relays": relays}
        (root / CONFIG).write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
        (root / RECORDS).touch()
        store = cls(root)
        log = store.open()
        return store, log

    def config(self):
        try:
            return json.loads((self.root / CONFIG).read_text())
        except FileNotFoundError:
            raise FtlError(f"no log at {self.root}; run 'fan ftl init' first") from None

    def dev_keys(self):
        return [SigningKey.from_private_bytes(bytes.fromhex(p.read_text().strip()))
                for p in sorted((self.root / KEYS).glob("dev-*.key"))]

    def relay_key(self, i: int) -> RelayKey:
        return RelayKey.from_pem((self.root / KEYS / f"relay-{i}.pem").read_bytes())

    def open(self) -> TransparencyLog:
        cfg = self.config()
        key = SigningKey.from_private_bytes(bytes.fromhex((self.root / KEYS / "ftl.key").read_text().strip()))
        log = TransparencyLog(cfg["ftl_id"], DeveloperKeySet.from_dict(cfg["developers"]), key,
                              cfg["depth"], {rid: bytes.fromhex(pub) for rid, pub in cfg["relays"].items()})
        for line in (self.root / RECORDS).read_text().splitlines():
            if line.strip():
                self._replay(log, json.loads(line))
        self._rewrite_roots(log)
        log.listeners.append(self._append)
        return log

    def _replay(self, log, rec):
        kind, body = rec["kind"], rec["body"]
        if kind == "issue":
            log.issue(IssuanceOrder.from_dict(body))
        elif kind == "withdraw":
            log.withdraw(WithdrawOrder.from_dict(body))
        elif kind == "protest":
            log.protest(Protest.from_dict(body))
        elif kind == "relay":
            log.register_relay(body["relay_id"], bytes.fromhex(body["pub"]))
        elif kind == "advance":
            log.advance(body["epoch"])
        else:
            raise FtlError(f"unknown record kind {kind!r}")

    def _append(self, kind, body):
        with open(self.root / RECORDS, "ab") as fh:
            fh.write(canonical_json({"kind": kind, "body": body}) + b"\n")
        if kind == "advance":
            self._rewrite_roots(self._log)

    def _rewrite_roots(self, log):
        self._log = log
        with open(self.root / ROOTS, "wb") as fh:
            for e in sorted(log.roots):
                fh.write(canonical_json(log.roots[e].to_dict()) + b"\n")


@dataclass
class ConsensusDocument:
    """Stand-in broadcast channel: per-log online flag and signed root for one epoch."""

    epoch: int = 0
    ftls: dict = field(default_factory=dict)  # ftl_id -> {"online": bool, "str": SignedTreeRoot}

    def publish(self, s: SignedTreeRoot, online=True):
        self.epoch = max(self.epoch, s.epoch)
        self.ftls[s.ftl_id] = {"online": online, "str": s}

    def online(self, ftl_id) -> bool:
        entry = self.ftls.get(ftl_id)
        return bool(entry and entry["online"])

    def root(self, ftl_id):
        entry = self.ftls.get(ftl_id)
        return entry["str"].root if entry else None

    def to_text(self) -> str:
        return json.dumps({"epoch": self.epoch, "ftls": {
            k: {"online": v["online"], "str": v["str"].to_dict()} for k, v in sorted(self.ftls.items())
        }}, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_text(cls, text):
        d = json.loads(text)
        return cls(d["epoch"], {k: {"online": v["online"], "str": SignedTreeRoot.from_dict(v["str"])}
                                for k, v in d["ftls"].items()})

    def save(self, path):
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path):
        return cls.from_text(Path(path).read_text())
