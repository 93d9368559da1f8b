"""Transparency log lifecycle: issuance, withdrawal, protests, epochs, signed roots."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional

from .errors import DuplicateName, EpochError, InvalidSignature, UnknownPlugin
from .records import (IssuanceOrder, Meta, Protest, SignedTreeRoot, WithdrawOrder, decode_meta,
                      issue_message, protest_message, withdraw_message)
from .signing import DeveloperKeySet, SigningKey, ecdsa_verify, ed25519_verify, multisign
from .tree import AuthenticationPath, NameStructuredTree, build_tree, prove_absence, \
    prove_availability, recompute_root, verify_path


class ProtestReason(str, enum.Enum):
    ACCEPTED = "Accepted"
    TOO_LATE = "TooLate"
    BAD_SIGNATURE = "BadSignature"
    UNKNOWN_RELAY = "UnknownRelay"
    WRONG_PLUGIN = "WrongPlugin"
    REPLAYED = "Replayed"
    CONFLICTING = "ConflictingSignature"


@dataclass(frozen=True)
class ProtestOutcome:
    accepted: bool
    reason: ProtestReason
    order: IssuanceOrder
    evidence: Optional[tuple] = None  # (counted protest, conflicting protest)


def record_protest(p: Protest, current_epoch: int, order: IssuanceOrder, relay_keys: dict) -> ProtestOutcome:
    """Validate a relay protest against ``order``; returns the (possibly updated) order."""
    def no(reason, evidence=None):
        return ProtestOutcome(False, reason, order, evidence)

    if p.plugin_name != order.name:
        return no(ProtestReason.WRONG_PLUGIN)
    pub = relay_keys.get(p.relay_id)
    if pub is None:
        return no(ProtestReason.UNKNOWN_RELAY)
    if not ecdsa_verify(pub, p.signature, p.message()):
        return no(ProtestReason.BAD_SIGNATURE)
    if current_epoch > order.meta.protest_epoch:
        return no(ProtestReason.TOO_LATE)
    prior = next((q for q in order.meta.protests if q.relay_id == p.relay_id), None)
    if prior is not None:
        if prior.signature == p.signature:
            return no(ProtestReason.REPLAYED)
        return no(ProtestReason.CONFLICTING, (prior, p))
    updated = order.with_meta(protests=order.meta.protests + (p,))
    return ProtestOutcome(True, ProtestReason.ACCEPTED, updated)


def make_protest(relay_key, plugin_name: str) -> Protest:
    msg = protest_message(relay_key.relay_id, plugin_name)
    return Protest(relay_key.relay_id, plugin_name, relay_key.sign(msg))


def detect_equivocation(strs) -> Optional[tuple]:
    """First pair of signed roots for one (log, epoch) that disagree, or None."""
    seen = {}
    for s in strs:
        key = (s.ftl_id, s.epoch)
        first = seen.setdefault(key, s)
        if first.root != s.root:
            return first, s
    return None


def verify_str(s: SignedTreeRoot, pub_bytes: bytes | None = None) -> bool:
    return ed25519_verify(pub_bytes or s.signer, s.signature, s.message())


class GateReason(str, enum.Enum):
    ADMIT = "Admit"
    FTL_OFFLINE = "FtlOffline"
    PUSH_EPOCH_FUTURE = "PushEpochFuture"
    BAD_PROOF = "BadProof"
    WITHDRAWN = "Withdrawn"
    ROOT_MISMATCH = "RootMismatch"


@dataclass(frozen=True)
class GateDecision:
    admitted: bool
    reason: GateReason

    def __bool__(self):
        return self.admitted


def load_gate(path: AuthenticationPath, order: Optional[IssuanceOrder], current_epoch: int,
              broadcast_root: bytes, ftl_online: bool) -> GateDecision:
    """Admit iff the log is online, the push epoch has arrived, the proof checks
    out, the plugin is not withdrawn and the proof's root is the broadcast one.
    Denials name the first failing condition in that order."""
    def deny(r):
        return GateDecision(False, r)

    if not ftl_online:
        return deny(GateReason.FTL_OFFLINE)
    meta = None
    if order is not None:
        meta = order.meta
    elif path.meta_bytes is not None:
        try:
            meta = decode_meta(path.meta_bytes)[1]
        except Exception:
            meta = None
    if meta is None:
        return deny(GateReason.BAD_PROOF)
    if meta.push_epoch > current_epoch:
        return deny(GateReason.PUSH_EPOCH_FUTURE)
    proof_ok = path.kind == "availability" and verify_path(path, path.root, path.depth)
    if proof_ok and order is not None:
        proof_ok = (order.name == path.name and order.plugin_bytes == path.plugin_bytes
                    and order.meta_bytes() == path.meta_bytes)
    if not proof_ok:
        return deny(GateReason.BAD_PROOF)
    if meta.withdrawn:
        return deny(GateReason.WITHDRAWN)
    if broadcast_root != path.root:
        return deny(GateReason.ROOT_MISMATCH)
    return GateDecision(True, GateReason.ADMIT)


@dataclass
class TransparencyLog:
    """One log operator. Mutations apply to the working set; ``advance`` freezes it
    into the next epoch's tree and signs its root."""

    ftl_id: str
    developers: DeveloperKeySet
    key: SigningKey
    depth: int = 8
    relay_keys: dict = field(default_factory=dict)
    epoch: int = 0
    orders: dict = field(default_factory=dict)
    trees: dict = field(default_factory=dict)
    roots: dict = field(default_factory=dict)
    evidence: list = field(default_factory=list)
    listeners: list = field(default_factory=list)

    def __post_init__(self):
        if not self.trees:
            self._freeze(self.epoch)

    # -- mutations -------------------------------------------------------
    def issue(self, order: IssuanceOrder) -> IssuanceOrder:
        if order.name in self.orders:
            raise DuplicateName(order.name)
        m = order.meta
        if m.protest_epoch > m.push_epoch:
            raise EpochError(f"E_protest {m.protest_epoch} > E_push {m.push_epoch}")
        if m.protest_epoch < self.epoch:
            raise EpochError(f"protest epoch {m.protest_epoch} already passed (now {self.epoch})")
        if m.withdraw is not None or m.protests:
            raise EpochError("a fresh issuance carries no withdrawal or protests")
        if not self.developers.verify(m.signatures, order.message()):
            raise InvalidSignature(order.name)
        self.orders[order.name] = order
        self._emit("issue", order.to_dict())
        return order

    def withdraw(self, w: WithdrawOrder) -> IssuanceOrder:
        order = self._order(w.name)
        if not self.developers.verify(w.signatures, w.message()):
            raise InvalidSignature(w.name)
        if order.meta.withdrawn:
            return order
        order = order.with_meta(withdraw=w)
        self.orders[w.name] = order
        self._emit("withdraw", w.to_dict())
        return order

    def protest(self, p: Protest) -> ProtestOutcome:
        order = self._order(p.plugin_name)
        out = record_protest(p, self.epoch, order, self.relay_keys)
        if out.accepted:
            self.orders[order.name] = out.order
            self._emit("protest", p.to_dict())
        elif out.evidence is not None:
            self.evidence.append(out.evidence)
        return out

    def register_relay(self, relay_id: str, pub_bytes: bytes):
        self.relay_keys[relay_id] = pub_bytes
        self._emit("relay", {"relay_id": relay_id, "pub": pub_bytes.hex()})

    def advance(self, to_epoch: Optional[int] = None) -> SignedTreeRoot:
        target = self.epoch + 1 if to_epoch is None else to_epoch
        if target <= self.epoch:
            raise EpochError(f"cannot build epoch {target}; log is at {self.epoch}")
        self.epoch = target
        s = self._freeze(target)
        self._emit("advance", {"epoch": target})
        return s

    def build(self, epoch: int) -> NameStructuredTree:
        if epoch < self.epoch:
            raise EpochError(f"epoch {epoch} precedes current epoch {self.epoch}")
        return build_tree(self.orders.values(), epoch, self.depth, self.developers)

    def _freeze(self, epoch):
        tree = build_tree(self.orders.values(), epoch, self.depth, self.developers)
        self.trees[epoch] = tree
        s = SignedTreeRoot(self.ftl_id, epoch, tree.root, self.depth, signer=self.key.public_bytes)
        s = replace(s, signature=self.key.sign(s.message()))
        self.roots[epoch] = s
        return s

    def _order(self, name):
        order = self.orders.get(name)
        if order is None:
            raise UnknownPlugin(name)
        return order

    def _emit(self, kind, body):
        for fn in self.listeners:
            fn(kind, body)

    # -- read side -------------------------------------------------------
    @property
    def tree(self) -> NameStructuredTree:
        return self.trees[self.epoch]

    def signed_root(self, epoch: Optional[int] = None) -> SignedTreeRoot:
        return self.roots[self.epoch if epoch is None else epoch]

    def prove(self, name: str, epoch: Optional[int] = None) -> AuthenticationPath:
        e = self.epoch if epoch is None else epoch
        return prove_availability(self.trees[e], name, self.ftl_id, self.roots[e])

    def prove_absent(self, name: str, epoch: Optional[int] = None) -> AuthenticationPath:
        e = self.epoch if epoch is None else epoch
        (path,) = prove_absence({self.ftl_id: self.trees[e]}, name)
        path.signed_root = self.roots[e]
        return path


def issue_order(name: str, plugin_bytes: bytes, protest_epoch: int, push_epoch: int, dev_keys) -> IssuanceOrder:
    """Build and multisign an issuance order."""
    sigs = multisign(dev_keys, issue_message(name, plugin_bytes, protest_epoch, push_epoch))
    return IssuanceOrder(name, plugin_bytes, Meta(protest_epoch, push_epoch, sigs))


def withdraw_order(name: str, epoch: int, dev_keys) -> WithdrawOrder:
    return WithdrawOrder(name, epoch, multisign(dev_keys, withdraw_message(name, epoch)))


__all__ = [
    "GateDecision", "GateReason", "ProtestOutcome", "ProtestReason", "TransparencyLog",
    "detect_equivocation", "issue_order", "load_gate", "make_protest", "record_protest",
    "recompute_root", "verify_str", "withdraw_order",
]
