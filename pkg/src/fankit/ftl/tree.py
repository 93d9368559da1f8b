"""Fixed-depth Merkle tree whose leaves hold name-sorted plugin record lists."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

from .errors import DecodeError, DuplicateName, InvalidSignature, NotPresent, PresentSomewhere
from .records import H, IssuanceOrder, SignedTreeRoot, decode_meta, record_bytes, record_digest

EMPTY_LEAF = bytes(32)
MAX_DEPTH = 32


def _index_int(name: str, depth: int) -> int:
    if not 1 <= depth <= MAX_DEPTH:
        raise ValueError(f"depth must be in [1, {MAX_DEPTH}], got {depth}")
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big") >> (32 - depth)


def leaf_index(name: str, depth: int) -> str:
    """First ``depth`` bits of SHA-256(name), most significant bit first."""
    return format(_index_int(name, depth), f"0{depth}b")


def leaf_value(records) -> bytes:
    """Hash of the ';'-joined (name, digest) records, sorted by name."""
    if not records:
        return EMPTY_LEAF
    items = sorted(records, key=lambda r: r[0].encode())
    return H(b";".join(record_bytes(n, d) for n, d in items))


_EMPTY = [EMPTY_LEAF]
for _ in range(MAX_DEPTH):
    _EMPTY.append(H(_EMPTY[-1] + _EMPTY[-1]))


def empty_subtree(height: int) -> bytes:
    return _EMPTY[height]


@dataclass
class NameStructuredTree:
    depth: int
    epoch: int
    orders: dict  # name -> IssuanceOrder
    leaves: dict  # leaf index -> sorted list of names
    levels: list  # levels[h]: {node index: hash} for non-empty nodes at height h
    root: bytes

    def siblings(self, idx: int) -> list:
        out = []
        for h in range(self.depth):
            sib = (idx >> h) ^ 1
            out.append(self.levels[h].get(sib, _EMPTY[h]))
        return out

    def leaf_records(self, idx: int) -> list:
        return [(n, self.orders[n].digest()) for n in self.leaves.get(idx, ())]

    def leaf_loads(self) -> list:
        return [len(v) for v in self.leaves.values()]

    def __contains__(self, name):
        return name in self.orders


def build_tree(orders, epoch: int, depth: int = 8, keyset=None) -> NameStructuredTree:
    """Pure function of the order set and depth; insertion order is irrelevant."""
    by_name = {}
    for o in orders:
        if o.name in by_name:
            raise DuplicateName(o.name)
        if keyset is not None:
            if not keyset.verify(o.meta.signatures, o.message()):
                raise InvalidSignature(o.name)
            w = o.meta.withdraw
            if w is not None and (w.name != o.name or not keyset.verify(w.signatures, w.message())):
                raise InvalidSignature(o.name)
        by_name[o.name] = o
    leaves = {}
    for name in sorted(by_name, key=str.encode):
        leaves.setdefault(_index_int(name, depth), []).append(name)
    level = {idx: leaf_value([(n, by_name[n].digest()) for n in names]) for idx, names in leaves.items()}
    levels = [level]
    for h in range(depth):
        up = {}
        for idx in {i >> 1 for i in level}:
            left = level.get(2 * idx, _EMPTY[h])
            right = level.get(2 * idx + 1, _EMPTY[h])
            up[idx] = H(left + right)
        level = up
        levels.append(level)
    root = level.get(0, _EMPTY[depth])
    return NameStructuredTree(depth, epoch, by_name, leaves, levels, root)


@dataclass
class AuthenticationPath:
    """Leaf list plus bottom-up siblings for one name.

    An availability path carries the target's plugin bytes and canonical meta
    bytes so the verifier recomputes its digest. An absence path omits them
    unless the name is present but withdrawn, in which case they prove the
    withdrawal.
    """

    name: str
    kind: str  # "availability" | "absence"
    leaf_list: list
    siblings: list
    epoch: int
    root: bytes
    depth: int
    plugin_bytes: Optional[bytes] = None
    meta_bytes: Optional[bytes] = None
    ftl_id: str = ""
    signed_root: Optional[SignedTreeRoot] = field(default=None, compare=False)

    def to_dict(self):
        return {
            "name": self.name, "kind": self.kind, "epoch": self.epoch, "depth": self.depth,
            "root": self.root.hex(), "ftl_id": self.ftl_id,
            "leaf_list": [[n, d.hex()] for n, d in self.leaf_list],
            "siblings": [s.hex() for s in self.siblings],
            "plugin": self.plugin_bytes.hex() if self.plugin_bytes is not None else None,
            "meta": self.meta_bytes.hex() if self.meta_bytes is not None else None,
            "signed_root": self.signed_root.to_dict() if self.signed_root else None,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            d["name"], d["kind"], [(n, bytes.fromhex(h)) for n, h in d["leaf_list"]],
            [bytes.fromhex(s) for s in d["siblings"]], d["epoch"], bytes.fromhex(d["root"]),
            d["depth"],
            bytes.fromhex(d["plugin"]) if d.get("plugin") is not None else None,
            bytes.fromhex(d["meta"]) if d.get("meta") is not None else None,
            d.get("ftl_id", ""),
            SignedTreeRoot.from_dict(d["signed_root"]) if d.get("signed_root") else None,
        )


def prove_availability(tree: NameStructuredTree, name: str, ftl_id="", signed_root=None):
    order = tree.orders.get(name)
    if order is None:
        raise NotPresent(name)
    idx = _index_int(name, tree.depth)
    return AuthenticationPath(name, "availability", tree.leaf_records(idx), tree.siblings(idx),
                              tree.epoch, tree.root, tree.depth, order.plugin_bytes,
                              order.meta_bytes(), ftl_id, signed_root)


def prove_absence(trees, name: str) -> list:
    """One absence path per tree; ``trees`` maps log id to tree (or is a list of trees)."""
    if not isinstance(trees, dict):
        trees = {str(i): t for i, t in enumerate(trees)}
    paths = []
    for ftl_id, tree in trees.items():
        order = tree.orders.get(name)
        if order is not None and not order.meta.withdrawn:
            raise PresentSomewhere(ftl_id, name)
        idx = _index_int(name, tree.depth)
        paths.append(AuthenticationPath(
            name, "absence", tree.leaf_records(idx), tree.siblings(idx), tree.epoch, tree.root,
            tree.depth,
            order.plugin_bytes if order else None,
            order.meta_bytes() if order else None,
            ftl_id))
    return paths


def recompute_root(path: AuthenticationPath, depth: int) -> Optional[bytes]:
    if len(path.siblings) != depth or path.depth != depth:
        return None
    idx = _index_int(path.name, depth)
    node = leaf_value(path.leaf_list)
    sha = hashlib.sha256
    for h, sib in enumerate(path.siblings):
        if len(sib) != 32:
            return None
        node = sha(sib + node).digest() if (idx >> h) & 1 else sha(node + sib).digest()
    return node


def _target_consistent(path: AuthenticationPath, depth: int) -> bool:
    names = [n for n, _ in path.leaf_list]
    if len(set(names)) != len(names):
        return False
    if any(_index_int(n, depth) != _index_int(path.name, depth) for n in names):
        return False
    listed = dict(path.leaf_list).get(path.name)
    if path.plugin_bytes is None or path.meta_bytes is None:
        # bare absence: the name must simply not be listed
        return path.kind == "absence" and listed is None and path.plugin_bytes is None \
            and path.meta_bytes is None
    if listed is None or record_digest(path.plugin_bytes, path.meta_bytes) != listed:
        return False
    try:
        meta_name, meta = decode_meta(path.meta_bytes)
    except DecodeError:
        return False
    if meta_name != path.name:
        return False
    if path.kind == "availability":
        return True
    return path.kind == "absence" and meta.withdrawn


def verify_path(path: AuthenticationPath, expected_root: bytes, depth: int) -> bool:
    if path.plugin_bytes is not None and path.meta_bytes is not None:
        # cheapest check first: the carried record must match its leaf-list entry
        listed = dict(path.leaf_list).get(path.name)
        if listed is None or record_digest(path.plugin_bytes, path.meta_bytes) != listed:
            return False
    root = recompute_root(path, depth)
    if root is None or root != expected_root:
        return False
    return _target_consistent(path, depth)
