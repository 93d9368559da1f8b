"""``.plugin`` descriptor files and on-disk bundles.

A descriptor is line oriented::

    memory 16777216
    <hook> <protocol> [param <k>] <add|replace> <bytecode file>
    ...

A bundle is a directory holding exactly one ``.plugin`` file plus the
bytecode files it names.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import (
    DuplicateReplace,
    InvalidPluginName,
    MalformedEntryLine,
    MalformedMemoryLine,
    UnknownOperation,
)

OPERATIONS = ("add", "replace")


@dataclass(frozen=True)
class EntryPointSpec:
    hook: str
    protocol: str
    operation: str
    filename: str
    param: Optional[int] = None

    def to_line(self) -> str:
        parts = [self.hook, self.protocol]
        if self.param is not None:
            parts += ["param", str(self.param)]
        parts += [self.operation, self.filename]
        return " ".join(parts)


@dataclass
class PluginDescriptor:
    name: str
    heap_budget: int
    entry_points: list = field(default_factory=list)
    bytecode_blobs: dict = field(default_factory=dict)
    meta: object = None

    def __post_init__(self):
        check_name(self.name)

    @property
    def namespace(self) -> str:
        return self.name.split("/", 1)[0]

    @property
    def bytecode_size(self) -> int:
        return sum(len(b) for b in self.bytecode_blobs.values())

    def to_text(self) -> str:
        return format_plugin_file(self)


def check_name(name: str) -> None:
    if name.count("/") != 1 or name.startswith("/") or name.endswith("/"):
        raise InvalidPluginName(f"plugin name must be 'namespace/name', got {name!r}")
    if "\x00" in name or ";" in name:
        raise InvalidPluginName(f"plugin name may not contain NUL or ';': {name!r}")


def parse_plugin_file(text: str, name: str = "local/unnamed") -> PluginDescriptor:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise MalformedMemoryLine("empty descriptor: first line must be 'memory <bytes>'")
    head = lines[0].split()
    if len(head) != 2 or head[0] != "memory" or not head[1].isdigit() or int(head[1]) <= 0:
        raise MalformedMemoryLine(f"bad memory line: {lines[0]!r}")
    desc = PluginDescriptor(name=name, heap_budget=int(head[1]))
    replaced = set()
    for lineno, line in enumerate(lines[1:], start=2):
        tok = line.split()
        param = None
        if len(tok) == 6 and tok[2] == "param":
            if not tok[3].isdigit():
                raise MalformedEntryLine(f"line {lineno}: param must be a non-negative integer")
            param = int(tok[3])
            tok = tok[:2] + tok[4:]
        if len(tok) != 4:
            raise MalformedEntryLine(f"line {lineno}: expected '<hook> <protocol> [param <k>] <op> <file>'")
        hook, protocol, op, filename = tok
        if op not in OPERATIONS:
            raise UnknownOperation(f"line {lineno}: unknown operation {op!r}")
        if op == "replace":
            if hook in replaced:
                raise DuplicateReplace(hook)
            replaced.add(hook)
        desc.entry_points.append(EntryPointSpec(hook, protocol, op, filename, param))
    return desc


def format_plugin_file(desc: PluginDescriptor) -> str:
    lines = [f"memory {desc.heap_budget}"]
    lines += [ep.to_line() for ep in desc.entry_points]
    return "\n".join(lines) + "\n"


def load_bundle(path, name: Optional[str] = None) -> PluginDescriptor:
    """Read a bundle directory. The plugin name defaults to ``<dir parent>/<dir>``."""
    path = Path(path)
    found = sorted(path.glob("*.plugin"))
    if len(found) != 1:
        raise MalformedMemoryLine(f"{path}: expected exactly one .plugin file, found {len(found)}")
    if name is None:
        name = f"{path.parent.name or 'local'}/{path.name}"
    desc = parse_plugin_file(found[0].read_text(), name)
    for ep in desc.entry_points:
        if ep.filename not in desc.bytecode_blobs:
            blob = path / ep.filename
            if blob.exists():
                desc.bytecode_blobs[ep.filename] = blob.read_bytes()
    return desc


def write_bundle(desc: PluginDescriptor, path) -> Path:
    path = Path(path)
    os.makedirs(path, exist_ok=True)
    stem = desc.name.split("/", 1)[1]
    (path / f"{stem}.plugin").write_text(format_plugin_file(desc))
    for filename, blob in desc.bytecode_blobs.items():
        (path / filename).write_bytes(blob)
    return path
