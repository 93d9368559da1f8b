"""Plugins shipped with the package, kept as assembly sources.

Each directory under ``bundles/`` has one ``.plugin`` descriptor; every
``X.o`` it names is assembled from ``X.s`` on demand.
"""

from __future__ import annotations

from importlib import resources

from fankit.vm import CALL_NAMES, Assembler

from .descriptor import PluginDescriptor, parse_plugin_file
from .hooks import assembler_constants

# Shapes of the measured plugins: name -> number of hooks.
TABLE1_BUNDLES = {
    "hello_world": 1,
    "sendme_1": 1,
    "sendme_2": 2,
    "sendme_3": 3,
    "dropmark_def": 6,
    "dropmark_def_uncons": 7,
}
BUNDLES = tuple(TABLE1_BUNDLES) + ("dropmark_def_client",)
NAMESPACE = "fan.project"


def plugin_assembler() -> Assembler:
    return Assembler(assembler_constants(), CALL_NAMES)


def _bundle_dir(name):
    if name not in BUNDLES:
        raise KeyError(f"no builtin bundle {name!r}; choose from {', '.join(BUNDLES)}")
    return resources.files("fankit.plugins").joinpath("bundles", name)


def bundle_source(name: str, filename: str) -> str:
    return _bundle_dir(name).joinpath(filename.rsplit(".", 1)[0] + ".s").read_text()


def builtin_bundle(name: str, plugin_name: str | None = None) -> PluginDescriptor:
    root = _bundle_dir(name)
    text = root.joinpath(f"{name}.plugin").read_text()
    desc = parse_plugin_file(text, plugin_name or f"{NAMESPACE}/{name}")
    asm = plugin_assembler()
    for ep in desc.entry_points:
        if ep.filename not in desc.bytecode_blobs:
            prog = asm.assemble(bundle_source(name, ep.filename), ep.filename)
            desc.bytecode_blobs[ep.filename] = prog.encode()
    return desc
