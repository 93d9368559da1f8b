"""Relay-side admission: ties the plugin manager's load path to the log."""

from __future__ import annotations

from .errors import FtlError
from .log import GateDecision, GateReason, load_gate
from .records import lp


def bundle_bytes(desc) -> bytes:
    """Canonical bytes of a plugin bundle: descriptor text then each blob by filename."""
    out = [lp(desc.to_text().encode())]
    for fname in sorted(desc.bytecode_blobs):
        out.append(lp(fname.encode()) + lp(desc.bytecode_blobs[fname]))
    return b"".join(out)


class RelayGate:
    """Callable gate for ``PluginManager``; ``source`` is a log or a service client."""

    def __init__(self, source, consensus, ftl_id):
        self.source = source
        self.consensus = consensus
        self.ftl_id = ftl_id

    def __call__(self, desc) -> GateDecision:
        online = self.consensus.online(self.ftl_id)
        if not online:
            return GateDecision(False, GateReason.FTL_OFFLINE)
        try:
            path = self.source.prove(desc.name)
        except FtlError:
            return GateDecision(False, GateReason.BAD_PROOF)
        if path.plugin_bytes != bundle_bytes(desc):
            return GateDecision(False, GateReason.BAD_PROOF)
        return load_gate(path, None, self.consensus.epoch, self.consensus.root(self.ftl_id), online)
