"""
Issuing a plugin through the transparency log
=============================================

Developers sign an issuance order, the log places it in a fixed-depth
Merkle tree keyed by the hash of the plugin name, and relays only load
what the log can prove.
"""

from fankit.ftl import (
    ConsensusDocument,
    DeveloperKeySet,
    RelayGate,
    RelayKey,
    SigningKey,
    TransparencyLog,
    bundle_bytes,
    issue_order,
    leaf_index,
    make_protest,
    verify_path,
    withdraw_order,
)
from fankit.plugins import GateDenied, builtin_bundle
from fankit.plugins.bench import host_manager

devset, devkeys = DeveloperKeySet.generate(3, 2, seed=b"demo")
relay = RelayKey.from_seed(b"demo-relay")
log = TransparencyLog("ftl0", devset, SigningKey.from_seed(b"demo-ftl"), depth=8,
                      relay_keys={relay.relay_id: relay.public_bytes})

desc = builtin_bundle("hello_world")
print("leaf for", desc.name, "=", leaf_index(desc.name, 8))

# two of three developers sign; relays may protest during epoch 0, load from epoch 1
log.issue(issue_order(desc.name, bundle_bytes(desc), 0, 1, devkeys[:2]))
print("protest:", log.protest(make_protest(relay, desc.name)).reason.value)

consensus = ConsensusDocument()
consensus.publish(log.advance())
path = log.prove(desc.name)
print("proof has", len(path.siblings), "siblings; verifies:", verify_path(path, log.tree.root, 8))

mgr = host_manager(gate=RelayGate(log, consensus, "ftl0"))
ctx = mgr.load(desc)
print("admitted", ctx.name)
mgr.unload(ctx)

# after a withdrawal the same plugin is refused
log.withdraw(withdraw_order(desc.name, log.epoch, devkeys[1:]))
consensus.publish(log.advance())
try:
    mgr.load(desc)
except GateDenied as exc:
    print("refused:", exc.reason.value)
print("absence proof verifies:", verify_path(log.prove_absent(desc.name), log.tree.root, 8))
