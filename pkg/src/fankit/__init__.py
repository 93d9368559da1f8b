"""fankit: flexible anonymous network building blocks.

Subpackages
-----------
vm        sandboxed eBPF-style register machine and assembler
plugins   ``.plugin`` descriptors, hook registry and dispatch
ftl       name-structured Merkle transparency log for plugin issuance
padding   circuit padding state machines
sim       discrete-event dropmark attack / defense simulator
"""

__version__ = "0.1.0"
