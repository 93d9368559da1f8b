"""Plugin transparency log: name-structured Merkle tree, epochs, proofs and the load gate."""

from .errors import (
    DecodeError,
    DuplicateName,
    EpochError,
    FtlError,
    InvalidSignature,
    NotPresent,
    PresentSomewhere,
    UnknownPlugin,
)
from .gate import RelayGate, bundle_bytes
from .log import (
    GateDecision,
    GateReason,
    ProtestOutcome,
    ProtestReason,
    TransparencyLog,
    detect_equivocation,
    issue_order,
    load_gate,
    make_protest,
    record_protest,
    verify_str,
    withdraw_order,
)
from .records import (
    H,
    IssuanceOrder,
    Meta,
    Protest,
    SignedTreeRoot,
    WithdrawOrder,
    decode_meta,
    record_bytes,
    record_digest,
)
from .service import FtlClient, FtlServer, serve_in_thread
from .signing import DeveloperKeySet, RelayKey, SigningKey, multisign
from .store import ConsensusDocument, LogStore
from .tree import (
    EMPTY_LEAF,
    AuthenticationPath,
    NameStructuredTree,
    build_tree,
    empty_subtree,
    leaf_index,
    leaf_value,
    prove_absence,
    prove_availability,
    recompute_root,
    verify_path,
)

__all__ = [name for name in dir() if not name.startswith("_")]
