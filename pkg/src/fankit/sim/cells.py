from __future__ import annotations

import enum
from dataclasses import dataclass


class CellKind(enum.Enum):
    CREATE = "CREATE"
    CREATED = "CREATED"
    BEGIN = "BEGIN"
    CONNECTED = "CONNECTED"
    DATA = "DATA"
    PADDING = "PADDING"
    UNKNOWN_RELAY = "UNKNOWN_RELAY"
    DESTROY = "DESTROY"


INBOUND = "inbound"    # toward the client
OUTBOUND = "outbound"  # toward the exit


@dataclass
class Cell:
    kind: CellKind
    circuit_id: int
    direction: str
    timestamp: float
    signal_id: int = 0
    origin: str = ""  # node that created the cell, for accounting only

    def __post_init__(self):
        if self.kind == CellKind.UNKNOWN_RELAY and self.signal_id not in (1, 2):
            raise ValueError(f"signal cells carry id 1 or 2, got {self.signal_id}")
