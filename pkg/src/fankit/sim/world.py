"""Discrete-event client-guard-middle-exit network with the dropmark attack and defense.

Each circuit runs on its own virtual-time event queue; circuits are independent,
so the run is the concatenation of per-circuit runs. Every random draw comes
from streams seeded by ``(seed, circuit_id)``, which makes runs reproducible and
lets the defense-on and defense-off runs share labels and link latencies.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from typing import Optional

from ..padding import MachineInstance, PaddingEvent, builtin_dropmark_def_machine, builtin_setup_machine
from ..plugins import HookRegistry, HostServices, PluginManager, builtin_bundle, hooks
from ..plugins.manager import ALL_FIELDS
from .cells import INBOUND, OUTBOUND, Cell, CellKind
from .config import SimConfig
from .detect import Thresholds, detect
from .metrics import CircuitRecord, MetricsLedger

CLIENT, GUARD, MIDDLE, EXIT = range(4)
NODE_NAMES = ("client", "guard", "middle", "exit")
ACTIVE_STATES = frozenset({"burst", "gap"})


class EventLoop:
    def __init__(self):
        self.now = 0.0
        self._q = []
        self._seq = 0

    def at(self, t, fn, *args):
        heapq.heappush(self._q, (t, self._seq, fn, args))
        self._seq += 1

    def run(self, horizon=float("inf")):
        while self._q:
            t, _, fn, args = heapq.heappop(self._q)
            if t > horizon:
                break
            self.now = t
            fn(*args)


@dataclass
class LayerHint:
    deliver_window: int = 1000


@dataclass(eq=False)
class Circuit:
    id: int
    exit_is_malicious: bool
    rng: random.Random
    pad_rng: random.Random
    latency: tuple
    loop: EventLoop = field(default_factory=EventLoop)
    clean: bool = True
    conservative: bool = False
    opened_at: float = 0.0
    built_at: Optional[float] = None
    first_begin_at: Optional[float] = None
    connected_at: Optional[float] = None
    torn_down: bool = False
    machine: Optional[MachineInstance] = None
    machine_id: int = 0
    padding_sent: int = 0
    cover_ms: float = 0.0
    active_since: Optional[float] = None
    guard_trace: list = field(default_factory=list)
    cells_at_guard: int = 0
    data_cells: int = 0
    leaked_clean_cells: int = 0
    suppressed: int = 0
    signals: list = field(default_factory=list)
    deliver_window: int = 1000
    package_window: int = 1000
    layer_hint: LayerHint = field(default_factory=LayerHint)
    _fifo: dict = field(default_factory=dict)

    @property
    def hops(self):
        return NODE_NAMES


def conservative_policy(middle, cell: Cell, circ: Circuit) -> str:
    """Verdict for an inbound cell at the middle: 'forward', 'drop' or 'teardown'.

    While a conservative circuit is clean, relay cells other than the middle's
    own padding are suppressed. Link-level control cells (CREATED, DESTROY)
    always pass.
    """
    if not circ.conservative or not circ.clean:
        return "forward"
    if cell.kind in (CellKind.PADDING, CellKind.CREATED, CellKind.DESTROY):
        return "forward"
    return "teardown" if middle.config.conservative_teardown else "drop"


class RelayHost(HostServices):
    """Plugin-manager host for one role (client or middle)."""

    def __init__(self, world: "SimWorld", role: str, conservative: bool = False):
        self.world = world
        self.config = world.config
        self.role = role
        self.global_machines = set()
        self.rng = random.Random(f"{world.config.seed}:{role}:uniform")
        reg = HookRegistry()
        self.manager = PluginManager(reg, host=self, conservative=conservative)
        defaults = {hooks.CIRCPAD_SEND_PADDING_CALLBACK: self._default_padding}
        self.manager.publish_core_hooks(defaults)
        for name in hooks.SIM_HOOKS:
            reg.publish(name, fields=ALL_FIELDS)
        self._publish_fields(reg)

    def _publish_fields(self, reg):
        circ_arg = lambda args: args["circuit"]  # noqa: E731
        for key in ("RELAY_ARG_CIRCUIT_T", "CONNEDGE_ARG_CIRCUIT_T", "CIRCPAD_ARG_CIRCUIT_T"):
            reg.publish_field(key, getter=circ_arg)
        reg.publish_field("RELAY_ARG_CRYPT_PATH_T", getter=lambda args: args["circuit"].layer_hint)
        reg.publish_field("RELAY_ARG_SIGNAL_ID", getter=lambda args: args["signal"])
        reg.publish_field("UTIL_CIRCUIT_IS_ORIGIN", getter=lambda c: self.role == "client")
        reg.publish_field("CIRCUIT_ID", getter=lambda c: c.id)
        reg.publish_field("RELAY_CIRC_DELIVER_WINDOW", getter=lambda c: c.deliver_window,
                          setter=lambda c, v: setattr(c, "deliver_window", v))
        reg.publish_field("RELAY_CIRC_PACKAGE_WINDOW", getter=lambda c: c.package_window,
                          setter=lambda c, v: setattr(c, "package_window", v))
        reg.publish_field("RELAY_LAYER_HINT_DELIVER_WINDOW", getter=lambda h: h.deliver_window,
                          setter=lambda h, v: setattr(h, "deliver_window", v))
        reg.publish_field("CIRCPAD_GLOBAL_MACHINE", getter=lambda: min(self.global_machines, default=0),
                          setter=lambda v: self.global_machines.add(int(v)))
        reg.publish_field("CIRCPAD_CIRC_MACHINE", getter=lambda c: c.machine_id, setter=self._attach_machine)
        reg.publish_field("CIRCPAD_EVENT", setter=self.fire)
        reg.publish_field("CIRCPAD_PADDING_SENT", getter=lambda c: c.padding_sent)
        reg.publish_field("CIRCPAD_PADDING_CAP", getter=lambda c: self.config.padding_cap)
        reg.publish_field("RELAY_CONSERVATIVE_POLICY", getter=lambda c: int(c.conservative),
                          setter=lambda c, v: setattr(c, "conservative", bool(v)))

    def dispatch(self, hook, circ, **extra):
        return self.manager.dispatch(hook, {"circuit": circ, **extra})

    # -- host services used by plugins -------------------------------------
    def send_signal_cell(self, circ, signal_id):
        self.world.send_signal(circ, int(signal_id))

    def schedule_padding(self, circ, delay_us):
        delay_ms = delay_us / 1000.0
        if delay_ms <= 0:
            self.world.emit_padding(circ)
        else:
            circ.loop.at(circ.loop.now + delay_ms, self.world.emit_padding, circ)

    def sample_uniform(self, lo, hi):
        return self.rng.randint(lo, hi)

    # -- machine plumbing ----------------------------------------------------
    def _attach_machine(self, circ, machine_id):
        spec = self.world.machines.get(int(machine_id))
        if spec is None or int(machine_id) not in self.global_machines:
            return
        circ.machine_id = int(machine_id)
        circ.machine = MachineInstance(spec, circ.pad_rng, circ)

    def fire(self, circ, event):
        m = circ.machine
        if m is None or circ.torn_down:
            return
        now = circ.loop.now
        before = m.current_state
        actions = m.step(PaddingEvent(int(event)), now)
        self._track_cover(circ, before, m.current_state, now)
        for a in actions:
            circ.loop.at(a.at_ms, self._padding_due, circ, a)

    def _track_cover(self, circ, before, after, now):
        if before not in ACTIVE_STATES and after in ACTIVE_STATES:
            circ.active_since = now
        elif before in ACTIVE_STATES and after not in ACTIVE_STATES and circ.active_since is not None:
            circ.cover_ms += now - circ.active_since
            circ.active_since = None

    def _padding_due(self, circ, action):
        if circ.torn_down or circ.machine is None or not circ.machine.is_current(action):
            return
        self.dispatch(hooks.CIRCPAD_SEND_PADDING_CALLBACK, circ)

    def _default_padding(self, args):
        circ = args["circuit"]
        if circ.padding_sent < self.config.padding_cap:
            self.world.emit_padding(circ)
            return 1
        return 0


class SimWorld:
    def __init__(self, config: SimConfig, load_client: Optional[bool] = None,
                 load_middle: Optional[bool] = None, middle_conservative: Optional[bool] = None):
        self.config = config
        defense = config.defense
        self.machines = {
            hooks.MACHINE_DROPMARK_DEF: builtin_dropmark_def_machine(config.burst_spacing_ms),
            2: builtin_setup_machine(),
        }
        self.thresholds = Thresholds.from_config(config)
        self.client = RelayHost(self, "client")
        self.middle = RelayHost(self, "middle",
                                conservative=defense if middle_conservative is None else middle_conservative)
        client_desc, middle_desc = defense_plugin_bundle(config.defense_variant)
        if defense if load_client is None else load_client:
            self.client.manager.load(client_desc)
        if defense if load_middle is None else load_middle:
            self.middle.manager.load(middle_desc)
        self.middle.manager.dispatch(hooks.CIRCPAD_GLOBAL_MACHINE_INIT, {})

    # -- circuit construction ------------------------------------------------
    def new_circuit(self, cid: int) -> Circuit:
        cfg = self.config
        rng = random.Random(f"{cfg.seed}:{cid}:net")
        malicious = rng.random() < cfg.fraction_malicious
        lat = tuple(rng.uniform(*cfg.latency_ms) for _ in range(3))
        return Circuit(cid, malicious, rng, random.Random(f"{cfg.seed}:{cid}:pad"), lat)

    def run_circuit(self, cid: int) -> CircuitRecord:
        circ = self.new_circuit(cid)
        loop = circ.loop
        self.client.dispatch(hooks.CIRCUIT_OPEN, circ)
        loop.at(0.0, self.send, circ, CLIENT, self._cell(circ, CellKind.CREATE, OUTBOUND, "client"))
        loop.run(self.config.horizon_ms)
        if circ.machine is not None and not circ.torn_down:
            self.middle.fire(circ, PaddingEvent.CircuitClose)
        if circ.active_since is not None:
            circ.cover_ms += loop.now - circ.active_since
            circ.active_since = None
        return CircuitRecord(
            circuit_id=cid,
            malicious_exit=circ.exit_is_malicious,
            flagged=detect(circ.guard_trace, self.thresholds),
            padding_cells=circ.padding_sent,
            cover_ms=round(circ.cover_ms, 6),
            cells_total=circ.cells_at_guard + circ.data_cells,
            torn_down=circ.torn_down,
            leaked_clean_cells=circ.leaked_clean_cells,
            suppressed_cells=circ.suppressed,
            activate_signals=circ.signals.count(hooks.SIGNAL_ACTIVATE),
            silent_signals=circ.signals.count(hooks.SIGNAL_BE_SILENT),
        )

    def run(self) -> MetricsLedger:
        ledger = MetricsLedger()
        for cid in range(self.config.n_circuits):
            ledger.add(self.run_circuit(cid))
        return ledger

    # -- transport -----------------------------------------------------------
    @staticmethod
    def _cell(circ, kind, direction, origin, signal_id=0):
        return Cell(kind, circ.id, direction, circ.loop.now, signal_id, origin)

    def send(self, circ, node, cell):
        """Put ``cell`` on the link leaving ``node`` in the cell's direction (FIFO per link)."""
        if circ.torn_down:
            return
        nxt = node + 1 if cell.direction == OUTBOUND else node - 1
        if not 0 <= nxt <= EXIT:
            return
        link = min(node, nxt)
        now = circ.loop.now
        arrive = now + circ.latency[link] + circ.rng.uniform(0.0, self.config.jitter_ms)
        key = (link, cell.direction)
        arrive = max(arrive, circ._fifo.get(key, 0.0) + 1e-3)
        circ._fifo[key] = arrive
        circ.loop.at(arrive, self.deliver, circ, nxt, cell)

    def deliver(self, circ, node, cell):
        if circ.torn_down:
            return
        handler = (self._at_client, self._at_guard, self._at_middle, self._at_exit)[node]
        handler(circ, cell)

    def send_signal(self, circ, signal_id):
        circ.signals.append(signal_id)
        self.send(circ, CLIENT, self._cell(circ, CellKind.UNKNOWN_RELAY, OUTBOUND, "client", signal_id))

    def emit_padding(self, circ):
        if circ.torn_down:
            return
        circ.padding_sent += 1
        self.send(circ, MIDDLE, self._cell(circ, CellKind.PADDING, INBOUND, "middle"))
        self.middle.fire(circ, PaddingEvent.PaddingSent)

    def teardown(self, circ):
        if circ.machine is not None:
            self.middle.fire(circ, PaddingEvent.CircuitClose)
        circ.torn_down = True

    # -- per-node behaviour --------------------------------------------------
    def _at_guard(self, circ, cell):
        circ.cells_at_guard += 1
        if cell.direction == INBOUND:
            circ.guard_trace.append((circ.loop.now, cell.kind))
        self.send(circ, GUARD, cell)

    def _at_middle(self, circ, cell):
        if cell.direction == OUTBOUND:
            if cell.kind == CellKind.CREATE:
                self.middle.dispatch(hooks.CIRCUIT_OPEN, circ)
                self.middle.dispatch(hooks.CIRCPAD_SETUP_MACHINE_ON_CIRC, circ)
            elif cell.kind == CellKind.UNKNOWN_RELAY:
                verdict = self.middle.dispatch(hooks.RELAY_PROCESS_EDGE_UNKNOWN, circ, signal=cell.signal_id)
                if verdict == hooks.EDGE_TEARDOWN:
                    self.teardown(circ)
                return
            elif cell.kind == CellKind.BEGIN and circ.clean:
                circ.clean = False
                circ.first_begin_at = circ.loop.now
            self.send(circ, MIDDLE, cell)
            return
        verdict = conservative_policy(self.middle, cell, circ)
        if verdict != "forward":
            circ.suppressed += 1
            if verdict == "teardown":
                self.teardown(circ)
            return
        self.send(circ, MIDDLE, cell)
        if cell.kind == CellKind.CREATED:
            self.middle.dispatch(hooks.CIRCPAD_CIRCUIT_BUILT, circ)

    def _at_exit(self, circ, cell):
        cfg = self.config
        loop = circ.loop
        if cell.kind == CellKind.CREATE:
            self.send(circ, EXIT, self._cell(circ, CellKind.CREATED, INBOUND, "exit"))
            if circ.exit_is_malicious:
                # the watermark: cells during the silence that follows CREATED
                for k in range(cfg.dropmark_count):
                    loop.at(loop.now + k * cfg.dropmark_spacing_ms, self._dropmark_cell, circ)
        elif cell.kind == CellKind.BEGIN:
            loop.at(loop.now + circ.rng.uniform(*cfg.connect_ms), self._connected, circ)

    def _dropmark_cell(self, circ):
        self.send(circ, EXIT, self._cell(circ, CellKind.DATA, INBOUND, "exit"))

    def _connected(self, circ):
        self.send(circ, EXIT, self._cell(circ, CellKind.CONNECTED, INBOUND, "exit"))

    def _at_client(self, circ, cell):
        loop = circ.loop
        kind = cell.kind
        if kind == CellKind.CREATED:
            circ.built_at = loop.now
            loop.at(loop.now + circ.rng.uniform(*self.config.idle_ms), self._begin, circ)
            return
        if circ.clean and kind not in (CellKind.PADDING, CellKind.DESTROY):
            circ.leaked_clean_cells += 1
        if kind == CellKind.CONNECTED and circ.connected_at is None:
            circ.connected_at = loop.now
            self.client.dispatch(hooks.CONNEDGE_RECEIVED_CONNECTED, circ)
            # stream payload is accounted for without simulating each cell
            circ.data_cells = circ.rng.randint(*self.config.data_cells)

    def _begin(self, circ):
        self.client.dispatch(hooks.CONNEDGE_SEND_BEGIN, circ)
        self.send(circ, CLIENT, self._cell(circ, CellKind.BEGIN, OUTBOUND, "client"))


def defense_plugin_bundle(variant: str = "conservative"):
    """(client, middle) descriptors of the dropmark defense."""
    middle = "dropmark_def" if variant == "conservative" else "dropmark_def_uncons"
    return builtin_bundle("dropmark_def_client"), builtin_bundle(middle)


def run(config: SimConfig) -> MetricsLedger:
    return SimWorld(config).run()
