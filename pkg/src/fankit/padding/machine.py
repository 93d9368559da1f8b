"""Event-driven circuit padding machines."""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from typing import Optional


class MachineSpecError(ValueError):
    pass


class PaddingEvent(enum.IntEnum):
    NonPaddingSent = 0
    PaddingSent = 1
    StateLengthZero = 2
    CircuitClose = 3
    Activate = 4
    BeSilent = 5

    @property
    def kind(self) -> str:
        return self.name


# events a client can inject through the signal path
CLIENT_EVENTS = frozenset({PaddingEvent.Activate, PaddingEvent.BeSilent})


@dataclass(frozen=True)
class UniformInt:
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise MachineSpecError(f"empty range {self.lo}..{self.hi}")

    def sample(self, rng: random.Random) -> int:
        return rng.randint(self.lo, self.hi)

    def to_text(self) -> str:
        return f"uniform_int {self.lo} {self.hi}"


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise MachineSpecError(f"empty range [{self.lo}, {self.hi}]")

    def sample(self, rng: random.Random) -> float:
        if self.lo == self.hi:
            return float(self.lo)
        return rng.uniform(self.lo, self.hi)

    def to_text(self) -> str:
        return f"uniform {_num(self.lo)} {_num(self.hi)}"


def _num(x) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


@dataclass(frozen=True)
class StateSpec:
    """One machine state.

    With a ``length_dist`` the state sends N cells on entry, spaced by
    ``delay_dist`` (back-to-back when absent), and fires StateLengthZero once
    the counter reaches zero. With only a ``delay_dist`` it sends a single
    cell after the sampled delay. Otherwise it sends nothing.
    """

    name: str
    length_dist: Optional[UniformInt] = None
    delay_dist: Optional[Uniform] = None
    terminal: bool = False

    @property
    def pads(self) -> bool:
        return self.length_dist is not None or self.delay_dist is not None


@dataclass(frozen=True)
class PaddingMachineSpec:
    name: str
    states: dict
    initial: str
    transitions: dict  # (state name, PaddingEvent) -> state name
    machine_id: int = 0

    def __post_init__(self):
        if self.initial not in self.states:
            raise MachineSpecError(f"initial state {self.initial!r} undefined")
        for (src, ev), dst in self.transitions.items():
            if src not in self.states or dst not in self.states:
                raise MachineSpecError(f"transition {src}->{dst} references an undefined state")
            if not isinstance(ev, PaddingEvent):
                raise MachineSpecError(f"bad event {ev!r}")
            if self.states[src].terminal:
                raise MachineSpecError(f"terminal state {src!r} has an outgoing edge")

    def edges(self) -> set:
        return {(s, e.name, d) for (s, e), d in self.transitions.items()}

    def to_text(self) -> str:
        out = [f"machine {self.name}", f"id {self.machine_id}", f"initial {self.initial}"]
        for st in self.states.values():
            parts = ["state", st.name]
            if st.length_dist:
                parts += ["length", st.length_dist.to_text()]
            if st.delay_dist:
                parts += ["delay", st.delay_dist.to_text()]
            if st.terminal:
                parts.append("terminal")
            out.append(" ".join(parts))
        for (src, ev), dst in self.transitions.items():
            out.append(f"on {src} {ev.name} {dst}")
        return "\n".join(out) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PaddingMachineSpec":
        name, initial, mid = None, None, 0
        states, transitions = {}, {}
        for n, raw in enumerate(text.splitlines(), 1):
            tok = raw.split("#", 1)[0].split()
            if not tok:
                continue
            try:
                head = tok[0]
                if head == "machine":
                    name = tok[1]
                elif head == "id":
                    mid = int(tok[1])
                elif head == "initial":
                    initial = tok[1]
                elif head == "state":
                    states[tok[1]] = _parse_state(tok[1], tok[2:])
                elif head == "on":
                    src, ev, dst = tok[1:4]
                    transitions[(src, PaddingEvent[ev])] = dst
                else:
                    raise MachineSpecError(f"unknown directive {head!r}")
            except (IndexError, KeyError, ValueError) as exc:
                if isinstance(exc, MachineSpecError):
                    raise MachineSpecError(f"line {n}: {exc}") from None
                raise MachineSpecError(f"line {n}: cannot parse {raw.strip()!r}") from None
        if name is None or initial is None:
            raise MachineSpecError("missing 'machine' or 'initial' line")
        return cls(name, states, initial, transitions, mid)


def _parse_state(name, tok):
    length = delay = None
    terminal = False
    i = 0
    while i < len(tok):
        key = tok[i]
        if key == "terminal":
            terminal = True
            i += 1
            continue
        kind, lo, hi = tok[i + 1:i + 4]
        if kind == "uniform_int":
            dist = UniformInt(int(lo), int(hi))
        elif kind == "uniform":
            dist = Uniform(float(lo), float(hi))
        else:
            raise MachineSpecError(f"unknown distribution {kind!r}")
        if key == "length":
            length = dist
        elif key == "delay":
            delay = dist
        else:
            raise MachineSpecError(f"unknown state attribute {key!r}")
        i += 4
    return StateSpec(name, length, delay, terminal)


@dataclass(frozen=True)
class SendPadding:
    at_ms: float
    generation: int


@dataclass
class MachineInstance:
    spec: PaddingMachineSpec
    rng: random.Random = field(default_factory=random.Random)
    circuit: object = None
    current_state: str = ""
    remaining_length: int = 0
    generation: int = 0
    sent: int = 0
    history: list = field(default_factory=list)

    def __post_init__(self):
        if not self.current_state:
            self.current_state = self.spec.initial

    @property
    def state(self) -> StateSpec:
        return self.spec.states[self.current_state]

    @property
    def terminated(self) -> bool:
        return self.state.terminal

    def is_current(self, action: SendPadding) -> bool:
        """Whether a scheduled cell still belongs to the live state residence."""
        return action.generation == self.generation and not self.terminated

    def step(self, event: PaddingEvent, now: float) -> list:
        event = PaddingEvent(event)
        if self.terminated:
            return []
        actions = []
        if event == PaddingEvent.PaddingSent:
            self.sent += 1
            if self.state.length_dist is not None and self.remaining_length > 0:
                self.remaining_length -= 1
                if self.remaining_length == 0:
                    actions += self.step(PaddingEvent.StateLengthZero, now)
                    return actions
        target = self.spec.transitions.get((self.current_state, event))
        if target is None:
            return actions
        self.history.append((now, self.current_state, event.name, target))
        return actions + self._enter(target, now)

    def _enter(self, name: str, now: float) -> list:
        self.current_state = name
        self.generation += 1
        st = self.state
        self.remaining_length = 0
        if st.length_dist is not None:
            n = st.length_dist.sample(self.rng)
            self.remaining_length = n
            out, t = [], now
            for _ in range(n):
                if st.delay_dist is not None:
                    t += st.delay_dist.sample(self.rng)
                out.append(SendPadding(t, self.generation))
            if n == 0:
                return self.step(PaddingEvent.StateLengthZero, now)
            return out
        if st.delay_dist is not None:
            return [SendPadding(now + st.delay_dist.sample(self.rng), self.generation)]
        return []


def instance(spec: PaddingMachineSpec, seed=None, circuit=None) -> MachineInstance:
    return MachineInstance(spec, random.Random(seed), circuit)


def step(m: MachineInstance, e: PaddingEvent, now: float) -> list:
    return m.step(e, now)


def builtin_setup_machine() -> PaddingMachineSpec:
    E = PaddingEvent
    states = {
        "start": StateSpec("start"),
        "setup": StateSpec("setup", delay_dist=Uniform(0, 1)),
        "end": StateSpec("end", terminal=True),
    }
    transitions = {
        ("start", E.NonPaddingSent): "setup",
        ("setup", E.PaddingSent): "end",
        ("setup", E.StateLengthZero): "end",
    }
    return PaddingMachineSpec("setup", states, "start", transitions, machine_id=2)


def builtin_dropmark_def_machine(burst_spacing_ms: float = 0.0) -> PaddingMachineSpec:
    E = PaddingEvent
    spacing = Uniform(burst_spacing_ms, burst_spacing_ms) if burst_spacing_ms else None
    states = {
        "start": StateSpec("start"),
        "burst": StateSpec("burst", length_dist=UniformInt(3, 9), delay_dist=spacing),
        "gap": StateSpec("gap", delay_dist=Uniform(1, 80)),
        "silence": StateSpec("silence"),
        "end": StateSpec("end", terminal=True),
    }
    transitions = {
        ("start", E.Activate): "burst",
        ("burst", E.StateLengthZero): "gap",
        ("burst", E.BeSilent): "silence",
        ("gap", E.BeSilent): "silence",
        ("gap", E.PaddingSent): "burst",
        ("silence", E.Activate): "burst",
    }
    for s in ("burst", "gap", "silence"):
        transitions[(s, E.CircuitClose)] = "end"
    return PaddingMachineSpec("dropmark_def", states, "start", transitions, machine_id=1)


BUILTIN_MACHINES = {
    "setup": builtin_setup_machine,
    "dropmark_def": builtin_dropmark_def_machine,
}


def cells_in_window(spec: PaddingMachineSpec, window_ms: float, rng: random.Random) -> int:
    """Padding cells the machine emits between Activate at t=0 and BeSilent at ``window_ms``."""
    m = MachineInstance(spec, rng)
    pending = m.step(PaddingEvent.Activate, 0.0)
    while pending:
        pending.sort(key=lambda a: a.at_ms)
        a = pending.pop(0)
        if a.at_ms >= window_ms:
            break
        if not m.is_current(a):
            continue
        pending += m.step(PaddingEvent.PaddingSent, a.at_ms)
    return m.sent
