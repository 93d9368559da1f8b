"""Hook registry, plugin contexts and dispatch.

Dispatch order for one hook: the ``replace`` occupant if any, otherwise the
host default; then every ``add`` entry point in load order. ``add`` entries
cannot veto the primary result, but a hook may publish a ``combine``
function to fold their results into the returned value.
"""

from __future__ import annotations

import hashlib
import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from fankit.vm import (
    CALL_NAMES,
    DEFAULT_BUDGET,
    INPUT_BASE,
    BadHostCall,
    HostCallTable,
    Program,
    SandboxMemory,
    ValidationError,
    VMTrap,
    execute,
    sandbox_alloc,
)
from fankit.vm.machine import M64

from . import hooks as H
from .descriptor import EntryPointSpec, PluginDescriptor
from .errors import (
    AccessDenied,
    BudgetRejected,
    GateDenied,
    PluginError,
    ReplaceConflict,
    UnknownHook,
    UnknownKey,
    ValidationFailed,
)

log = logging.getLogger(__name__)

DEFAULT_HEAP_CAP = 64 * 1024 * 1024
HANDLE_TAG = 0x4000_0000_0000_0000
ALL_FIELDS = "*"


@dataclass
class FieldKey:
    name: str
    id: int
    getter: Optional[Callable] = None
    setter: Optional[Callable] = None


@dataclass
class Hook:
    id: int
    name: str
    default: Optional[Callable]
    fields: object
    combine: Optional[Callable]
    default_calls: int = 0

    def allows(self, key_name):
        return self.fields == ALL_FIELDS or key_name in self.fields


@dataclass(eq=False)
class PluginContext:
    name: str
    namespace: str
    sandbox: SandboxMemory
    descriptor: PluginDescriptor
    loaded_at: int = 0
    programs: dict = field(default_factory=dict)
    calls: Optional[HostCallTable] = None
    load_us: float = 0.0
    cached_entries: int = 0
    loaded: bool = True


@dataclass(eq=False)
class Attachment:
    ctx: PluginContext
    entry: EntryPointSpec
    program: Program

    @property
    def param(self):
        return self.entry.param or 0


@dataclass
class FaultRecord:
    plugin: str
    hook: str
    error: Exception


@dataclass
class LogRecord:
    plugin: str
    hook: str
    code: int
    value: int


class HostServices:
    """Side-effecting host calls. Hosts override what they support."""

    def send_signal_cell(self, circuit, signal_id):
        raise BadHostCall("send_signal_cell is not available on this host")

    def schedule_padding(self, circuit, delay_us):
        raise BadHostCall("schedule_padding is not available on this host")

    def sample_uniform(self, lo, hi):
        raise BadHostCall("sample_uniform is not available on this host")


class HookRegistry:
    """Published hooks and field keys plus the attachment table.

    The attachment table is an immutable tuple of ``(replace, chain)`` pairs
    indexed by hook id and swapped as a whole, so a dispatch sees the
    registry either before or after a load, never half of one.
    """

    def __init__(self):
        self._hooks = []
        self._by_name = {}
        self._fields = {}
        self._fields_by_name = {}
        self.table = ()
        self._lock = threading.Lock()

    # -- publication -------------------------------------------------------
    def publish(self, name, default=None, fields=(), combine=None) -> int:
        with self._lock:
            if name in self._by_name:
                raise PluginError(f"hook {name!r} already published")
            hid = len(self._hooks)
            fset = fields if fields == ALL_FIELDS else frozenset(fields)
            self._hooks.append(Hook(hid, name, default, fset, combine))
            self._by_name[name] = hid
            self.table = self.table + ((None, ()),)
            return hid

    def publish_field(self, name, getter=None, setter=None) -> int:
        if name in self._fields_by_name:
            raise PluginError(f"field {name!r} already published")
        fid = H.FIELD_IDS.get(name)
        if fid is None:
            fid = max([999] + [k for k in self._fields if k >= 1000]) + 1
        key = FieldKey(name, fid, getter, setter)
        self._fields[fid] = key
        self._fields_by_name[name] = key
        return fid

    def names(self):
        return [h.name for h in self._hooks]

    def hook(self, name_or_id) -> Hook:
        if isinstance(name_or_id, int):
            return self._hooks[name_or_id]
        try:
            return self._hooks[self._by_name[name_or_id]]
        except KeyError:
            raise UnknownHook(name_or_id) from None

    def hook_id(self, name) -> int:
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownHook(name) from None

    def field(self, key) -> FieldKey:
        f = self._fields.get(key) if isinstance(key, int) else self._fields_by_name.get(key)
        if f is None:
            raise UnknownKey(f"unknown field key {key!r}")
        return f

    def constants(self) -> dict:
        """Names usable as assembler immediates."""
        out = H.assembler_constants()
        out.update({name: f.id for name, f in self._fields_by_name.items()})
        return out

    # -- attachment table --------------------------------------------------
    def _swap(self, mutate):
        with self._lock:
            table = [list(pair) for pair in self.table]
            mutate(table)
            self.table = tuple((r, tuple(c)) for r, c in table)


class _Invocation:
    __slots__ = ("ctx", "hook", "handles")

    def __init__(self, ctx, hook):
        self.ctx = ctx
        self.hook = hook
        self.handles = []

    def handle(self, obj):
        self.handles.append(obj)
        return HANDLE_TAG | (len(self.handles) - 1)

    def resolve(self, value):
        idx = value - HANDLE_TAG
        if value & HANDLE_TAG and 0 <= idx < len(self.handles):
            return self.handles[idx]
        raise BadHostCall(f"invalid object handle {value:#x}")


def _to_word(value):
    if isinstance(value, bool):
        return int(value)
    return int(value) & M64


class PluginManager:
    def __init__(self, registry: Optional[HookRegistry] = None, host: Optional[HostServices] = None,
                 gate: Optional[Callable] = None, heap_cap: int = DEFAULT_HEAP_CAP,
                 auto_detach: bool = False, conservative: bool = False,
                 budget: int = DEFAULT_BUDGET):
        self.registry = registry or HookRegistry()
        self.host = host or HostServices()
        self.gate = gate
        self.heap_cap = heap_cap
        self.auto_detach = auto_detach
        self.conservative = conservative
        self.budget = budget
        self.cache = {}
        self.contexts = {}
        self.faults = []
        self.logs = []
        self.load_log = []
        self.epoch = 0
        self._stack = []

    # -- host setup helpers ------------------------------------------------
    def publish_core_hooks(self, defaults=None, fields=None):
        """Publish the six core hooks. ``relay_process_edge_unknown`` gets the
        conservative-policy verdict logic."""
        defaults = defaults or {}
        fields = fields or {}
        for name in H.CORE_HOOKS:
            combine = self._edge_unknown_verdict if name == H.RELAY_PROCESS_EDGE_UNKNOWN else None
            default = defaults.get(name)
            if name == H.RELAY_PROCESS_EDGE_UNKNOWN and default is None:
                default = self._edge_unknown_default
            self.registry.publish(name, default, fields.get(name, ALL_FIELDS), combine)

    def _edge_unknown_default(self, args):
        return H.EDGE_TEARDOWN if self.conservative else H.EDGE_DROP

    @staticmethod
    def _edge_unknown_verdict(primary, chain_results):
        if any(chain_results):
            return H.EDGE_HANDLED
        return primary

    def clear_cache(self):
        self.cache.clear()

    # -- loading -----------------------------------------------------------
    def load(self, desc: PluginDescriptor) -> PluginContext:
        t0 = time.perf_counter_ns()
        if desc.name in self.contexts:
            raise PluginError(f"{desc.name} is already loaded")
        if self.gate is not None:
            verdict = self.gate(desc)
            if verdict is not True and not getattr(verdict, "admitted", False):
                raise GateDenied(getattr(verdict, "reason", verdict))
        if desc.heap_budget > self.heap_cap:
            raise BudgetRejected(f"heap budget {desc.heap_budget} exceeds host cap {self.heap_cap}")
        reg = self.registry
        hook_ids = [reg.hook_id(ep.hook) for ep in desc.entry_points]
        table = reg.table
        for ep, hid in zip(desc.entry_points, hook_ids):
            if ep.operation == "replace" and table[hid][0] is not None:
                raise ReplaceConflict(f"hook {ep.hook!r} already replaced by {table[hid][0].ctx.name}")

        programs = {}
        cached = 0
        for ep in desc.entry_points:
            if ep.filename in programs:
                continue
            blob = desc.bytecode_blobs.get(ep.filename)
            if blob is None:
                raise ValidationFailed(ep.filename, "bytecode file missing from bundle")
            digest = hashlib.sha256(blob).digest()
            prog = self.cache.get(digest)
            if prog is None:
                try:
                    prog = Program.decode(blob, ep.filename)
                except ValidationError as exc:
                    raise ValidationFailed(ep.filename, str(exc)) from exc
                self.cache[digest] = prog
            else:
                cached += 1
            programs[ep.filename] = prog

        ctx = PluginContext(
            name=desc.name, namespace=desc.namespace, sandbox=SandboxMemory(desc.heap_budget),
            descriptor=desc, loaded_at=self.epoch, programs=programs, cached_entries=cached)
        ctx.calls = self._call_table(ctx)
        atts = [(hid, Attachment(ctx, ep, programs[ep.filename]))
                for ep, hid in zip(desc.entry_points, hook_ids)]

        def attach(tbl):
            for hid, att in atts:
                if att.entry.operation == "replace":
                    tbl[hid][0] = att
                else:
                    tbl[hid][1] = list(tbl[hid][1]) + [att]

        reg._swap(attach)
        self.contexts[desc.name] = ctx
        ctx.load_us = (time.perf_counter_ns() - t0) / 1000.0
        self.load_log.append((desc.name, ctx.load_us, cached))
        return ctx

    def unload(self, ctx: PluginContext) -> None:
        if not ctx.loaded:
            return

        def detach(tbl):
            for pair in tbl:
                if pair[0] is not None and pair[0].ctx is ctx:
                    pair[0] = None
                pair[1] = [a for a in pair[1] if a.ctx is not ctx]

        self.registry._swap(detach)
        ctx.loaded = False
        self.contexts.pop(ctx.name, None)

    # -- dispatch ----------------------------------------------------------
    def dispatch(self, hook, args=None):
        reg = self.registry
        h = reg.hook(hook)
        replace, chain = reg.table[h.id]
        if replace is None:
            h.default_calls += 1
            result = h.default(args) if h.default is not None else None
        else:
            result = self._run(replace, h, args)
        if chain:
            outs = [self._run(att, h, args) for att in chain]
        else:
            outs = []
        if h.combine is not None:
            result = h.combine(result, outs)
        return result

    def _run(self, att: Attachment, hook: Hook, args):
        ctx = att.ctx
        inv = _Invocation(ctx, hook)
        self._stack.append(inv)
        try:
            h_args = inv.handle(args)
            payload = b""
            if isinstance(args, dict):
                payload = args.get("payload", b"") or b""
            return execute(att.program, ctx.sandbox, ctx.calls, input=payload,
                           args=(h_args, att.param, INPUT_BASE, len(payload)), budget=self.budget)
        except VMTrap as exc:
            log.warning("plugin %s trapped in %s: %s", ctx.name, hook.name, exc)
            self.faults.append(FaultRecord(ctx.name, hook.name, exc))
            if self.auto_detach:
                self.unload(ctx)
            return None
        finally:
            self._stack.pop()

    # -- get/set -----------------------------------------------------------
    def _checked_field(self, hook: Optional[Hook], key):
        f = self.registry.field(key)
        if hook is not None and not hook.allows(f.name):
            raise AccessDenied(f"{f.name} is not accessible from hook {hook.name}")
        return f

    def get(self, key, *objs, hook=None):
        """Read a host field, exactly as a plugin's ``get`` call would."""
        f = self._checked_field(self.registry.hook(hook) if hook is not None else None, key)
        if f.getter is None:
            raise AccessDenied(f"{f.name} is not readable")
        return f.getter(*objs)

    def set(self, key, *objs_and_value, hook=None):
        f = self._checked_field(self.registry.hook(hook) if hook is not None else None, key)
        if f.setter is None:
            raise AccessDenied(f"{f.name} is not writable")
        *objs, value = objs_and_value
        f.setter(*objs, value)

    def _call_table(self, ctx: PluginContext) -> HostCallTable:
        current = self._stack

        def objects(inv, argc, regs):
            if argc > len(regs):
                raise BadHostCall(f"argc {argc} too large")
            return [inv.resolve(r) for r in regs[:argc]]

        def h_get(mem, key, argc, a1, a2, a3):
            inv = current[-1]
            f = self._checked_field(inv.hook, key)
            if f.getter is None:
                raise AccessDenied(f"{f.name} is not readable")
            value = f.getter(*objects(inv, argc, (a1, a2, a3)))
            if isinstance(value, (int, bool)):
                return _to_word(value)
            if value is None:
                return 0
            return inv.handle(value)

        def h_set(mem, key, argc, a1, a2, a3):
            inv = current[-1]
            f = self._checked_field(inv.hook, key)
            if f.setter is None:
                raise AccessDenied(f"{f.name} is not writable")
            regs = (a1, a2, a3)
            if argc >= len(regs):
                raise BadHostCall(f"argc {argc} too large for set")
            f.setter(*objects(inv, argc, regs), regs[argc])
            return 0

        def h_alloc(mem, size, *_):
            if size <= 0 or size > mem.heap_limit:
                raise BadHostCall(f"bad allocation size {size}")
            return sandbox_alloc(mem, size)

        def h_log(mem, code, value, *_):
            inv = current[-1]
            self.logs.append(LogRecord(ctx.name, inv.hook.name, code, value))
            return 0

        def h_signal(mem, circ, signal_id, *_):
            self.host.send_signal_cell(current[-1].resolve(circ), signal_id)
            return 0

        def h_padding(mem, circ, delay_us, *_):
            self.host.schedule_padding(current[-1].resolve(circ), delay_us)
            return 0

        def h_uniform(mem, lo, hi, *_):
            if lo > hi:
                raise BadHostCall("sample_uniform: lo > hi")
            return self.host.sample_uniform(lo, hi)

        table = HostCallTable()
        for name, fn in (("get", h_get), ("set", h_set), ("alloc", h_alloc), ("log", h_log),
                         ("send_signal_cell", h_signal), ("schedule_padding", h_padding),
                         ("sample_uniform", h_uniform)):
            table.register(CALL_NAMES[name], fn)
        return table
