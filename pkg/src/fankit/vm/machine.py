"""Bytecode interpreter and host-call table."""

from __future__ import annotations

from . import isa
from .errors import BadHostCall, DivisionByZero, InstructionBudgetExceeded, SandboxFault
from .isa import Program
from .memory import INPUT_BASE, STACK_BASE, STACK_SIZE, SandboxMemory

DEFAULT_BUDGET = 1_000_000
M64 = (1 << 64) - 1
M32 = (1 << 32) - 1
SIGN64 = 1 << 63

# Stable host-call numbers.
CALL_GET = 1
CALL_SET = 2
CALL_ALLOC = 3
CALL_LOG = 4
CALL_SEND_SIGNAL_CELL = 5
CALL_SCHEDULE_PADDING = 6
CALL_SAMPLE_UNIFORM = 7

CALL_NAMES = {
    "get": CALL_GET,
    "set": CALL_SET,
    "alloc": CALL_ALLOC,
    "log": CALL_LOG,
    "send_signal_cell": CALL_SEND_SIGNAL_CELL,
    "schedule_padding": CALL_SCHEDULE_PADDING,
    "sample_uniform": CALL_SAMPLE_UNIFORM,
}


class HostCallTable:
    """Call number -> ``fn(mem, r1, r2, r3, r4, r5) -> int``.

    Unknown numbers trap with :class:`BadHostCall`.
    """

    def __init__(self, entries=None):
        self.entries = dict(entries or {})

    def register(self, number: int, fn) -> None:
        self.entries[number] = fn

    def call(self, number, mem, r1, r2, r3, r4, r5):
        fn = self.entries.get(number)
        if fn is None:
            raise BadHostCall(f"unknown host call {number}")
        result = fn(mem, r1, r2, r3, r4, r5)
        return int(result or 0) & M64


def _s64(v):
    return v - (1 << 64) if v & SIGN64 else v


def _s32(v):
    v &= M32
    return v - (1 << 32) if v & 0x80000000 else v


def _compile(program: Program):
    """Flatten to (opcode, dst, src, off, imm64) tuples; lddw becomes one slot plus a filler."""
    code = getattr(program, "_code", None)
    if code is not None:
        return code
    insns = program.instructions
    code = []
    pc = 0
    while pc < len(insns):
        i = insns[pc]
        if i.opcode == isa.OP_LDDW:
            value = ((insns[pc + 1].imm & M32) << 32) | (i.imm & M32)
            code.append((i.opcode, i.dst, i.src, i.offset, value))
            code.append((-1, 0, 0, 0, 0))
            pc += 2
            continue
        code.append((i.opcode, i.dst, i.src, i.offset, i.imm & M64))
        pc += 1
    program._code = code
    return code


_ALU64_BASE = isa.BPF_ALU64
_ALU32_BASE = isa.BPF_ALU


def _alu(op, a, b, width_mask):
    if op == 0x00:
        return (a + b) & width_mask
    if op == 0x10:
        return (a - b) & width_mask
    if op == 0x20:
        return (a * b) & width_mask
    if op == 0x30:
        if b == 0:
            raise DivisionByZero("division by zero")
        return a // b
    if op == 0x40:
        return a | b
    if op == 0x50:
        return a & b
    if op == 0x60:
        return (a << (b & (63 if width_mask == M64 else 31))) & width_mask
    if op == 0x70:
        return a >> (b & (63 if width_mask == M64 else 31))
    if op == 0x80:
        return (-a) & width_mask
    if op == 0x90:
        if b == 0:
            raise DivisionByZero("modulo by zero")
        return a % b
    if op == 0xA0:
        return a ^ b
    if op == 0xB0:
        return b
    # arsh
    if width_mask == M64:
        return (_s64(a) >> (b & 63)) & M64
    return (_s32(a) >> (b & 31)) & M32


def execute(program: Program, ctx: SandboxMemory, host: HostCallTable | None = None,
            input: bytes = b"", args=None, budget: int = DEFAULT_BUDGET) -> int:
    """Run ``program`` to ``exit`` and return r0.

    Without ``args``, r1 points at the read-only ``input`` and r2 holds its
    length. Otherwise ``args`` (up to five values) seed r1..r5.
    """
    code = _compile(program)
    ctx.reset_stack()
    ctx.input = bytes(input)
    regs = [0] * 11
    if args is None:
        regs[1] = INPUT_BASE
        regs[2] = len(ctx.input)
    else:
        for k, v in enumerate(args[:5]):
            regs[k + 1] = int(v) & M64
    regs[10] = STACK_BASE + STACK_SIZE
    translate = ctx.translate
    n = len(code)
    pc = 0
    count = 0
    while True:
        if count >= budget:
            raise InstructionBudgetExceeded(f"exceeded {budget} instructions")
        count += 1
        op, dst, src, off, imm = code[pc]
        pc += 1
        cls = op & 0x07

        if cls == _ALU64_BASE:
            b = regs[src] if op & 0x08 else imm
            regs[dst] = _alu(op & 0xF0, regs[dst], b, M64)
        elif cls == isa.BPF_JMP:
            jop = op & 0xF0
            if jop == 0x90:  # exit
                return regs[0]
            if jop == 0x80:  # call
                if host is None:
                    raise BadHostCall(f"host call {_s32(imm)} with no host table")
                regs[0] = host.call(_s32(imm), ctx, regs[1], regs[2], regs[3], regs[4], regs[5])
                continue
            if jop == 0x00:
                pc += off
                continue
            a = regs[dst]
            b = regs[src] if op & 0x08 else imm
            if jop == 0x10:
                taken = a == b
            elif jop == 0x50:
                taken = a != b
            elif jop == 0x20:
                taken = a > b
            elif jop == 0x30:
                taken = a >= b
            elif jop == 0xA0:
                taken = a < b
            elif jop == 0xB0:
                taken = a <= b
            elif jop == 0x40:
                taken = (a & b) != 0
            elif jop == 0x60:
                taken = _s64(a) > _s64(b)
            elif jop == 0x70:
                taken = _s64(a) >= _s64(b)
            elif jop == 0xC0:
                taken = _s64(a) < _s64(b)
            else:
                taken = _s64(a) <= _s64(b)
            if taken:
                pc += off
        elif cls == _ALU32_BASE:
            b = regs[src] if op & 0x08 else imm
            regs[dst] = _alu(op & 0xF0, regs[dst] & M32, b & M32, M32)
        elif cls == isa.BPF_LDX:
            width = isa.WIDTH[op & 0x18]
            buf, o = translate((regs[src] + off) & M64, width)
            regs[dst] = int.from_bytes(buf[o:o + width], "little")
        elif cls == isa.BPF_STX or cls == isa.BPF_ST:
            width = isa.WIDTH[op & 0x18]
            value = regs[src] if cls == isa.BPF_STX else imm
            buf, o = translate((regs[dst] + off) & M64, width, True)
            buf[o:o + width] = (value & ((1 << (8 * width)) - 1)).to_bytes(width, "little")
        elif op == isa.OP_LDDW:
            regs[dst] = imm
            pc += 1
        else:  # pragma: no cover - validator rejects everything else
            raise SandboxFault(pc, 8, f"illegal opcode {op:#x}")
        if pc >= n:  # pragma: no cover - validator forbids fall-through
            raise SandboxFault(pc, 8, "fell off program end")
