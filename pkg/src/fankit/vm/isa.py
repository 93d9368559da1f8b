"""Instruction set, 8-byte encoding and program validation.

The encoding follows the public eBPF layout::

    byte 0      opcode
    byte 1      dst (low nibble) | src (high nibble)
    bytes 2-3   signed 16-bit offset, little endian
    bytes 4-7   signed 32-bit immediate, little endian

``lddw`` takes two slots; the second slot has opcode 0 and carries the
upper 32 bits of the immediate.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

from .errors import ValidationError

# instruction classes
BPF_LD = 0x00
BPF_LDX = 0x01
BPF_ST = 0x02
BPF_STX = 0x03
BPF_ALU = 0x04
BPF_JMP = 0x05
BPF_ALU64 = 0x07

# memory sizes / modes
BPF_W = 0x00
BPF_H = 0x08
BPF_B = 0x10
BPF_DW = 0x18
BPF_IMM = 0x00
BPF_MEM = 0x60

# operand source
BPF_K = 0x00
BPF_X = 0x08

ALU_OPS = {
    "add": 0x00, "sub": 0x10, "mul": 0x20, "div": 0x30, "or": 0x40,
    "and": 0x50, "lsh": 0x60, "rsh": 0x70, "neg": 0x80, "mod": 0x90,
    "xor": 0xA0, "mov": 0xB0, "arsh": 0xC0,
}
JMP_OPS = {
    "ja": 0x00, "jeq": 0x10, "jgt": 0x20, "jge": 0x30, "jset": 0x40,
    "jne": 0x50, "jsgt": 0x60, "jsge": 0x70, "call": 0x80, "exit": 0x90,
    "jlt": 0xA0, "jle": 0xB0, "jslt": 0xC0, "jsle": 0xD0,
}
SIZES = {"w": BPF_W, "h": BPF_H, "b": BPF_B, "dw": BPF_DW}
WIDTH = {BPF_W: 4, BPF_H: 2, BPF_B: 1, BPF_DW: 8}

OP_LDDW = BPF_LD | BPF_IMM | BPF_DW  # 0x18
OP_CALL = BPF_JMP | JMP_OPS["call"]
OP_EXIT = BPF_JMP | JMP_OPS["exit"]
OP_JA = BPF_JMP | JMP_OPS["ja"]

NUM_REGS = 11
FRAME_REG = 10
INSN_SIZE = 8

_STRUCT = struct.Struct("<BBhi")


def _supported_opcodes():
    ops = {OP_LDDW}
    for cls in (BPF_ALU, BPF_ALU64):
        for op in ALU_OPS.values():
            ops.add(cls | op | BPF_K)
            if op != ALU_OPS["neg"]:
                ops.add(cls | op | BPF_X)
    for name, op in JMP_OPS.items():
        if name in ("ja", "call", "exit"):
            ops.add(BPF_JMP | op)
        else:
            ops.add(BPF_JMP | op | BPF_K)
            ops.add(BPF_JMP | op | BPF_X)
    for size in SIZES.values():
        ops.add(BPF_LDX | BPF_MEM | size)
        ops.add(BPF_ST | BPF_MEM | size)
        ops.add(BPF_STX | BPF_MEM | size)
    return frozenset(ops)


SUPPORTED_OPCODES = _supported_opcodes()


@dataclass(frozen=True)
class Instruction:
    opcode: int
    dst: int = 0
    src: int = 0
    offset: int = 0
    imm: int = 0

    @property
    def cls(self):
        return self.opcode & 0x07

    def encode(self) -> bytes:
        return _STRUCT.pack(self.opcode, (self.src << 4) | self.dst, self.offset, self.imm)

    @classmethod
    def decode(cls, raw: bytes) -> "Instruction":
        opcode, regs, offset, imm = _STRUCT.unpack(raw)
        return cls(opcode, regs & 0x0F, regs >> 4, offset, imm)


def is_jump(insn: Instruction) -> bool:
    return insn.cls == BPF_JMP and insn.opcode not in (OP_CALL, OP_EXIT)


def writes_dst(insn: Instruction) -> bool:
    return insn.cls in (BPF_ALU, BPF_ALU64, BPF_LDX) or insn.opcode == OP_LDDW


@dataclass(eq=False)
class Program:
    """A validated instruction stream bound to an entry-point symbol."""

    instructions: list
    symbol: str = "entry"
    _digest: bytes = field(default=b"", repr=False)

    def __post_init__(self):
        self.instructions = list(self.instructions)
        validate(self.instructions)

    def __len__(self):
        return len(self.instructions)

    def __eq__(self, other):
        if not isinstance(other, Program):
            return NotImplemented
        return self.instructions == other.instructions and self.symbol == other.symbol

    def encode(self) -> bytes:
        return b"".join(i.encode() for i in self.instructions)

    @property
    def digest(self) -> bytes:
        if not self._digest:
            self._digest = hashlib.sha256(self.encode()).digest()
        return self._digest

    @classmethod
    def decode(cls, data: bytes, symbol: str = "entry") -> "Program":
        if len(data) % INSN_SIZE:
            raise ValidationError(f"bytecode length {len(data)} is not a multiple of 8")
        insns = [Instruction(op, regs & 0x0F, regs >> 4, off, imm)
                 for op, regs, off, imm in _STRUCT.iter_unpack(data)]
        return cls(insns, symbol)


def validate(insns) -> None:
    """Static checks: opcode subset, registers, jump targets, no fall-through."""
    n = len(insns)
    if n == 0:
        raise ValidationError("empty program")
    wide_tail = set()
    for pc, insn in enumerate(insns):
        if pc in wide_tail:
            if insn.opcode != 0 or insn.dst or insn.src or insn.offset:
                raise ValidationError(f"pc {pc}: malformed lddw second slot")
            continue
        if insn.opcode not in SUPPORTED_OPCODES:
            raise ValidationError(f"pc {pc}: unsupported opcode {insn.opcode:#04x}")
        if insn.dst >= NUM_REGS or insn.src >= NUM_REGS:
            raise ValidationError(f"pc {pc}: register index out of range")
        if insn.dst == FRAME_REG and writes_dst(insn):
            raise ValidationError(f"pc {pc}: r10 is read-only")
        if insn.opcode == OP_LDDW:
            if pc + 1 >= n:
                raise ValidationError(f"pc {pc}: truncated lddw")
            wide_tail.add(pc + 1)
        elif is_jump(insn):
            target = pc + 1 + insn.offset
            if not 0 <= target < n:
                raise ValidationError(f"pc {pc}: jump target {target} out of range")
    for pc, insn in enumerate(insns):
        if is_jump(insn) and pc + 1 + insn.offset in wide_tail:
            raise ValidationError(f"pc {pc}: jump into the middle of lddw")
    last = insns[-1]
    if (n - 1) in wide_tail or last.opcode not in (OP_EXIT, OP_JA):
        raise ValidationError("program can fall off its end (last instruction must be exit or ja)")
