"""Textual assembler and disassembler.

One instruction per line, ``;`` (or ``#``) starts a comment::

    entry:
        mov64 r0, 0
        ldxb  r2, [r1+0]        ; byte load
        jeq   r2, 0, done       ; labels or +/- offsets
        add64 r0, r2
    done:
        exit

Operands may be decimal/hex literals or names from ``constants``; the
operand of ``call`` may also be a host-call name from ``calls``.
"""

from __future__ import annotations

import re

from . import isa
from .errors import AsmSyntaxError, JumpOutOfRange, RegisterOutOfRange, UnknownMnemonic
from .isa import Instruction, Program

_REG = re.compile(r"^r(\d+)$")
_MEM = re.compile(r"^\[\s*(r\d+)\s*(?:([+-])\s*([^\]\s]+))?\s*\]$")
_LABEL = re.compile(r"^([A-Za-z_.][\w.]*):")
_CONDITIONAL = [name for name in isa.JMP_OPS if name not in ("ja", "call", "exit")]


def _split_operands(rest):
    out, depth, cur = [], 0, ""
    for ch in rest:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if ch == "," and depth == 0:
            out.append(cur.strip())
            cur = ""
        else:
            cur += ch
    if cur.strip():
        out.append(cur.strip())
    return out


class _Line:
    __slots__ = ("lineno", "mnemonic", "operands")

    def __init__(self, lineno, mnemonic, operands):
        self.lineno = lineno
        self.mnemonic = mnemonic
        self.operands = operands


class Assembler:
    def __init__(self, constants=None, calls=None):
        self.constants = dict(constants or {})
        self.calls = dict(calls or {})

    # -- operand parsing -------------------------------------------------
    def _reg(self, tok, lineno):
        m = _REG.match(tok)
        if not m:
            raise AsmSyntaxError(f"expected register, got {tok!r}", lineno)
        idx = int(m.group(1))
        if idx >= isa.NUM_REGS:
            raise RegisterOutOfRange(f"register r{idx} does not exist (r0-r10)", lineno)
        return idx

    def _int(self, tok, lineno, names=None):
        tok = tok.strip()
        for table in (names or {}, self.constants):
            if tok in table:
                return int(table[tok])
        try:
            return int(tok, 0)
        except ValueError:
            raise AsmSyntaxError(f"bad integer or unknown name {tok!r}", lineno) from None

    def _imm32(self, tok, lineno, names=None):
        val = self._int(tok, lineno, names)
        if not -(1 << 31) <= val < (1 << 32):
            raise AsmSyntaxError(f"immediate {val} does not fit in 32 bits", lineno)
        if val >= 1 << 31:
            val -= 1 << 32
        return val

    def _off16(self, val, lineno):
        if not -(1 << 15) <= val < (1 << 15):
            raise AsmSyntaxError(f"offset {val} does not fit in 16 bits", lineno)
        return val

    def _mem(self, tok, lineno):
        m = _MEM.match(tok)
        if not m:
            raise AsmSyntaxError(f"expected memory operand [rN+off], got {tok!r}", lineno)
        reg = self._reg(m.group(1), lineno)
        off = 0
        if m.group(2):
            off = self._int(m.group(3), lineno)
            if m.group(2) == "-":
                off = -off
        return reg, self._off16(off, lineno)

    def _is_reg(self, tok):
        return bool(_REG.match(tok))

    # -- main entry --------------------------------------------------------
    def assemble(self, source: str, symbol: str = "entry") -> Program:
        lines, labels = self._scan(source)
        insns = []
        slot_of = []
        pc = 0
        for ln in lines:
            slot_of.append(pc)
            pc += 2 if ln.mnemonic == "lddw" else 1
        total = pc
        for ln, pc in zip(lines, slot_of):
            insns.extend(self._encode(ln, pc, total, labels, slot_of))
        if not insns:
            raise AsmSyntaxError("empty program")
        return Program(insns, symbol)

    def _scan(self, source):
        lines, labels, pending = [], {}, []
        for lineno, raw in enumerate(source.splitlines(), start=1):
            text = re.split(r"[;#]", raw, maxsplit=1)[0].strip()
            while text:
                m = _LABEL.match(text)
                if not m:
                    break
                name = m.group(1)
                if name in labels or name in pending:
                    raise AsmSyntaxError(f"duplicate label {name!r}", lineno)
                pending.append(name)
                text = text[m.end():].strip()
            if not text:
                continue
            parts = text.split(None, 1)
            mnemonic = parts[0].lower()
            operands = _split_operands(parts[1]) if len(parts) > 1 else []
            for name in pending:
                labels[name] = len(lines)
            pending = []
            lines.append(_Line(lineno, mnemonic, operands))
        for name in pending:
            labels[name] = len(lines)
        return lines, labels

    def _target(self, tok, pc, total, labels, slot_of, lineno):
        if tok in labels:
            idx = labels[tok]
            if idx >= len(slot_of):
                raise JumpOutOfRange(f"label {tok!r} points past the last instruction", lineno)
            target = slot_of[idx]
            off = target - pc - 1
        else:
            if not re.match(r"^[+-]?(0x[0-9a-fA-F]+|\d+)$", tok):
                raise AsmSyntaxError(f"unknown label {tok!r}", lineno)
            off = int(tok, 0)
            target = pc + 1 + off
        if not 0 <= target < total:
            raise JumpOutOfRange(f"jump target {target} outside [0, {total})", lineno)
        return self._off16(off, lineno)

    def _expect(self, ln, count):
        if len(ln.operands) != count:
            raise AsmSyntaxError(
                f"{ln.mnemonic} takes {count} operand(s), got {len(ln.operands)}", ln.lineno)

    def _encode(self, ln, pc, total, labels, slot_of):
        mn, ops, lineno = ln.mnemonic, ln.operands, ln.lineno

        if mn == "exit":
            self._expect(ln, 0)
            return [Instruction(isa.OP_EXIT)]
        if mn == "call":
            self._expect(ln, 1)
            return [Instruction(isa.OP_CALL, imm=self._imm32(ops[0], lineno, self.calls))]
        if mn == "ja":
            self._expect(ln, 1)
            return [Instruction(isa.OP_JA, offset=self._target(ops[0], pc, total, labels, slot_of, lineno))]
        if mn in _CONDITIONAL:
            self._expect(ln, 3)
            dst = self._reg(ops[0], lineno)
            off = self._target(ops[2], pc, total, labels, slot_of, lineno)
            code = isa.BPF_JMP | isa.JMP_OPS[mn]
            if self._is_reg(ops[1]):
                return [Instruction(code | isa.BPF_X, dst, self._reg(ops[1], lineno), off)]
            return [Instruction(code | isa.BPF_K, dst, 0, off, self._imm32(ops[1], lineno))]
        if mn == "lddw":
            self._expect(ln, 2)
            dst = self._reg(ops[0], lineno)
            val = self._int(ops[1], lineno)
            if not -(1 << 63) <= val < (1 << 64):
                raise AsmSyntaxError(f"immediate {val} does not fit in 64 bits", lineno)
            val &= (1 << 64) - 1
            lo, hi = val & 0xFFFFFFFF, val >> 32
            to_s32 = lambda v: v - (1 << 32) if v >= 1 << 31 else v  # noqa: E731
            return [Instruction(isa.OP_LDDW, dst, 0, 0, to_s32(lo)), Instruction(0, 0, 0, 0, to_s32(hi))]

        m = re.match(r"^(ldx|stx|st)(dw|w|h|b)$", mn)
        if m:
            kind, size = m.group(1), isa.SIZES[m.group(2)]
            self._expect(ln, 2)
            if kind == "ldx":
                dst = self._reg(ops[0], lineno)
                src, off = self._mem(ops[1], lineno)
                return [Instruction(isa.BPF_LDX | isa.BPF_MEM | size, dst, src, off)]
            dst, off = self._mem(ops[0], lineno)
            if kind == "stx":
                return [Instruction(isa.BPF_STX | isa.BPF_MEM | size, dst, self._reg(ops[1], lineno), off)]
            return [Instruction(isa.BPF_ST | isa.BPF_MEM | size, dst, 0, off, self._imm32(ops[1], lineno))]

        m = re.match(r"^([a-z]+?)(64|32)?$", mn)
        if m and m.group(1) in isa.ALU_OPS:
            name, width = m.group(1), m.group(2) or "64"
            cls = isa.BPF_ALU64 if width == "64" else isa.BPF_ALU
            code = cls | isa.ALU_OPS[name]
            if name == "neg":
                self._expect(ln, 1)
                return [Instruction(code, self._reg(ops[0], lineno))]
            self._expect(ln, 2)
            dst = self._reg(ops[0], lineno)
            if self._is_reg(ops[1]):
                return [Instruction(code | isa.BPF_X, dst, self._reg(ops[1], lineno))]
            return [Instruction(code | isa.BPF_K, dst, 0, 0, self._imm32(ops[1], lineno))]

        raise UnknownMnemonic(f"unknown mnemonic {mn!r}", lineno)


def assemble(source: str, constants=None, calls=None, symbol: str = "entry") -> Program:
    return Assembler(constants, calls).assemble(source, symbol)


_ALU_NAMES = {v: k for k, v in isa.ALU_OPS.items()}
_JMP_NAMES = {v: k for k, v in isa.JMP_OPS.items()}
_SIZE_NAMES = {v: k for k, v in isa.SIZES.items()}


def _fmt_mem(reg, off):
    if off == 0:
        return f"[r{reg}]"
    return f"[r{reg}{'+' if off > 0 else '-'}{abs(off)}]"


def disassemble(program: Program) -> str:
    """Render a program as text that :func:`assemble` maps back to it."""
    out = []
    insns = program.instructions
    pc = 0
    while pc < len(insns):
        i = insns[pc]
        cls = i.cls
        if i.opcode == isa.OP_LDDW:
            hi = insns[pc + 1].imm & 0xFFFFFFFF
            out.append(f"lddw r{i.dst}, {hex((hi << 32) | (i.imm & 0xFFFFFFFF))}")
            pc += 2
            continue
        if cls in (isa.BPF_ALU, isa.BPF_ALU64):
            name = _ALU_NAMES[i.opcode & 0xF0] + ("64" if cls == isa.BPF_ALU64 else "32")
            if name.startswith("neg"):
                out.append(f"{name} r{i.dst}")
            elif i.opcode & isa.BPF_X:
                out.append(f"{name} r{i.dst}, r{i.src}")
            else:
                out.append(f"{name} r{i.dst}, {i.imm}")
        elif cls == isa.BPF_JMP:
            name = _JMP_NAMES[i.opcode & 0xF0]
            if name == "exit":
                out.append("exit")
            elif name == "call":
                out.append(f"call {i.imm}")
            elif name == "ja":
                out.append(f"ja {i.offset:+d}")
            elif i.opcode & isa.BPF_X:
                out.append(f"{name} r{i.dst}, r{i.src}, {i.offset:+d}")
            else:
                out.append(f"{name} r{i.dst}, {i.imm}, {i.offset:+d}")
        else:
            size = _SIZE_NAMES[i.opcode & 0x18]
            if cls == isa.BPF_LDX:
                out.append(f"ldx{size} r{i.dst}, {_fmt_mem(i.src, i.offset)}")
            elif cls == isa.BPF_STX:
                out.append(f"stx{size} {_fmt_mem(i.dst, i.offset)}, r{i.src}")
            else:
                out.append(f"st{size} {_fmt_mem(i.dst, i.offset)}, {i.imm}")
        pc += 1
    return "\n".join(out) + "\n"
