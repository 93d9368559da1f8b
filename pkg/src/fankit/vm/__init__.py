"""Sandboxed 64-bit register VM (eBPF instruction subset)."""

from .asm import Assembler, assemble, disassemble
from .errors import (
    AsmSyntaxError,
    AssemblerError,
    BadHostCall,
    DivisionByZero,
    InstructionBudgetExceeded,
    JumpOutOfRange,
    OutOfPluginMemory,
    RegisterOutOfRange,
    SandboxFault,
    UnknownMnemonic,
    ValidationError,
    VMTrap,
)
from .isa import Instruction, Program
from .machine import CALL_NAMES, DEFAULT_BUDGET, HostCallTable, execute
from .memory import INPUT_BASE, STACK_BASE, STACK_SIZE, SandboxMemory, sandbox_alloc, translate

__all__ = [
    "Assembler", "assemble", "disassemble", "Instruction", "Program", "HostCallTable",
    "execute", "SandboxMemory", "sandbox_alloc", "translate", "CALL_NAMES",
    "DEFAULT_BUDGET", "INPUT_BASE", "STACK_BASE", "STACK_SIZE",
    "AssemblerError", "AsmSyntaxError", "UnknownMnemonic", "RegisterOutOfRange",
    "JumpOutOfRange", "ValidationError", "VMTrap", "SandboxFault",
    "InstructionBudgetExceeded", "BadHostCall", "DivisionByZero", "OutOfPluginMemory",
]
