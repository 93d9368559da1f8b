"""Sandboxed address space.

Virtual layout (all regions disjoint)::

    [0, heap_limit)                          heap, read/write, bump allocated
    [STACK_BASE, STACK_BASE + STACK_SIZE)    per-invocation stack, read/write
    [INPUT_BASE, INPUT_BASE + len(input))    caller-supplied input, read-only

Every access is checked in :meth:`SandboxMemory.translate`; nothing outside
these buffers is reachable from bytecode.
"""

from __future__ import annotations

import mmap

from .errors import OutOfPluginMemory, SandboxFault

STACK_SIZE = 512
STACK_BASE = 0x1_0000_0000
INPUT_BASE = 0x2_0000_0000
ALIGN = 8


class SandboxMemory:
    __slots__ = ("heap_limit", "heap", "stack", "input", "alloc_cursor", "_backing", "_guard")

    def __init__(self, heap_limit: int, *, guard: int = 0, canary: int = 0xA5):
        if heap_limit <= 0:
            raise ValueError("heap_limit must be positive")
        self.heap_limit = heap_limit
        self._guard = guard
        if guard:
            # Test-only layout: heap is a view into a larger buffer whose
            # guard bytes must never change.
            self._backing = bytearray([canary]) * (guard * 2 + heap_limit)
            self._backing[guard:guard + heap_limit] = bytes(heap_limit)
            self.heap = memoryview(self._backing)[guard:guard + heap_limit]
        else:
            self._backing = None
            # anonymous maps are zero-filled lazily, so big budgets are cheap
            self.heap = mmap.mmap(-1, heap_limit)
        self.stack = bytearray(STACK_SIZE)
        self.input = b""
        self.alloc_cursor = 0

    def guards_intact(self, canary: int = 0xA5) -> bool:
        if not self._guard:
            return True
        g = self._guard
        pre = self._backing[:g]
        post = self._backing[g + self.heap_limit:]
        return pre.count(canary) == g and post.count(canary) == g

    def reset_stack(self):
        self.stack[:] = bytes(STACK_SIZE)

    def translate(self, vaddr: int, width: int, write: bool = False):
        """Map ``[vaddr, vaddr+width)`` to ``(buffer, offset)`` or raise SandboxFault."""
        if width <= 0:
            raise SandboxFault(vaddr, width, "empty access")
        end = vaddr + width
        if 0 <= vaddr and end <= self.heap_limit:
            return self.heap, vaddr
        if STACK_BASE <= vaddr and end <= STACK_BASE + STACK_SIZE:
            return self.stack, vaddr - STACK_BASE
        if INPUT_BASE <= vaddr and end <= INPUT_BASE + len(self.input):
            if write:
                raise SandboxFault(vaddr, width, "write to read-only input")
            return self.input, vaddr - INPUT_BASE
        raise SandboxFault(vaddr, width)

    def read(self, vaddr: int, width: int) -> bytes:
        buf, off = self.translate(vaddr, width)
        return bytes(buf[off:off + width])

    def write(self, vaddr: int, data: bytes) -> None:
        buf, off = self.translate(vaddr, len(data), write=True)
        buf[off:off + len(data)] = data

    def snapshot(self) -> bytes:
        return bytes(self.heap[:self.heap_limit])


def sandbox_alloc(ctx: SandboxMemory, size: int) -> int:
    """Bump-allocate ``size`` zeroed bytes and return their virtual address."""
    if size <= 0:
        raise ValueError("allocation size must be positive")
    addr = (ctx.alloc_cursor + ALIGN - 1) & ~(ALIGN - 1)
    if addr + size > ctx.heap_limit:
        raise OutOfPluginMemory(f"cannot allocate {size} bytes at {addr} (limit {ctx.heap_limit})")
    ctx.heap[addr:addr + size] = bytes(size)
    ctx.alloc_cursor = addr + size
    return addr


def translate(ctx: SandboxMemory, vaddr: int, width: int, write: bool = False):
    return ctx.translate(vaddr, width, write)
