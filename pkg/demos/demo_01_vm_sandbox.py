"""
Running bytecode in the sandbox
===============================

Assemble a few instructions, run them, and watch the sandbox refuse an
access outside the plugin's heap.
"""

from fankit.vm import SandboxMemory, SandboxFault, assemble, disassemble, execute

# r1..r5 carry the entry arguments; r0 is the return value
prog = assemble("""
    mov64 r0, r1
    mul64 r0, 3
    add64 r0, 4
    exit
""")
print(disassemble(prog))
print("f(5) =", execute(prog, SandboxMemory(64), args=(5,)))

# the heap starts at address 0 and is exactly as large as the budget
mem = SandboxMemory(64)
store = assemble("""
    mov64 r1, 0
    stdw [r1+56], 42
    ldxdw r0, [r1+56]
    exit
""")
print("round trip through the heap:", execute(store, mem))

overflow = assemble("""
    mov64 r1, 0
    stdw [r1+64], 1
    exit
""")
try:
    execute(overflow, SandboxMemory(64))
except SandboxFault as exc:
    print("trapped:", exc)
