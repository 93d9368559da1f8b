"""Independent reference implementations used only by tests."""

import hashlib

MOD = 2 ** 64


def wrap(v, bits=64):
    return v % (2 ** bits)


def signed(v, bits=64):
    v = wrap(v, bits)
    return v - 2 ** bits if v >= 2 ** (bits - 1) else v


def eval_alu(ops):
    """Evaluate straight-line ALU ops over unbounded integers.

    ``ops`` items: (width, name, dst, operand) where operand is ("r", idx) or
    ("k", imm32). Returns r0 or the string "trap" on division by zero.
    """
    regs = [0] * 11
    regs[10] = 2 ** 32 + 512  # frame pointer: top of the 512-byte stack at 4 GiB
    for width, name, dst, operand in ops:
        a = regs[dst] % 2 ** width
        if operand[0] == "r":
            b = regs[operand[1]] % 2 ** width
        else:
            # immediates are sign-extended to 64 bits, then truncated
            b = wrap(signed(operand[1], 32), 64) % 2 ** width
        shift_mask = width - 1
        if name == "add":
            r = a + b
        elif name == "sub":
            r = a - b
        elif name == "mul":
            r = a * b
        elif name == "div":
            if b == 0:
                return "trap"
            r = a // b
        elif name == "mod":
            if b == 0:
                return "trap"
            r = a - (a // b) * b
        elif name == "or":
            r = a | b
        elif name == "and":
            r = a & b
        elif name == "xor":
            r = a ^ b
        elif name == "lsh":
            r = a * 2 ** (b & shift_mask)
        elif name == "rsh":
            r = a // 2 ** (b & shift_mask)
        elif name == "arsh":
            r = signed(a, width) // 2 ** (b & shift_mask)
        elif name == "neg":
            r = -a
        elif name == "mov":
            r = b
        else:
            raise ValueError(name)
        regs[dst] = wrap(r, width)
    return regs[0]


def sha(b):
    return hashlib.sha256(b).digest()


ALU_NAMES = ["add", "sub", "mul", "div", "mod", "or", "and", "xor",
             "lsh", "rsh", "arsh", "neg", "mov"]
SPECIAL_IMMS = [0, 1, -1, 2 ** 31 - 1, -(2 ** 31), 63, 64, 32]


def random_alu_ops(rng, length):
    ops = []
    for _ in range(length):
        width = rng.choice([64, 64, 32])
        name = rng.choice(ALU_NAMES)
        dst = rng.randrange(0, 10)
        if rng.random() < 0.5:
            operand = ("r", rng.randrange(0, 11))
        elif rng.random() < 0.3:
            operand = ("k", rng.choice(SPECIAL_IMMS))
        else:
            operand = ("k", rng.randrange(-(2 ** 31), 2 ** 31))
        ops.append((width, name, dst, operand))
    return ops


def render_alu(ops):
    lines = []
    for width, name, dst, operand in ops:
        if name == "neg":
            lines.append(f"neg{width} r{dst}")
            continue
        src = f"r{operand[1]}" if operand[0] == "r" else str(operand[1])
        lines.append(f"{name}{width} r{dst}, {src}")
    lines.append("exit")
    return "\n".join(lines)


def oracle_leaf_bits(name, depth):
    bits = "".join(format(b, "08b") for b in hashlib.sha256(name.encode()).digest())
    return bits[:depth]


def oracle_root(entries, depth):
    """Dense Merkle root straight from the formula.

    ``entries``: name -> (plugin_bytes, meta_bytes). Every one of the 2^depth
    leaves is materialized and hashed pairwise, left to right.
    """
    z = bytes(32)
    buckets = {}
    for name, (plugin, meta) in entries.items():
        buckets.setdefault(int(oracle_leaf_bits(name, depth), 2), []).append(name)
    layer = []
    for i in range(2 ** depth):
        names = sorted(buckets.get(i, []), key=lambda n: n.encode())
        if not names:
            layer.append(z)
            continue
        parts = []
        for n in names:
            plugin, meta = entries[n]
            parts.append(n.encode() + b"\x00" + sha(plugin + b"\x00" + meta))
        layer.append(sha(b";".join(parts)))
    while len(layer) > 1:
        layer = [sha(layer[i] + layer[i + 1]) for i in range(0, len(layer), 2)]
    return layer[0]
