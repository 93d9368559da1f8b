"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line with the measured quantities.
"""

import itertools
import random
import statistics
import time

import pytest

from fankit.ftl import (
    DeveloperKeySet,
    GateReason,
    IssuanceOrder,
    RelayKey,
    SigningKey,
    TransparencyLog,
    build_tree,
    issue_order,
    leaf_index,
    load_gate,
    make_protest,
    prove_availability,
    verify_path,
    withdraw_order,
)
from fankit.ftl.records import H
from fankit.padding import PaddingEvent as E
from fankit.padding import builtin_dropmark_def_machine, instance
from fankit.plugins import (
    TABLE1_BUNDLES,
    HookRegistry,
    PluginManager,
    builtin_bundle,
    format_plugin_file,
    parse_plugin_file,
)
from fankit.plugins.bench import measure_load
from fankit.plugins.builtin import plugin_assembler
from fankit.plugins.descriptor import EntryPointSpec, PluginDescriptor
from fankit.sim import SimConfig, bayes_detection_rate, run
from fankit.vm import HostCallTable, SandboxMemory, VMTrap, assemble, execute

from oracles import eval_alu, random_alu_ops, render_alu
from test_vm import random_memory_program

DROPMARK_PLUGIN_TEXT = """memory 16777216
circpad_global_machine_init protocol_circpad add circpad_dropmark_def.o
circpad_setup_machine_on_circ_add protocol_circpad add circpad_dropmark_circ_setup.o
relay_process_edge_unknown protocol_relay add circpad_dropmark_receive_sig.o
connedge_connection_ap_handshake_send_begin_add protocol_conn_edge param 1 add circpad_dropmark_send_sig.o
connedge_received_connected_cell_add protocol_conn_edge param 2 add circpad_dropmark_send_sig.o
circpad_send_padding_cell_for_callback_replace protocol_circpad replace circpad_dropmark_send_padding_cell.o
"""

DROPMARK_EDGES = {
    ("start", "Activate", "burst"),
    ("burst", "StateLengthZero", "gap"),
    ("burst", "BeSilent", "silence"),
    ("gap", "BeSilent", "silence"),
    ("gap", "PaddingSent", "burst"),
    ("silence", "Activate", "burst"),
    ("burst", "CircuitClose", "end"),
    ("gap", "CircuitClose", "end"),
    ("silence", "CircuitClose", "end"),
}


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail, elapsed):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail} [{elapsed:.2f}s]")
        assert ok, detail
    return emit


def test_criterion_1_bayes(report):
    t0 = time.perf_counter()
    attack = bayes_detection_rate(0.01, 0.999972, 0.007713)
    defended = {F: bayes_detection_rate(F, 0.999972, 0.999975) for F in (0.01, 0.05, 0.1, 0.2, 0.5)}
    worst = max(abs(v - F) for F, v in defended.items())
    ok = abs(attack - 0.567) <= 0.001 and worst <= 0.0001
    report(1, ok, f"P(F|D) at F=0.01 = {attack:.6f}; defended max |P-F| = {worst:.2e}",
           time.perf_counter() - t0)


# -- criterion 2 -------------------------------------------------------------

DEVSET, DEVKEYS = DeveloperKeySet.generate(3, 2, seed=b"acceptance")
RELAYS = [RelayKey.from_seed(b"acceptance/relay/" + bytes([i])) for i in range(3)]


def _flips(b):
    for i in range(len(b) * 8):
        x = bytearray(b)
        x[i >> 3] ^= 1 << (i & 7)
        yield bytes(x)


def _tamper_sweep(path, root):
    """Try every single-bit change of plugin, meta, siblings and leaf list; return (tries, accepted)."""
    tries = accepted = 0

    def check():
        nonlocal tries, accepted
        tries += 1
        accepted += verify_path(path, root, path.depth)

    for attr in ("plugin_bytes", "meta_bytes"):
        orig = getattr(path, attr)
        for x in _flips(orig):
            setattr(path, attr, x)
            check()
        setattr(path, attr, orig)
    for j, orig in enumerate(path.siblings):
        for x in _flips(orig):
            path.siblings[j] = x
            check()
        path.siblings[j] = orig
    for j, (name, digest) in enumerate(path.leaf_list):
        for x in _flips(digest):
            path.leaf_list[j] = (name, x)
            check()
        raw = name.encode()
        for i in range(len(raw) * 8):
            if i & 7 == 7:
                continue  # ASCII names; the top bit would not be valid UTF-8
            x = bytearray(raw)
            x[i >> 3] ^= 1 << (i & 7)
            path.leaf_list[j] = (x.decode(), digest)
            check()
        path.leaf_list[j] = (name, digest)
    return tries, accepted


def _lifecycle(rng, idx):
    log = TransparencyLog("ftl-acc", DEVSET, SigningKey.from_seed(b"acc/ftl"), depth=8,
                          relay_keys={k.relay_id: k.public_bytes for k in RELAYS})
    names = [f"ns{rng.randrange(50)}/p{idx}_{i}" for i in range(rng.randint(2, 6))]
    for n in names:
        pe = rng.randint(0, 2)
        log.issue(issue_order(n, rng.randbytes(rng.randint(4, 24)), pe, pe + rng.randint(1, 2),
                              rng.sample(DEVKEYS, 2)))
    for n in names:
        if rng.random() < 0.3:
            log.protest(make_protest(rng.choice(RELAYS), n))
    log.advance()
    for n in names:
        if rng.random() < 0.2:
            log.withdraw(withdraw_order(n, log.epoch, DEVKEYS[:2]))
    log.advance(log.epoch + rng.randint(1, 2))
    return log, names


def _gate_matrix(rng, order):
    """All 2^5 condition combinations for one order; count decisions that disagree with all()."""
    wrong = 0
    w = withdraw_order(order.name, 1, DEVKEYS[1:])
    trees = {True: build_tree([order], 3, 8), False: build_tree([order.with_meta(withdraw=w)], 3, 8)}
    push = order.meta.push_epoch
    for bits in itertools.product([True, False], repeat=5):
        online, epoch_ok, proof_ok, live, root_ok = bits
        tree = trees[live]
        path = prove_availability(tree, order.name)
        if not proof_ok:
            j = rng.randrange(8)
            path.siblings[j] = bytes(a ^ b for a, b in zip(path.siblings[j], b"\x01" + bytes(31)))
        broadcast = tree.root if root_ok else H(b"another root")
        d = load_gate(path, None, push if epoch_ok else push - 1, broadcast, online)
        wrong += d.admitted != all(bits)
        if d.admitted:
            wrong += d.reason != GateReason.ADMIT
    return wrong


def test_criterion_2_transparency_log(report):
    t0 = time.perf_counter()
    rng = random.Random(2024)
    bad_avail = tamper_tries = tamper_accepted = perm_bad = gate_wrong = proofs = 0
    for idx in range(1000):
        log, names = _lifecycle(rng, idx)
        tree = log.tree
        live = [n for n in names if not log.orders[n].meta.withdrawn]
        for n in names:
            proofs += 1
            p = log.prove(n)
            bad_avail += not verify_path(p, tree.root, 8)
        target = log.prove(rng.choice(names))
        tries, accepted = _tamper_sweep(target, tree.root)
        tamper_tries += tries
        tamper_accepted += accepted
        shuffled = list(log.orders.values())
        rng.shuffle(shuffled)
        again = build_tree(shuffled, tree.epoch, 8, DEVSET)
        perm_bad += again.root != tree.root or build_tree(shuffled, tree.epoch, 8).root != again.root
        if live:
            gate_wrong += _gate_matrix(rng, log.orders[live[0]])
    elapsed = time.perf_counter() - t0
    ok = bad_avail == 0 and tamper_accepted == 0 and perm_bad == 0 and gate_wrong == 0 and elapsed < 60
    report(2, ok, f"{proofs} proofs ({bad_avail} failed), {tamper_tries} bit tampers "
                  f"({tamper_accepted} accepted), {perm_bad} permutation mismatches, "
                  f"{gate_wrong} gate-matrix disagreements", elapsed)


def test_criterion_3_leaf_balance(report):
    t0 = time.perf_counter()
    rng = random.Random(3)
    names = [f"ns{rng.randrange(1000)}/plugin_{i}_{rng.getrandbits(32):08x}" for i in range(10_000)]
    # signatures are irrelevant to balance; every record shares one signed meta
    meta = issue_order(names[0], b"x", 0, 0, DEVKEYS[:2]).meta
    orders = [IssuanceOrder(n, b"x", meta) for n in names]
    tree = build_tree(orders, 0, 8)
    loads = tree.leaf_loads()
    mean_load = statistics.mean(loads)
    expected = len(names) / 2 ** 8
    sib_ok = all(len(tree.siblings(int(leaf_index(n, 8), 2))) == 8 for n in names)
    ok = expected / 3 <= mean_load <= 3 * expected and sib_ok and max(loads) <= 3 * expected
    report(3, ok, f"mean leaf-list length {mean_load:.2f} (N/2^D = {expected:.2f}), max {max(loads)}, "
                  f"all paths 8 siblings: {sib_ok}", time.perf_counter() - t0)


def test_criterion_4_padding_laws(report):
    t0 = time.perf_counter()
    rng = random.Random(4)
    m = instance(builtin_dropmark_def_machine(), seed=44)
    bursts, gaps, now = [], [], 0.0
    m.step(E.Activate, now)
    while len(bursts) < 100_000:
        bursts.append(m.remaining_length)
        for _ in range(m.remaining_length - 1):
            m.step(E.PaddingSent, now)
        actions = m.step(E.PaddingSent, now)  # counter reaches zero: burst -> gap
        assert m.current_state == "gap"
        gaps.append(actions[0].at_ms - now)
        now = actions[0].at_ms
        r = rng.random()
        if r < 0.05:
            m.step(E.BeSilent, now)  # the gap -> silence edge
            m.step(E.Activate, now)
        elif r < 0.10:
            m.step(E.PaddingSent, now)
            m.step(E.BeSilent, now)
            m.step(E.Activate, now)
            # the fresh burst above is discarded from the sample
            m.step(E.BeSilent, now)
            m.step(E.Activate, now)
        else:
            m.step(E.PaddingSent, now)
    for last in ("burst", "gap", "silence"):
        mm = instance(builtin_dropmark_def_machine(), seed=last)
        mm.step(E.Activate, 0)
        if last == "gap":
            for _ in range(mm.remaining_length):
                mm.step(E.PaddingSent, 0)
        elif last == "silence":
            mm.step(E.BeSilent, 0)
        mm.step(E.CircuitClose, 1)
        m.history += mm.history
    seen = {(src, ev, dst) for _, src, ev, dst in m.history}
    mean_burst = statistics.mean(bursts)
    ok = (set(bursts) <= set(range(3, 10)) and abs(mean_burst - 6) <= 0.05
          and all(1 <= g <= 80 for g in gaps) and seen == DROPMARK_EDGES
          and builtin_dropmark_def_machine().edges() == DROPMARK_EDGES)
    report(4, ok, f"{len(bursts)} bursts in {min(bursts)}..{max(bursts)} mean {mean_burst:.4f}; "
                  f"{len(gaps)} gaps in [{min(gaps):.2f}, {max(gaps):.2f}] ms; "
                  f"trace edges {len(seen)}/9 match exactly: {seen == DROPMARK_EDGES}", time.perf_counter() - t0)


def test_criterion_5_attack(report):
    t0 = time.perf_counter()
    ledger = run(SimConfig(n_circuits=2000, fraction_malicious=0.1, defense=False))
    elapsed = time.perf_counter() - t0
    ok = ledger.tpr >= 0.99 and ledger.fpr <= 0.02 and elapsed < 30
    report(5, ok, f"TP={ledger.TP} FN={ledger.FN} FP={ledger.FP} TN={ledger.TN} "
                  f"TPR={ledger.tpr:.4f} FPR={ledger.fpr:.4f}", elapsed)


def test_criterion_6_defense(report):
    t0 = time.perf_counter()
    ledger = run(SimConfig(n_circuits=2000, fraction_malicious=0.1, defense=True))
    elapsed = time.perf_counter() - t0
    benign, malicious = ledger.flag_rate(False), ledger.flag_rate(True)
    leaked = sum(r.leaked_clean_cells for r in ledger.records)
    cover = ledger.mean_cover_ms()
    peak = max(ledger.padding_counts)
    ok = (benign >= 0.99 and abs(benign - malicious) < 0.01 and leaked == 0
          and 50 <= cover <= 1000 and peak <= 350 and elapsed < 60)
    report(6, ok, f"flag rate benign {benign:.4f} malicious {malicious:.4f}; leaked clean cells {leaked}; "
                  f"mean cover {cover:.1f} ms; max padding {peak}; overhead {ledger.overhead_pct():.2f}%",
           elapsed)


def test_criterion_7_plugin_architecture(report):
    t0 = time.perf_counter()
    desc = parse_plugin_file(DROPMARK_PLUGIN_TEXT, "fan.project/dropmark_def")
    fixture_ok = (desc.heap_budget == 16_777_216 and len(desc.entry_points) == 6
               and format_plugin_file(desc) == DROPMARK_PLUGIN_TEXT and builtin_bundle("dropmark_def").to_text() == DROPMARK_PLUGIN_TEXT)

    reg = HookRegistry()
    calls = []
    reg.publish("probe", default=lambda args: calls.append(args) or 0, fields=())
    mgr = PluginManager(reg)
    prog = plugin_assembler().assemble("mov64 r0, 7\nexit")
    mgr.load(PluginDescriptor("t/replace", 4096, [EntryPointSpec("probe", "p", "replace", "r.o")],
                              {"r.o": prog.encode()}))
    results = {mgr.dispatch("probe", {}) for _ in range(100)}
    replace_ok = results == {7} and not calls and reg.hook("probe").default_calls == 0

    rng = random.Random(7)
    table = HostCallTable({1: lambda mem, *a: 5})
    breaches = 0
    for _ in range(10_000):
        heap = rng.choice([8, 16, 64, 100, 4096])
        mem = SandboxMemory(heap, guard=64)
        try:
            execute(assemble(random_memory_program(rng, heap)), mem, table, input=b"\x01\x02\x03",
                    budget=10_000)
        except VMTrap:
            pass
        breaches += not mem.guards_intact()

    loads = {n: measure_load(builtin_bundle(n), reps=30) for n in TABLE1_BUNDLES}
    load_ok = all(r.cold.median_us < 5000 and r.cached.median_us < r.cold.median_us for r in loads.values())
    elapsed = time.perf_counter() - t0
    ok = fixture_ok and replace_ok and breaches == 0 and load_ok and elapsed < 120
    timing = ", ".join(f"{n} {r.cold.median_us:.0f}/{r.cached.median_us:.0f}us" for n, r in loads.items())
    report(7, ok, f"descriptor text fixture ok: {fixture_ok}; replace default calls {reg.hook('probe').default_calls}; "
                  f"sandbox breaches {breaches}/10000; cold/cached medians: {timing}", elapsed)


def test_criterion_8_vm_oracle(report):
    t0 = time.perf_counter()
    rng = random.Random(8)
    compared = mismatches = traps = 0
    # 500 programs that produce a value; programs hitting a zero divisor are checked for the trap too
    while compared < 500:
        ops = random_alu_ops(rng, rng.randrange(1, 40))
        expected = eval_alu(ops)
        try:
            got = execute(assemble(render_alu(ops)), SandboxMemory(8), args=())
        except VMTrap:
            got = "trap"
        if expected == "trap":
            traps += 1
        else:
            compared += 1
        mismatches += got != expected
    report(8, mismatches == 0, f"{compared} ALU programs vs big-integer evaluator, {mismatches} mismatches "
                               f"(plus {traps} trapping programs checked)", time.perf_counter() - t0)
