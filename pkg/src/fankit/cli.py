"""``fan``: command-line front door for plugins, the transparency log and the simulator.

Errors print one line ``fan: error: <Kind>: <message>`` on stderr and exit nonzero
(2 for usage errors, 1 otherwise).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import threading
from pathlib import Path

from . import __version__
from .ftl import (
    AuthenticationPath,
    ConsensusDocument,
    FtlClient,
    FtlError,
    FtlServer,
    LogStore,
    RelayGate,
    SignedTreeRoot,
    bundle_bytes,
    issue_order,
    make_protest,
    verify_str,
    withdraw_order,
)
from .ftl.tree import verify_path
from .padding import BUILTIN_MACHINES
from .plugins import BUNDLES, TABLE1_BUNDLES, PluginError, builtin_bundle, load_bundle, write_bundle
from .plugins.bench import host_manager, measure_load
from .plugins.builtin import plugin_assembler
from .sim import SWEEP_FIELDS, ConfigError, SimConfig, export_metrics, run, sweep
from .vm import AssemblerError, ValidationError, VMTrap, disassemble
from .vm.isa import Program


class CliError(Exception):
    """Raised for bad arguments detected after parsing."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f"fan: error: UsageError: {message}", file=sys.stderr)
        raise SystemExit(2)


def _fail(exc) -> int:
    msg = " ".join(str(exc).split()) or type(exc).__name__
    print(f"fan: error: {type(exc).__name__}: {msg}", file=sys.stderr)
    return 1


def _out(*lines):
    for line in lines:
        print(line)


def _banner(verb, cfg_text=None, **extra):
    items = " ".join(f"{k}={v}" for k, v in extra.items())
    _out(f"# fan {__version__} {verb} {items}".rstrip())
    if cfg_text:
        for line in cfg_text.strip().splitlines():
            _out(f"# {line}")


# -- plugins -----------------------------------------------------------------

def resolve_bundle(ref, name=None):
    """A bundle directory path, or the name of a builtin bundle."""
    p = Path(ref)
    if p.is_dir():
        return load_bundle(p, name)
    if ref in BUNDLES:
        return builtin_bundle(ref, name)
    raise CliError(f"{ref!r} is neither a bundle directory nor a builtin ({', '.join(BUNDLES)})")


def cmd_plugin_assemble(a):
    src = Path(a.source)
    if src.is_file() and src.suffix == ".s":
        out = Path(a.output or src.with_suffix(".o"))
        prog = plugin_assembler().assemble(src.read_text(), out.name)
        out.write_bytes(prog.encode())
        _out(f"{out}\t{len(prog.instructions)} instructions\t{len(prog.encode())} bytes")
        return 0
    if not a.output:
        raise CliError("assembling a bundle needs -o OUTPUT_DIR")
    if src.is_dir():
        desc = load_bundle(src, a.name)
        asm = plugin_assembler()
        for ep in desc.entry_points:
            if ep.filename not in desc.bytecode_blobs:
                source = src / (ep.filename.rsplit(".", 1)[0] + ".s")
                if not source.exists():
                    raise CliError(f"{ep.filename} has neither bytecode nor source {source.name}")
                desc.bytecode_blobs[ep.filename] = asm.assemble(source.read_text(), ep.filename).encode()
    else:
        desc = resolve_bundle(a.source, a.name)
    path = write_bundle(desc, a.output)
    _out(f"{path}\t{desc.name}\t{len(desc.entry_points)} entry points\t{desc.bytecode_size} bytes")
    return 0


def cmd_plugin_inspect(a):
    desc = resolve_bundle(a.bundle, a.name)
    _out(f"name {desc.name}", f"memory {desc.heap_budget}", f"bytecode_bytes {desc.bytecode_size}")
    for ep in desc.entry_points:
        param = "" if ep.param is None else f" param {ep.param}"
        _out(f"entry {ep.hook} {ep.operation} {ep.filename}{param}")
    if a.disasm:
        for fname in sorted(desc.bytecode_blobs):
            _out(f"--- {fname}")
            _out(disassemble(Program.decode(desc.bytecode_blobs[fname], fname)))
    return 0


def _gate_from(a):
    if not a.consensus:
        return None
    store = LogStore(a.log)
    source = FtlClient(a.socket) if a.socket else store.open()
    return RelayGate(source, ConsensusDocument.load(a.consensus), store.config()["ftl_id"])


def cmd_plugin_load(a):
    desc = resolve_bundle(a.bundle, a.name)
    mgr = host_manager(gate=_gate_from(a))
    ctx = mgr.load(desc)
    _out(f"loaded {ctx.name} in {ctx.load_us:.1f} us ({len(desc.entry_points)} attachments)")
    for ep in desc.entry_points:
        _out(f"  {ep.operation:7s} {ep.hook}")
    for hook in a.dispatch or ():
        result = mgr.dispatch(hook, {})
        _out(f"dispatch {hook} -> {result}")
    for rec in mgr.logs:
        _out(f"log {rec.plugin} {rec.hook} code={rec.code} value={rec.value}")
    for f in mgr.faults:
        _out(f"fault {f.plugin} {f.hook} {f.error}")
    return 0


def _report_lines(r):
    return [f"{r.name}\t{r.entry_points}\t{r.bytecode_bytes}\t"
            f"{r.cold.min_us:.1f}\t{r.cold.median_us:.1f}\t{r.cold.p99_us:.1f}\t"
            f"{r.cached.min_us:.1f}\t{r.cached.median_us:.1f}\t{r.cached.p99_us:.1f}"]


_BENCH_HEADER = ("plugin\thooks\tbytes\tcold_min_us\tcold_median_us\tcold_p99_us\t"
                 "cached_min_us\tcached_median_us\tcached_p99_us")


def cmd_plugin_bench(a):
    desc = resolve_bundle(a.bundle, a.name)
    _banner("plugin bench", reps=a.reps)
    _out(_BENCH_HEADER, *_report_lines(measure_load(desc, a.reps)))
    return 0


def cmd_bench_load_time(a):
    _banner("bench load-time", reps=a.reps)
    _out(_BENCH_HEADER)
    for name in TABLE1_BUNDLES:
        _out(*_report_lines(measure_load(builtin_bundle(name), a.reps)))
    return 0


# -- transparency log --------------------------------------------------------

def _source(a):
    return FtlClient(a.socket) if a.socket else LogStore(a.log).open()


def _publish(a, s: SignedTreeRoot):
    if a.consensus:
        path = Path(a.consensus)
        doc = ConsensusDocument.load(path) if path.exists() else ConsensusDocument()
        doc.publish(s, online=not getattr(a, "offline", False))
        doc.save(path)


def _str_line(s):
    return f"ftl={s.ftl_id} epoch={s.epoch} depth={s.depth} root={s.root.hex()}"


def cmd_ftl_init(a):
    store, log = LogStore.create(a.log, a.ftl_id, a.depth, a.developers, a.threshold, a.relays,
                                 None if a.seed is None else str(a.seed))
    _banner("ftl init", seed=a.seed, depth=a.depth)
    _out(f"created {a.log}", _str_line(log.signed_root()))
    _publish(a, log.signed_root())
    return 0


def cmd_ftl_serve(a):
    log = LogStore(a.log).open()
    sock = Path(a.socket)
    if sock.exists():
        sock.unlink()
    srv = FtlServer(str(sock), log)
    _out(f"serving {a.log} on {sock}")
    sys.stdout.flush()
    if a.duration:
        threading.Timer(a.duration, srv.shutdown).start()
    try:
        srv.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        srv.server_close()
        sock.unlink(missing_ok=True)
    return 0


def cmd_ftl_issue(a):
    if a.protest_epoch > a.push_epoch:
        raise CliError("--protest-epoch must not exceed --push-epoch")
    desc = resolve_bundle(a.bundle, a.name)
    store = LogStore(a.log)
    order = issue_order(desc.name, bundle_bytes(desc), a.protest_epoch, a.push_epoch, store.dev_keys())
    _source(a).issue(order)
    _out(f"issued {desc.name} protest_epoch={a.protest_epoch} push_epoch={a.push_epoch}")
    return 0


def cmd_ftl_withdraw(a):
    store = LogStore(a.log)
    src = _source(a)
    epoch = src.signed_root().epoch
    src.withdraw(withdraw_order(a.plugin, epoch, store.dev_keys()))
    _out(f"withdrawn {a.plugin} at epoch {epoch}")
    return 0


def cmd_ftl_protest(a):
    store = LogStore(a.log)
    p = make_protest(store.relay_key(a.relay), a.plugin)
    out = _source(a).protest(p)
    accepted = out["accepted"] if isinstance(out, dict) else out.accepted
    reason = out["reason"] if isinstance(out, dict) else out.reason.value
    _out(f"protest {a.plugin} relay={p.relay_id} accepted={accepted} reason={reason}")
    return 0 if accepted else 1


def cmd_ftl_prove(a):
    src = _source(a)
    path = src.prove_absent(a.plugin, a.epoch) if a.absence else src.prove(a.plugin, a.epoch)
    text = json.dumps(path.to_dict(), indent=2, sort_keys=True) + "\n"
    if a.output:
        Path(a.output).write_text(text)
        _out(f"{path.kind} proof for {a.plugin} at epoch {path.epoch} -> {a.output}")
    else:
        sys.stdout.write(text)
    return 0


class ProofInvalid(Exception):
    pass


def cmd_ftl_verify(a):
    path = AuthenticationPath.from_dict(json.loads(Path(a.proof).read_text()))
    if a.root:
        ref_root, ref_epoch = bytes.fromhex(a.root), a.epoch
    elif a.consensus:
        doc = ConsensusDocument.load(a.consensus)
        entry = doc.ftls.get(path.ftl_id)
        if entry is None:
            raise ProofInvalid(f"consensus has no root for log {path.ftl_id!r}")
        ref_root, ref_epoch = entry["str"].root, entry["str"].epoch
    else:
        s = _source(a).signed_root()
        ref_root, ref_epoch = s.root, s.epoch
    if path.signed_root is not None and not verify_str(path.signed_root):
        raise ProofInvalid("signed tree root carried by the proof has a bad signature")
    if ref_epoch is not None and path.epoch != ref_epoch:
        raise ProofInvalid(f"proof is for epoch {path.epoch}, reference root is epoch {ref_epoch}")
    if not verify_path(path, ref_root, path.depth):
        raise ProofInvalid(f"{path.kind} proof for {path.name} does not match root {ref_root.hex()}")
    _out(f"valid {path.kind} proof for {path.name} at epoch {path.epoch}")
    return 0


def cmd_ftl_root(a):
    s = _source(a).signed_root(a.epoch)
    _out(_str_line(s))
    _publish(a, s)
    return 0


def cmd_ftl_advance(a):
    s = _source(a).advance(a.to)
    _out(_str_line(s))
    _publish(a, s)
    return 0


# -- simulator ---------------------------------------------------------------

def _sim_config(a) -> SimConfig:
    cfg = SimConfig.load(a.config) if a.config else SimConfig()
    changes = {}
    if a.seed is not None:
        changes["seed"] = a.seed
    if a.circuits is not None:
        changes["n_circuits"] = a.circuits
    if a.fraction_malicious is not None:
        changes["fraction_malicious"] = a.fraction_malicious
    if getattr(a, "defense", None) is not None:
        changes["defense"] = a.defense == "on"
    for item in a.set or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise CliError(f"--set expects key=value, got {item!r}")
        changes[key.strip()] = value
    return cfg.replace(**changes)


def _fmt(v):
    return f"{v:.6f}" if isinstance(v, float) else str(v)


def cmd_sim_run(a):
    cfg = _sim_config(a)
    _banner("sim run", cfg.to_text())
    ledger = run(cfg)
    for k, v in ledger.summary().items():
        _out(f"{k} {_fmt(v)}")
    if a.output:
        rows, summary = export_metrics(ledger, a.output)
        _out(f"wrote {rows} {summary}")
    return 0


def _fractions(text):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad fraction list {text!r}") from None
    if not vals or any(not 0.0 <= v <= 1.0 for v in vals):
        raise argparse.ArgumentTypeError("fractions must be a comma list of values in [0, 1]")
    return vals


def cmd_sim_sweep(a):
    cfg = _sim_config(a)
    _banner("sim sweep", cfg.to_text(), fractions=",".join(map(str, a.fractions)))
    rows = sweep(cfg, a.fractions)
    _out("\t".join(SWEEP_FIELDS))
    for r in rows:
        _out("\t".join(_fmt(r[f]) for f in SWEEP_FIELDS))
    if a.output:
        with open(a.output, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SWEEP_FIELDS)
            for r in rows:
                w.writerow([_fmt(r[f]) for f in SWEEP_FIELDS])
        _out(f"wrote {a.output}")
    return 0


# -- padding -----------------------------------------------------------------

def _machine(name):
    try:
        return BUILTIN_MACHINES[name]()
    except KeyError:
        raise CliError(f"no machine {name!r}; choose from {', '.join(BUILTIN_MACHINES)}") from None


def cmd_padding_list(a):
    for name in BUILTIN_MACHINES:
        m = _machine(name)
        _out(f"{name}\tid={m.machine_id}\tstates={len(m.states)}\tedges={len(m.edges())}")
    return 0


def cmd_padding_show(a):
    sys.stdout.write(_machine(a.machine).to_text())
    return 0


# -- parser ------------------------------------------------------------------

def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _pos_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _fraction(text):
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError("must be in [0, 1]")
    return v


def _depth(text):
    v = int(text)
    if not 1 <= v <= 32:
        raise argparse.ArgumentTypeError("depth must be in 1..32")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fan", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"fan {__version__}")
    top = p.add_subparsers(dest="group", required=True, parser_class=_Parser)

    plug = top.add_parser("plugin", help="assemble, inspect, load and time plugin bundles")
    ps = plug.add_subparsers(dest="verb", required=True)
    x = ps.add_parser("assemble", help="assemble a .s file or a bundle's sources")
    x.add_argument("source", help=".s file, bundle directory or builtin bundle name")
    x.add_argument("-o", "--output")
    x.add_argument("--name", help="plugin name <namespace>/<name>")
    x.set_defaults(fn=cmd_plugin_assemble)
    x = ps.add_parser("inspect", help="show a bundle's descriptor")
    x.add_argument("bundle")
    x.add_argument("--name")
    x.add_argument("--disasm", action="store_true")
    x.set_defaults(fn=cmd_plugin_inspect)
    x = ps.add_parser("load", help="load a bundle into a fresh host")
    x.add_argument("bundle")
    x.add_argument("--name")
    x.add_argument("--dispatch", action="append", metavar="HOOK")
    x.add_argument("--log", default="ftl-log", help="log directory for the admission gate")
    x.add_argument("--socket", help="query a running log service instead of the directory")
    x.add_argument("--consensus", help="consensus document; enables the admission gate")
    x.set_defaults(fn=cmd_plugin_load)
    x = ps.add_parser("bench", help="cold vs cached load latency")
    x.add_argument("bundle")
    x.add_argument("--name")
    x.add_argument("--reps", type=_pos_int, default=50)
    x.set_defaults(fn=cmd_plugin_bench)

    ftl = top.add_parser("ftl", help="transparency log service and client verbs")
    fs = ftl.add_subparsers(dest="verb", required=True)

    def ftl_verb(name, fn, help_):
        x = fs.add_parser(name, help=help_)
        x.add_argument("--log", default="ftl-log", help="log directory (default ./ftl-log)")
        x.add_argument("--socket", help="talk to a running 'fan ftl serve' instead")
        x.set_defaults(fn=fn)
        return x

    x = ftl_verb("init", cmd_ftl_init, "create a log with fresh keys")
    x.add_argument("--ftl-id", default="ftl0")
    x.add_argument("--depth", type=_depth, default=8)
    x.add_argument("--developers", type=_pos_int, default=3)
    x.add_argument("--threshold", type=_pos_int, default=2)
    x.add_argument("--relays", type=_nonneg_int, default=3)
    x.add_argument("--seed", type=int)
    x.add_argument("--consensus")
    x = ftl_verb("serve", cmd_ftl_serve, "serve the log on a unix socket")
    x.add_argument("--duration", type=float, help="stop after this many seconds")
    x.set_defaults(socket_required=True)
    x = ftl_verb("issue", cmd_ftl_issue, "sign and submit an issuance order")
    x.add_argument("bundle")
    x.add_argument("--name")
    x.add_argument("--protest-epoch", type=_nonneg_int, required=True)
    x.add_argument("--push-epoch", type=_nonneg_int, required=True)
    x = ftl_verb("withdraw", cmd_ftl_withdraw, "sign and submit a withdrawal")
    x.add_argument("plugin")
    x = ftl_verb("protest", cmd_ftl_protest, "file a relay protest")
    x.add_argument("plugin")
    x.add_argument("--relay", type=_nonneg_int, default=0, help="index of the relay key")
    x = ftl_verb("prove", cmd_ftl_prove, "fetch a proof of availability or absence")
    x.add_argument("plugin")
    x.add_argument("--absence", action="store_true")
    x.add_argument("--epoch", type=_nonneg_int)
    x.add_argument("-o", "--output")
    x = ftl_verb("verify", cmd_ftl_verify, "check a proof against a root")
    x.add_argument("proof")
    x.add_argument("--root", help="expected root (hex)")
    x.add_argument("--epoch", type=_nonneg_int)
    x.add_argument("--consensus")
    x = ftl_verb("root", cmd_ftl_root, "print the signed tree root")
    x.add_argument("--epoch", type=_nonneg_int)
    x.add_argument("--consensus", help="also publish it to this consensus document")
    x.add_argument("--offline", action="store_true", help="publish the log as offline")
    x = ftl_verb("advance", cmd_ftl_advance, "build the next epoch's tree")
    x.add_argument("--to", type=_pos_int)
    x.add_argument("--consensus", help="also publish the new root here")

    sim = top.add_parser("sim", help="dropmark attack and defense simulation")
    ss = sim.add_subparsers(dest="verb", required=True)
    for name, fn, help_ in (("run", cmd_sim_run, "simulate circuits and report metrics"),
                            ("sweep", cmd_sim_sweep, "detection rate across priors")):
        x = ss.add_parser(name, help=help_)
        x.add_argument("--config", help="[sim] INI file")
        x.add_argument("--seed", type=int)
        x.add_argument("--circuits", type=_nonneg_int)
        x.add_argument("--fraction-malicious", type=_fraction)
        x.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config field")
        x.add_argument("-o", "--output", help="CSV output path")
        x.set_defaults(fn=fn)
        if name == "run":
            x.add_argument("--defense", choices=("on", "off"))
        else:
            x.add_argument("--fractions", type=_fractions, default=[0.01, 0.05, 0.1, 0.2, 0.5])

    bench = top.add_parser("bench", help="benchmarks")
    bs = bench.add_subparsers(dest="verb", required=True)
    x = bs.add_parser("load-time", help="load latency of every builtin bundle")
    x.add_argument("--reps", type=_pos_int, default=50)
    x.set_defaults(fn=cmd_bench_load_time)

    pad = top.add_parser("padding", help="padding machines")
    pds = pad.add_subparsers(dest="verb", required=True)
    pds.add_parser("list", help="list builtin machines").set_defaults(fn=cmd_padding_list)
    x = pds.add_parser("show", help="print a machine spec")
    x.add_argument("machine")
    x.set_defaults(fn=cmd_padding_show)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "socket_required", False) and not args.socket:
        print("fan: error: UsageError: --socket is required", file=sys.stderr)
        return 2
    try:
        return args.fn(args)
    except (CliError, ConfigError, FtlError, PluginError, AssemblerError, ValidationError, VMTrap, ProofInvalid,
            OSError, ValueError, KeyError) as exc:
        return _fail(exc)


if __name__ == "__main__":
    sys.exit(main())
