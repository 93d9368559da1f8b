import itertools
import random
import statistics

import pytest

from fankit.ftl import (
    EMPTY_LEAF,
    ConsensusDocument,
    DeveloperKeySet,
    DuplicateName,
    EpochError,
    FtlClient,
    GateReason,
    InvalidSignature,
    LogStore,
    NotPresent,
    PresentSomewhere,
    ProtestReason,
    RelayGate,
    RelayKey,
    SigningKey,
    TransparencyLog,
    build_tree,
    bundle_bytes,
    decode_meta,
    detect_equivocation,
    issue_order,
    leaf_index,
    load_gate,
    make_protest,
    prove_absence,
    prove_availability,
    record_protest,
    serve_in_thread,
    verify_path,
    verify_str,
    withdraw_order,
)
from fankit.ftl.records import H
from fankit.plugins import GateDenied, HookRegistry, PluginManager, builtin_bundle

from oracles import oracle_leaf_bits, oracle_root, sha

DEVSET, DEVKEYS = DeveloperKeySet.generate(3, 2, seed=b"tests")


def order(name, plugin=b"code", pe=0, pu=0, keys=DEVKEYS[:2]):
    return issue_order(name, plugin, pe, pu, keys)


def colliding_names(depth, count, prefix="ns/p"):
    by_leaf = {}
    for i in itertools.count():
        n = f"{prefix}{i}"
        bucket = by_leaf.setdefault(leaf_index(n, depth), [])
        bucket.append(n)
        if len(bucket) == count:
            return bucket


class TestLeafIndex:
    def test_golden_value(self):
        # MSB-first bits of SHA-256("fan.project/my_plugin_v0.0.1") = 8c e9 ...
        assert sha(b"fan.project/my_plugin_v0.0.1")[0] == 0x8C
        assert leaf_index("fan.project/my_plugin_v0.0.1", 8) == "10001100"

    def test_against_oracle(self):
        rng = random.Random(0)
        for _ in range(200):
            name = f"ns{rng.randrange(99)}/plugin_{rng.random()}"
            d = rng.randint(1, 32)
            assert leaf_index(name, d) == oracle_leaf_bits(name, d)

    def test_depth_one(self):
        assert leaf_index("x/y", 1) == format(sha(b"x/y")[0] >> 7, "b")

    def test_depth_bounds(self):
        with pytest.raises(ValueError):
            leaf_index("a/b", 0)
        with pytest.raises(ValueError):
            leaf_index("a/b", 33)

    def test_balance(self):
        n, d = 10_000, 8
        tree = build_tree([order(f"ns/plugin_{i}") for i in range(n)], 0, d)
        loads = tree.leaf_loads()
        mean_all = n / 2 ** d
        # mean leaf-list length over the leaves a lookup lands on
        occupied_mean = statistics.fmean(loads)
        assert mean_all / 3 <= occupied_mean <= mean_all * 3
        for name in ("ns/plugin_0", "ns/plugin_5000"):
            assert len(prove_availability(tree, name).siblings) == d


class TestBuildTree:
    def test_empty_root(self):
        z = bytes(32)
        assert build_tree([], 0, 2).root == H(H(z + z) + H(z + z))

    def test_three_orders_match_oracle(self):
        a, b = colliding_names(2, 2)
        c = next(n for n in (f"other/{i}" for i in range(100)) if leaf_index(n, 2) != leaf_index(a, 2))
        orders = [order(a, b"A"), order(b, b"BB"), order(c, b"C")]
        tree = build_tree(orders, 0, 2, DEVSET)
        expected = oracle_root({o.name: (o.plugin_bytes, o.meta_bytes()) for o in orders}, 2)
        assert tree.root == expected
        for o in orders:
            assert verify_path(prove_availability(tree, o.name), expected, 2)

    def test_permutation_invariant(self):
        orders = [order(f"ns/{i}", bytes([i])) for i in range(3)]
        roots = {build_tree(list(p), 0, 2).root for p in itertools.permutations(orders)}
        assert len(roots) == 1

    def test_duplicate_name(self):
        with pytest.raises(DuplicateName):
            build_tree([order("a/b"), order("a/b", b"x")], 0, 2)

    def test_bad_signature(self):
        o = order("a/b", keys=DEVKEYS[:1])
        with pytest.raises(InvalidSignature):
            build_tree([o], 0, 2, DEVSET)

    def test_foreign_keys_do_not_count(self):
        strangers = [SigningKey.from_seed(b"x%d" % i) for i in range(3)]
        with pytest.raises(InvalidSignature):
            build_tree([order("a/b", keys=strangers)], 0, 2, DEVSET)

    def test_same_key_twice_counts_once(self):
        o = order("a/b", keys=[DEVKEYS[0], DEVKEYS[0]])
        with pytest.raises(InvalidSignature):
            build_tree([o], 0, 2, DEVSET)


class TestProofs:
    def test_single_plugin_depth_one(self):
        tree = build_tree([order("a/b")], 0, 1)
        path = prove_availability(tree, "a/b")
        assert len(path.siblings) == 1 and path.siblings[0] == EMPTY_LEAF
        assert verify_path(path, tree.root, 1)

    def test_absent_not_present(self):
        tree = build_tree([order("a/b")], 0, 4)
        with pytest.raises(NotPresent):
            prove_availability(tree, "c/d")

    def test_flipped_sibling_byte(self):
        tree = build_tree([order(f"ns/{i}") for i in range(5)], 0, 3)
        path = prove_availability(tree, "ns/2")
        path.siblings[1] = bytes([path.siblings[1][0] ^ 1]) + path.siblings[1][1:]
        assert not verify_path(path, tree.root, 3)

    def test_swapped_plugin_bytes(self):
        tree = build_tree([order("a/b", b"genuine!")], 0, 4)
        path = prove_availability(tree, "a/b")
        path.plugin_bytes = b"spurious"
        assert not verify_path(path, tree.root, 4)

    def test_wrong_depth(self):
        tree = build_tree([order("a/b")], 0, 4)
        assert not verify_path(prove_availability(tree, "a/b"), tree.root, 5)

    def test_absence_in_empty_trees(self):
        trees = {"f1": build_tree([], 0, 8), "f2": build_tree([], 0, 8)}
        paths = prove_absence(trees, "x/y")
        assert len(paths) == 2
        for p, t in zip(paths, trees.values()):
            assert p.leaf_list == [] and len(p.siblings) == 8
            assert verify_path(p, t.root, 8)

    def test_absence_shares_leaf(self):
        a, b = colliding_names(3, 2)
        tree = build_tree([order(a)], 0, 3)
        (path,) = prove_absence([tree], b)
        assert [n for n, _ in path.leaf_list] == [a]
        assert verify_path(path, oracle_root({a: (b"code", tree.orders[a].meta_bytes())}, 3), 3)

    def test_absence_refused_when_live(self):
        tree = build_tree([order("a/b")], 0, 3)
        with pytest.raises(PresentSomewhere):
            prove_absence({"f": tree}, "a/b")

    def test_absence_lie_detected(self):
        # dropping the target from the leaf list changes the recomputed root
        tree = build_tree([order("a/b")], 0, 3)
        path = prove_availability(tree, "a/b")
        path.kind, path.leaf_list, path.plugin_bytes, path.meta_bytes = "absence", [], None, None
        assert not verify_path(path, tree.root, 3)

    def test_withdrawn_absence(self):
        log = TransparencyLog("f", DEVSET, SigningKey.from_seed(b"f"), depth=4)
        log.issue(order("a/b", pe=1, pu=2))
        log.advance()
        log.advance()
        log.withdraw(withdraw_order("a/b", 2, DEVKEYS[1:]))
        log.advance()
        path = log.prove_absent("a/b")
        assert verify_path(path, log.tree.root, 4)
        assert [n for n, _ in path.leaf_list] == ["a/b"]

    def test_availability_and_absence_cannot_both_verify(self):
        a, b = colliding_names(3, 2)
        with_a = build_tree([order(a), order(b)], 0, 3)
        without_a = build_tree([order(b)], 0, 3)
        avail = prove_availability(with_a, a)
        (absent,) = prove_absence([without_a], a)
        for root in (with_a.root, without_a.root):
            assert verify_path(avail, root, 3) + verify_path(absent, root, 3) <= 1

    def test_path_dict_round_trip(self):
        from fankit.ftl import AuthenticationPath
        tree = build_tree([order("a/b")], 0, 4)
        p = prove_availability(tree, "a/b")
        assert AuthenticationPath.from_dict(p.to_dict()) == p


class TestMeta:
    def test_canonical_round_trip(self):
        relay = RelayKey.from_seed(b"r0")
        o = order("a/b", pe=3, pu=5)
        o = o.with_meta(withdraw=withdraw_order("a/b", 4, DEVKEYS), protests=(make_protest(relay, "a/b"),))
        name, meta = decode_meta(o.meta_bytes())
        assert name == "a/b" and meta == o.meta

    def test_protest_message_format(self):
        p = make_protest(RelayKey.from_seed(b"r0"), "fan.project/x")
        assert p.message() == f"{p.relay_id}:protest:fan.project/x".encode()


@pytest.fixture
def relays():
    return [RelayKey.from_seed(b"relay%d" % i) for i in range(3)]


@pytest.fixture
def log(relays):
    lg = TransparencyLog("ftl-a", DEVSET, SigningKey.from_seed(b"ftl-a"), depth=8,
                         relay_keys={r.relay_id: r.public_bytes for r in relays})
    return lg


class TestProtests:
    def test_accepted_and_visible(self, log, relays):
        log.issue(order("a/b", pe=2, pu=3))
        before = log.tree.root
        out = log.protest(make_protest(relays[0], "a/b"))
        assert out.accepted
        log.advance()
        assert log.tree.root != before
        meta = decode_meta(log.prove("a/b").meta_bytes)[1]
        assert [p.relay_id for p in meta.protests] == [relays[0].relay_id]

    def test_too_late(self, log, relays):
        o = order("a/b", pe=2, pu=3)
        out = record_protest(make_protest(relays[0], "a/b"), 3, o, log.relay_keys)
        assert not out.accepted and out.reason == ProtestReason.TOO_LATE

    def test_conflicting_signatures(self, log, relays):
        log.issue(order("a/b", pe=2, pu=3))
        first = make_protest(relays[0], "a/b")
        second = make_protest(relays[0], "a/b")
        assert first.signature != second.signature
        assert log.protest(first).accepted
        out = log.protest(second)
        assert not out.accepted and out.reason == ProtestReason.CONFLICTING
        assert log.evidence == [(first, second)]
        assert len(log.orders["a/b"].meta.protests) == 1

    def test_replay_not_evidence(self, log, relays):
        log.issue(order("a/b", pe=2, pu=3))
        p = make_protest(relays[1], "a/b")
        log.protest(p)
        assert log.protest(p).reason == ProtestReason.REPLAYED
        assert log.evidence == []

    def test_forged(self, log, relays):
        log.issue(order("a/b", pe=2, pu=3))
        p = make_protest(relays[0], "a/b")
        from dataclasses import replace
        assert log.protest(replace(p, relay_id=relays[1].relay_id)).reason == ProtestReason.BAD_SIGNATURE
        outsider = make_protest(RelayKey.from_seed(b"outsider"), "a/b")
        assert log.protest(outsider).reason == ProtestReason.UNKNOWN_RELAY


class TestLifecycle:
    def test_epoch_rules(self, log):
        log.advance()
        with pytest.raises(EpochError):
            log.advance(1)
        with pytest.raises(EpochError):
            log.build(0)
        with pytest.raises(EpochError):
            log.issue(order("a/b", pe=0, pu=2))
        with pytest.raises(EpochError):
            log.issue(order("a/b", pe=3, pu=2))

    def test_signed_roots(self, log):
        log.issue(order("a/b", pe=1, pu=1))
        s = log.advance()
        assert s.epoch == 1 and s.root == log.tree.root
        assert verify_str(s, log.key.public_bytes)
        from dataclasses import replace
        assert not verify_str(replace(s, root=bytes(32)), log.key.public_bytes)

    def test_equivocation(self, log):
        s1 = log.signed_root()
        assert detect_equivocation([s1, s1]) is None
        from dataclasses import replace
        forged = replace(s1, root=H(b"other"))
        forged = replace(forged, signature=log.key.sign(forged.message()))
        assert detect_equivocation([s1, forged]) == (s1, forged)
        other_log = replace(forged, ftl_id="ftl-b")
        assert detect_equivocation([s1, other_log]) is None

    def test_withdrawn_never_admitted(self, log):
        log.issue(order("a/b", pe=0, pu=1))
        log.advance()
        assert load_gate(log.prove("a/b"), None, 1, log.tree.root, True).admitted
        log.withdraw(withdraw_order("a/b", 1, DEVKEYS[:2]))
        for _ in range(3):
            log.advance()
            d = load_gate(log.prove("a/b"), None, log.epoch, log.tree.root, True)
            assert d.reason == GateReason.WITHDRAWN


class TestGate:
    def _setup(self, withdrawn=False):
        o = order("a/b", pe=0, pu=1)
        if withdrawn:
            o = o.with_meta(withdraw=withdraw_order("a/b", 1, DEVKEYS))
        tree = build_tree([o, order("c/d")], 1, 8)
        return o, tree

    def test_admit(self):
        o, tree = self._setup()
        assert load_gate(prove_availability(tree, "a/b"), o, 1, tree.root, True).admitted

    def test_push_epoch_future(self):
        o, tree = self._setup()
        d = load_gate(prove_availability(tree, "a/b"), o, 0, tree.root, True)
        assert d.reason == GateReason.PUSH_EPOCH_FUTURE

    def test_withdrawn(self):
        o, tree = self._setup(withdrawn=True)
        assert load_gate(prove_availability(tree, "a/b"), o, 1, tree.root, True).reason == GateReason.WITHDRAWN

    def test_full_condition_matrix(self):
        for bits in itertools.product([True, False], repeat=5):
            online, epoch_ok, proof_ok, live, root_ok = bits
            o, tree = self._setup(withdrawn=not live)
            path = prove_availability(tree, "a/b")
            if not proof_ok:
                path.siblings[0] = bytes(31) + b"\x01"
            broadcast = tree.root if root_ok else H(b"elsewhere")
            d = load_gate(path, o, 1 if epoch_ok else 0, broadcast, online)
            assert d.admitted == all(bits), bits

    def test_manager_integration(self):
        desc = builtin_bundle("hello_world")
        lg = TransparencyLog("ftl-a", DEVSET, SigningKey.from_seed(b"g"), depth=8)
        lg.issue(issue_order(desc.name, bundle_bytes(desc), 0, 2, DEVKEYS))
        consensus = ConsensusDocument()
        consensus.publish(lg.signed_root())
        reg = HookRegistry()
        mgr = PluginManager(reg, gate=RelayGate(lg, consensus, "ftl-a"))
        mgr.publish_core_hooks()
        reg.publish("circuit_open_add")
        with pytest.raises(GateDenied) as exc:
            mgr.load(desc)
        assert exc.value.reason == GateReason.BAD_PROOF  # not in any tree yet
        consensus.publish(lg.advance())
        with pytest.raises(GateDenied) as exc:
            mgr.load(desc)
        assert exc.value.reason == GateReason.PUSH_EPOCH_FUTURE
        consensus.publish(lg.advance())
        assert mgr.load(desc).name == desc.name
        tampered = builtin_bundle("hello_world")
        tampered.bytecode_blobs["hello_world.o"] += bytes(8)
        mgr.unload(mgr.contexts[desc.name])
        with pytest.raises(GateDenied):
            mgr.load(tampered)


class TestStoreAndService:
    def test_replay(self, tmp_path):
        store, log = LogStore.create(tmp_path / "log", seed="s")
        keys = store.dev_keys()
        log.issue(issue_order("a/b", b"x", 0, 1, keys[:2]))
        log.protest(make_protest(store.relay_key(0), "a/b"))
        log.advance()
        log.withdraw(withdraw_order("a/b", 1, keys[1:]))
        log.advance()
        again = LogStore(tmp_path / "log").open()
        assert again.epoch == 2
        assert again.roots == log.roots
        assert (tmp_path / "log" / "roots.jsonl").read_text().count("\n") == 3

    def test_socket_round_trip(self, tmp_path):
        store, log = LogStore.create(tmp_path / "log", seed="s")
        keys = store.dev_keys()
        sock = tmp_path / "ftl.sock"
        srv = serve_in_thread(sock, log)
        try:
            with FtlClient(sock) as c:
                c.request("issue", order=issue_order("a/b", b"x", 0, 1, keys).to_dict())
                s = c.request("advance_epoch")["str"]
                path = c.proof("a/b")
                assert verify_path(path, bytes.fromhex(s["root"]), 8)
                absent = c.request("get_proof_absence", name="z/z")["path"]
                assert absent["leaf_list"] == [] or all(n != "z/z" for n, _ in absent["leaf_list"])
                with pytest.raises(Exception, match="DuplicateName"):
                    c.request("issue", order=issue_order("a/b", b"x", 1, 1, keys).to_dict())
                with pytest.raises(Exception, match="unknown request"):
                    c.request("frobnicate")
        finally:
            srv.shutdown()
            srv.server_close()
