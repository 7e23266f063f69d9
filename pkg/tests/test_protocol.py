import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from privsum import protocol
from privsum.code import ReedSolomonCode, make_rs_code
from privsum.network import build_tree, generate_network, select_task_subnet
from privsum.protocol import (ErrorPlan, OverflowGuardError, codeword_digest, codeword_from_bytes, codeword_to_bytes,
                              fnv1a64, inject_errors, make_error_plan, node_bound, run_dps)
from privsum.quantizer import QuantizerConfig, dequantize, levels_for_task, quantize


def task(k, seed=0, size=80):
    net = generate_network(size, seed=seed)
    sub = select_task_subnet(net, 0, k)
    assert not sub.truncated
    return sub, build_tree(sub)


def distinct_plan(code, members, lam, rng, clean):
    """Worst case: every error lands on its own position and really changes the symbol."""
    positions = rng.choice(code.n, lam * len(members), replace=False).reshape(len(members), lam)
    idx, val = {}, {}
    for row, node in enumerate(members):
        idx[node] = positions[row]
        val[node] = (clean[row][positions[row]] + rng.integers(1, code.p, lam)) % code.p
    return ErrorPlan(code.n, code.p, lam, idx, val)


@pytest.mark.parametrize("n,l,lam,bound", [(255, 224, 1, 15), (64, 32, 1, 16), (64, 16, 1, 24), (64, 48, 1, 8),
                                           (64, 32, 2, 8), (255, 224, 2, 7)])
def test_node_bound(n, l, lam, bound):
    assert node_bound(n, l, lam) == bound
    # strictly below (n - l + 1) / (2 lam)
    assert bound < (n - l + 1) / (2 * lam) <= bound + 1


def test_node_bound_unbounded():
    assert node_bound(64, 32, 0) is None


def test_error_plan_shapes():
    plan = make_error_plan(64, 251, 0, [1, 2], seed=0)
    assert all(v.size == 0 for v in plan.indices.values())
    plan = make_error_plan(64, 251, 1, [1, 2, 3], seed=0)
    assert all(v.shape == (1,) for v in plan.indices.values())
    plan = make_error_plan(64, 251, 3, [5], seed=0, frames=7)
    assert plan.indices[5].shape == (7, 3) and plan.values[5].shape == (7, 3)
    assert all(len(set(row)) == 3 for row in plan.indices[5])
    with pytest.raises(ValueError):
        make_error_plan(4, 7, 5, [0])


def test_error_plan_deterministic():
    a = make_error_plan(64, 251, 2, range(5), seed=11)
    b = make_error_plan(64, 251, 2, range(5), seed=11)
    assert all(np.array_equal(a.indices[i], b.indices[i]) and np.array_equal(a.values[i], b.values[i]) for i in range(5))


@pytest.mark.parametrize("frames", [None, 50])
def test_error_indices_uniform(frames):
    n = 16
    counts = np.zeros(n)
    for s in range(400):
        plan = make_error_plan(n, 251, 2, range(5), seed=s, frames=frames)
        for v in plan.indices.values():
            counts += np.bincount(v.ravel(), minlength=n)
    assert chisquare(counts).pvalue > 1e-3


def test_inject_errors():
    c = np.array([1, 2, 3, 4])
    assert np.array_equal(inject_errors(c, [], []), c)
    assert np.array_equal(inject_errors(c, [2], [3]), c)
    assert np.array_equal(inject_errors(c, [0, 3], [9, 9]), [9, 2, 3, 9])
    batch = np.zeros((2, 4), dtype=np.int64)
    out = inject_errors(batch, np.array([[1], [2]]), np.array([[5], [6]]))
    assert np.array_equal(out, [[0, 5, 0, 0], [0, 0, 6, 0]])


def test_inject_hamming_bound(rng):
    code = make_rs_code(251, 64, 32)
    for _ in range(200):
        c = code.encode(rng.integers(0, 251, 32))
        lam = int(rng.integers(0, 6))
        plan = make_error_plan(64, 251, lam, [0], seed=int(rng.integers(1 << 30)))
        assert np.count_nonzero(inject_errors(c, plan.indices[0], plan.values[0]) != c) <= lam


def test_single_node_lambda_zero():
    code = make_rs_code(251, 64, 16)
    cfg = QuantizerConfig(251, 1.0)
    sub, tree = task(1)
    u = np.linspace(-1, 1, 16)[None]
    m = quantize(cfg, u)
    res = run_dps(sub, tree, m, code, make_error_plan(64, 251, 0, sub.members, seed=0), quantizer=cfg)
    assert res.success and res.rounds == 0
    assert np.array_equal(res.value, dequantize(cfg, m[0]))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 40), st.integers(0, 10_000))
def test_lambda_zero_matches_direct_sum(k, seed):
    rng = np.random.default_rng(seed)
    code = make_rs_code(1021, 255, 224)
    cfg = QuantizerConfig(1021, 3.0, levels_for_task(1021, 40))
    sub, tree = task(k, seed=seed % 50, size=120)
    m = quantize(cfg, rng.uniform(-3, 3, size=(k, 224)))
    res = run_dps(sub, tree, m, code, make_error_plan(255, 1021, 0, sub.members, seed=seed), quantizer=cfg)
    assert res.success
    assert np.array_equal(res.value, dequantize(cfg, m.sum(axis=0) % 1021))
    assert np.abs(res.value - dequantize(cfg, m).sum(axis=0)).max() < 1e-9
    assert res.rounds == tree.depth()


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([(251, 64, 16), (251, 64, 32), (251, 64, 48), (1021, 255, 224)]),
       st.integers(1, 3), st.integers(0, 10_000))
def test_guaranteed_success_with_distinct_errors(code_params, lam, seed):
    code = make_rs_code(*code_params)
    rng = np.random.default_rng(seed)
    k = max(1, code.params.radius // lam)
    sub, tree = task(k, seed=seed % 50, size=120)
    msgs = rng.integers(0, code.p, size=(k, code.l))
    plan = distinct_plan(code, sub.members, lam, rng, code.encode(msgs))
    res = run_dps(sub, tree, msgs, code, plan)
    assert res.success
    assert res.corrupted_positions == lam * k
    assert np.array_equal(res.message, msgs.sum(axis=0) % code.p)


def test_breakdown_at_twice_the_bound():
    code = make_rs_code(251, 64, 32)
    k = 2 * node_bound(64, 32, 1)
    correct = 0
    for s in range(200):
        rng = np.random.default_rng(s)
        sub, tree = task(k, seed=s % 40, size=120)
        msgs = rng.integers(0, 251, size=(k, 32))
        res = run_dps(sub, tree, msgs, code, make_error_plan(64, 251, 1, sub.members, seed=s))
        correct += np.array_equal(res.message, msgs.sum(axis=0) % 251)
    assert correct / 200 < 0.05


def test_order_independence(rng):
    code = make_rs_code(251, 64, 32)
    sub, tree = task(25, seed=4)
    msgs = rng.integers(0, 251, size=(25, 32))
    plan = make_error_plan(64, 251, 1, sub.members, seed=1)
    ref = run_dps(sub, tree, msgs, code, plan).codeword
    for s in range(10):
        assert np.array_equal(run_dps(sub, tree, msgs, code, plan, leaf_order_seed=s).codeword, ref)


def test_single_encode_discipline(monkeypatch, rng):
    code = make_rs_code(251, 64, 32)
    sub, tree = task(12, seed=5)
    msgs = rng.integers(0, 251, size=(12, 32))
    calls = {"decode": 0, "inject": 0}
    real_decode, real_inject = ReedSolomonCode.decode, protocol.inject_errors

    def spy_decode(self, word):
        calls["decode"] += 1
        return real_decode(self, word)

    def spy_inject(*a, **k):
        assert calls["decode"] == 0
        calls["inject"] += 1
        return real_inject(*a, **k)

    monkeypatch.setattr(ReedSolomonCode, "decode", spy_decode)
    monkeypatch.setattr(protocol, "inject_errors", spy_inject)
    res = run_dps(sub, tree, msgs, code, make_error_plan(64, 251, 1, sub.members, seed=0), trace=True)
    assert calls == {"decode": 1, "inject": 12}
    assert res.trace[-1].startswith(f"decode node={sub.query} ")
    assert sum(line.startswith("decode") for line in res.trace) == 1
    # each node folds into its parent exactly once
    leaf_lines = [line for line in res.trace if "role=leaf" in line]
    assert len(leaf_lines) == 11


def test_trace_line_format():
    code = make_rs_code(7, 6, 2)
    sub, tree = task(3, seed=0)
    res = run_dps(sub, tree, np.ones((3, 2), dtype=int), code, make_error_plan(6, 7, 0, sub.members), trace=True)
    first = res.trace[0].split()
    assert first[0] == "round=0" and first[1].startswith("node=") and first[2].split("=")[1] in ("leaf", "parent", "idle")
    assert first[-1].startswith("fnv=") and len(first[-1]) == 4 + 16


def test_overflow_guard_enforced():
    code = make_rs_code(251, 64, 16)
    cfg = QuantizerConfig(251, 1.0)
    sub, tree = task(3)
    m = quantize(cfg, np.full((3, 16), 1.0))
    with pytest.raises(OverflowGuardError):
        run_dps(sub, tree, m, code, make_error_plan(64, 251, 0, sub.members), quantizer=cfg)


def test_structural_errors():
    code = make_rs_code(251, 64, 16)
    sub, tree = task(5)
    plan = make_error_plan(64, 251, 0, sub.members)
    with pytest.raises(ValueError):
        run_dps(sub, tree, np.zeros((4, 16), dtype=int), code, plan)
    other = build_tree(select_task_subnet(generate_network(80, seed=0), 1, 5))
    with pytest.raises(ValueError):
        run_dps(sub, other, np.zeros((5, 16), dtype=int), code, plan)


def test_batched_frames_match_single_runs(rng):
    code = make_rs_code(251, 64, 48)
    sub, tree = task(10, seed=3)
    msgs = rng.integers(0, 251, size=(10, 6, 48))
    plan = make_error_plan(64, 251, 1, sub.members, seed=2, frames=6)
    batch = run_dps(sub, tree, msgs, code, plan)
    for f in range(6):
        single = ErrorPlan(64, 251, 1, {i: plan.indices[i][f] for i in sub.members},
                           {i: plan.values[i][f] for i in sub.members})
        res = run_dps(sub, tree, msgs[:, f], code, single)
        assert np.array_equal(res.codeword, batch.codeword[f])
        assert res.success == bool(batch.ok[f])


def test_serialization_and_fnv():
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a64(b"foobar") == 0x85944171F73967E8
    c = np.array([0, 1, 1020, 77])
    data = codeword_to_bytes(c)
    assert data[:8] == bytes([0, 0, 0, 0, 1, 0, 0, 0])
    assert np.array_equal(codeword_from_bytes(data), c)
    assert codeword_digest(c).startswith("[0,1,1020,77] fnv=")
