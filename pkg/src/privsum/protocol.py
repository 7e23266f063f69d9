"""Distributed private summation over a routing tree.

Every task node encodes its message, overwrites ``lam`` random codeword
symbols, and the codewords are then summed leaf-to-root, one round of leaf
removal at a time.  Only the query node decodes, once, after the tree has been
consumed.  With more than ``(d - 1) / (2 lam)`` participants the summed
codeword leaves the decoding radius and the sum is destroyed.

Messages may carry a leading frame axis: ``(k, l)`` for one summation or
``(k, frames, l)`` for a batch of independent summations over the same tree.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .code import DecodeFailure, ReedSolomonCode
from .network import RoutingTree, TaskSubnet, round_step
from .quantizer import QuantizerConfig, dequantize, overflow_guard

log = logging.getLogger(__name__)

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


class OverflowGuardError(ValueError):
    """Summed level indices could wrap the centred representation."""


def node_bound(n: int, l: int, lam: int) -> int | None:
    """Largest node count strictly below ``(n - l + 1) / (2 lam)``; None when ``lam == 0``."""
    if lam < 0:
        raise ValueError("lam must be >= 0")
    if lam == 0:
        return None
    return (n - l) // (2 * lam)


def codeword_to_bytes(c) -> bytes:
    """Little-endian uint32 per symbol."""
    c = np.asarray(c).astype("<u4")
    return c.tobytes()


def codeword_from_bytes(data: bytes) -> np.ndarray:
    return np.frombuffer(data, dtype="<u4").astype(np.int64)


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def codeword_digest(c) -> str:
    c = np.asarray(c)
    head = ",".join(str(int(v)) for v in c.reshape(-1)[:4])
    return f"[{head}] fnv={fnv1a64(codeword_to_bytes(c)):016x}"


@dataclass(frozen=True)
class ErrorPlan:
    """Per-node error positions and overwrite values.

    ``indices[node]`` and ``values[node]`` have shape ``(lam,)`` or
    ``(frames, lam)``.
    """

    n: int
    p: int
    lam: int
    indices: dict
    values: dict


def make_error_plan(n: int, p: int, lam: int, node_ids, seed=None, frames: int | None = None) -> ErrorPlan:
    if lam > n:
        raise ValueError(f"cannot corrupt {lam} of {n} symbols")
    if lam < 0:
        raise ValueError("lam must be >= 0")
    rng = np.random.default_rng(seed)
    shape = () if frames is None else (frames,)
    indices, values = {}, {}
    for node in node_ids:
        if lam == 0:
            idx = np.zeros(shape + (0,), dtype=np.int64)
        elif frames is None:
            idx = rng.choice(n, lam, replace=False)
        else:
            # argsort of uniform keys = independent draws without replacement per row
            idx = np.argsort(rng.random((frames, n)), axis=1)[:, :lam]
        indices[node] = idx.astype(np.int64)
        values[node] = rng.integers(0, p, size=shape + (lam,), dtype=np.int64)
    return ErrorPlan(n=n, p=p, lam=lam, indices=indices, values=values)


def inject_errors(c, indices, values) -> np.ndarray:
    """Overwrite (not add) the symbols at ``indices`` with ``values``."""
    out = np.array(c, copy=True)
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        return out
    if out.ndim == 1:
        out[indices] = values
    else:
        np.put_along_axis(out, indices, np.asarray(values, dtype=out.dtype), axis=-1)
    return out


@dataclass
class DpsResult:
    """Outcome at the query node.

    ``message`` holds the decoded field sum (rows where decoding failed hold
    the systematic read-off instead); ``ok`` marks frames that decoded.
    ``value`` is the dequantized sum when a quantizer was supplied.
    """

    codeword: np.ndarray
    message: np.ndarray
    ok: np.ndarray
    reasons: list
    rounds: int
    corrupted_positions: np.ndarray
    value: np.ndarray | None = None
    trace: list = field(default_factory=list)

    @property
    def success(self) -> bool:
        return bool(np.all(self.ok))


def run_dps(
    subnet: TaskSubnet,
    tree: RoutingTree,
    messages,
    code: ReedSolomonCode,
    plan: ErrorPlan,
    quantizer: QuantizerConfig | None = None,
    trace: bool = False,
    leaf_order_seed=None,
) -> DpsResult:
    """Run one private summation task.

    ``messages`` rows are aligned with ``subnet.members``.  When ``quantizer``
    is given, the overflow guard is enforced and the decoded sum is
    dequantized into ``DpsResult.value``.  ``leaf_order_seed`` shuffles the
    order in which leaves are folded into parents within each round.
    """
    p = code.p
    msgs = np.asarray(messages, dtype=np.int64) % p
    single = msgs.ndim == 2
    if single:
        msgs = msgs[:, None, :]
    k, frames, l = msgs.shape
    if k != subnet.size:
        raise ValueError(f"{k} messages for {subnet.size} task nodes")
    if l != code.l:
        raise ValueError(f"message length {l} does not match code l={code.l}")
    if tree.root != subnet.query or len(tree.tree_edges) != subnet.size - 1:
        raise ValueError("routing tree does not span the task subnet")
    if quantizer is not None and not overflow_guard(quantizer, k, msgs):
        raise OverflowGuardError(f"{k} nodes x max |m| exceeds ({p}-1)/2")

    encoded = code.encode(msgs.reshape(-1, l)).reshape(k, frames, code.n)
    states = {}
    for row, node in enumerate(subnet.members):
        idx, val = plan.indices[node], plan.values[node]
        if single:
            idx, val = idx[None], val[None]
        states[node] = inject_errors(encoded[row], idx, val)

    lines = []
    order_rng = np.random.default_rng(leaf_order_seed) if leaf_order_seed is not None else None
    edges = tree.tree_edges
    active = set(subnet.members)
    rounds = 0
    while edges:
        sets, edges = round_step(edges, tree.root)
        if trace:
            leaves, parents = set(sets.leaves), set(sets.leaf_parents)
            for node in sorted(active):
                role = "leaf" if node in leaves else "parent" if node in parents else "idle"
                lines.append(f"round={rounds} node={node} role={role} {codeword_digest(states[node])}")
        pairs = list(sets.leaf_edges)
        if order_rng is not None:
            order_rng.shuffle(pairs)
        # leaves and parents are disjoint within a round, so in-place folding
        # equals applying the round's mixing matrix to the previous states
        for leaf, parent in pairs:
            states[parent] = (states[parent] + states[leaf]) % p
            active.discard(leaf)
        rounds += 1

    final = states[tree.root]
    if trace:
        lines.append(f"decode node={tree.root} {codeword_digest(final)}")

    message = np.empty((frames, l), dtype=np.int64)
    ok = np.zeros(frames, dtype=bool)
    reasons = [None] * frames
    for f in range(frames):
        try:
            message[f] = code.decode(final[f]).message
            ok[f] = True
        except DecodeFailure as exc:
            reasons[f] = exc.reason
            message[f] = code.naive_decode(final[f], l)
    clean = code.encode(msgs.sum(axis=0) % p)
    corrupted = np.count_nonzero(final != clean, axis=-1)

    value = dequantize(quantizer, message) if quantizer is not None else None
    if single:
        final, message, corrupted = final[0], message[0], corrupted[0]
        value = value[0] if value is not None else None
    if not ok.all():
        log.debug("decode failed on %d of %d frames", int((~ok).sum()), frames)
    return DpsResult(codeword=final, message=message, ok=ok, reasons=reasons, rounds=rounds,
                     corrupted_positions=corrupted, value=value, trace=lines)
