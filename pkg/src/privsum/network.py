"""Random geometric sensor networks, task subnets and routing trees."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

Edge = tuple[int, int]


def _edge(i: int, j: int) -> Edge:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class SensorNetwork:
    positions: np.ndarray
    comm_range: float = 10.0
    arena_radius: float = 25.0
    seed: int | None = None
    neighbors: tuple[tuple[int, ...], ...] = field(init=False, repr=False)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        diff = pos[:, None, :] - pos[None, :, :]
        dist = np.sqrt((diff**2).sum(-1))
        adj = dist <= self.comm_range
        np.fill_diagonal(adj, False)
        object.__setattr__(self, "neighbors", tuple(tuple(np.flatnonzero(row).tolist()) for row in adj))

    @property
    def size(self) -> int:
        return len(self.positions)

    @property
    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.size, self.size), dtype=bool)
        for i, nb in enumerate(self.neighbors):
            adj[i, list(nb)] = True
        return adj

    def edges(self) -> list[Edge]:
        return [(i, j) for i, nb in enumerate(self.neighbors) for j in nb if i < j]


def generate_network(node_count: int, arena_radius: float = 25.0, comm_range: float = 10.0, seed=None) -> SensorNetwork:
    """Scatter ``node_count`` nodes uniformly by area over a disc."""
    if node_count < 1:
        raise ValueError("node_count must be >= 1")
    rng = np.random.default_rng(seed)
    r = arena_radius * np.sqrt(rng.random(node_count))
    theta = 2 * np.pi * rng.random(node_count)
    pos = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    return SensorNetwork(pos, comm_range=comm_range, arena_radius=arena_radius,
                         seed=seed if isinstance(seed, (int, type(None))) else None)


@dataclass(frozen=True)
class TaskSubnet:
    query: int
    members: tuple[int, ...]  # BFS discovery order, query first
    edges: frozenset
    truncated: bool = False  # component was smaller than the requested size

    @property
    def size(self) -> int:
        return len(self.members)


def select_task_subnet(net: SensorNetwork, query: int, target_size: int) -> TaskSubnet:
    """Grow a connected subnet outward from ``query`` in BFS order."""
    if not 0 <= query < net.size:
        raise ValueError(f"query node {query} not in network of {net.size} nodes")
    if target_size < 1:
        raise ValueError("target_size must be >= 1")
    order = [query]
    seen = {query}
    frontier = deque([query])
    while frontier and len(order) < target_size:
        i = frontier.popleft()
        for j in net.neighbors[i]:
            if j not in seen:
                seen.add(j)
                order.append(j)
                frontier.append(j)
                if len(order) == target_size:
                    break
    members = set(order)
    edges = frozenset(_edge(i, j) for i in order for j in net.neighbors[i] if j in members)
    return TaskSubnet(query=query, members=tuple(order), edges=edges, truncated=len(order) < target_size)


@dataclass(frozen=True)
class RoutingTree:
    root: int
    parent: dict
    tree_edges: frozenset

    def depth(self) -> int:
        best = 0
        for node in self.parent:
            k, cur = 0, node
            while cur != self.root:
                cur = self.parent[cur]
                k += 1
            best = max(best, k)
        return best


def build_tree(subnet: TaskSubnet) -> RoutingTree:
    """BFS spanning tree rooted at the query node, ties broken by node id."""
    adj: dict[int, list[int]] = {i: [] for i in subnet.members}
    for i, j in subnet.edges:
        adj[i].append(j)
        adj[j].append(i)
    parent = {}
    seen = {subnet.query}
    frontier = deque([subnet.query])
    while frontier:
        i = frontier.popleft()
        for j in sorted(adj[i]):
            if j not in seen:
                seen.add(j)
                parent[j] = i
                frontier.append(j)
    if len(seen) != subnet.size:
        raise ValueError("task subnet is not connected")
    edges = frozenset(_edge(c, p) for c, p in parent.items())
    return RoutingTree(root=subnet.query, parent=parent, tree_edges=edges)


@dataclass(frozen=True)
class RoundSets:
    leaves: tuple[int, ...]
    leaf_parents: tuple[int, ...]
    leaf_edges: tuple[Edge, ...]  # (leaf, parent)


def round_step(tree_edges: Iterable[Edge], root: int) -> tuple[RoundSets, frozenset]:
    """Split off the current leaves; returns their sets and the remaining edges."""
    tree_edges = frozenset(tree_edges)
    degree: dict[int, int] = {}
    other: dict[int, int] = {}
    for i, j in tree_edges:
        degree[i] = degree.get(i, 0) + 1
        degree[j] = degree.get(j, 0) + 1
        other[i], other[j] = j, i
    leaves = tuple(sorted(v for v, deg in degree.items() if deg == 1 and v != root))
    leaf_edges = tuple((v, other[v]) for v in leaves)
    parents = tuple(sorted({par for _, par in leaf_edges}))
    remaining = tree_edges - {_edge(a, b) for a, b in leaf_edges}
    return RoundSets(leaves, parents, leaf_edges), remaining


def iter_rounds(tree: RoutingTree):
    edges = tree.tree_edges
    while edges:
        sets, edges = round_step(edges, tree.root)
        yield sets


def dump_topology(net: SensorNetwork, fh, subnet: TaskSubnet | None = None, tree: RoutingTree | None = None) -> None:
    """Write ``node id x y`` lines, then ``edge i j`` lines (``tree`` marks routing edges)."""
    for i, (x, y) in enumerate(net.positions):
        fh.write(f"node {i} {x:.6f} {y:.6f}\n")
    for i, j in net.edges():
        fh.write(f"edge {i} {j}\n")
    if subnet is not None:
        fh.write(f"query {subnet.query}\n")
        fh.write("members " + " ".join(map(str, subnet.members)) + "\n")
    if tree is not None:
        for i, j in sorted(tree.tree_edges):
            fh.write(f"tree {i} {j}\n")


def load_topology(fh, comm_range: float = 10.0, arena_radius: float = 25.0) -> SensorNetwork:
    """Inverse of :func:`dump_topology` for the node lines; edges are re-derived and checked."""
    positions, edges = {}, set()
    for line in fh:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "node":
            positions[int(parts[1])] = (float(parts[2]), float(parts[3]))
        elif parts[0] == "edge":
            edges.add(_edge(int(parts[1]), int(parts[2])))
    net = SensorNetwork(np.array([positions[i] for i in range(len(positions))]), comm_range=comm_range,
                        arena_radius=arena_radius)
    if edges and edges != set(net.edges()):
        raise ValueError("edge list does not match node positions and comm_range")
    return net
