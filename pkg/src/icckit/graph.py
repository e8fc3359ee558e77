"""Causal DAG over named features: validation, ancestor closure, and
enumeration/sampling of topological orderings.

Enumeration uses the classic backtracking scheme over in-degree-zero
candidates (Knuth-style); trying candidates in ascending index order makes
the output lexicographic without a post-sort.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import CycleDetected, DanglingEdge, DuplicateNode, TooManyOrderings

DEFAULT_ORDERING_CAP = 10_000


@dataclass(frozen=True)
class Ordering:
    """A permutation of node indices; topological when produced by this module."""

    permutation: tuple[int, ...]

    def position(self, j: int) -> int:
        return self.permutation.index(j)

    def __iter__(self):
        return iter(self.permutation)

    def __len__(self):
        return len(self.permutation)


@dataclass(frozen=True)
class CausalGraph:
    """Immutable DAG: node names plus directed edges as (parent, child) index pairs."""

    nodes: tuple[str, ...]
    edges: frozenset[tuple[int, int]]
    _parents: tuple[tuple[int, ...], ...] = field(repr=False, default=())

    @property
    def p(self) -> int:
        return len(self.nodes)

    def index(self, name: str) -> int:
        return self.nodes.index(name)

    def parents(self, j: int) -> tuple[int, ...]:
        return self._parents[j]

    def children(self, j: int) -> tuple[int, ...]:
        return tuple(b for (a, b) in sorted(self.edges) if a == j)

    def ancestors(self, j: int) -> frozenset[int]:
        """All nodes with a directed path into j (excluding j itself)."""
        seen: set[int] = set()
        stack = list(self._parents[j])
        while stack:
            k = stack.pop()
            if k not in seen:
                seen.add(k)
                stack.extend(self._parents[k])
        return frozenset(seen)

    def is_ancestor_closed(self, subset) -> bool:
        s = frozenset(subset)
        return all(self.ancestors(j) <= s for j in s)

    def topological_order(self) -> Ordering:
        """One topological ordering (lexicographically smallest)."""
        return _enumerate(self, cap=1, first_only=True)[0]

    def to_json(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "edges": [[self.nodes[a], self.nodes[b]] for (a, b) in sorted(self.edges)],
        }

    @staticmethod
    def from_json(obj: dict) -> "CausalGraph":
        return build_graph(obj["nodes"], [tuple(e) for e in obj["edges"]])


def build_graph(nodes, edges) -> CausalGraph:
    """Validate and construct a CausalGraph.

    ``edges`` may name endpoints or give integer indices. Raises
    DuplicateNode, DanglingEdge, or CycleDetected.
    """
    nodes = tuple(str(n) for n in nodes)
    if len(set(nodes)) != len(nodes):
        dupes = sorted({n for n in nodes if nodes.count(n) > 1})
        raise DuplicateNode(f"duplicate node names: {dupes}")
    lookup = {n: i for i, n in enumerate(nodes)}

    idx_edges: set[tuple[int, int]] = set()
    for a, b in edges:
        try:
            ia = a if isinstance(a, int) else lookup[a]
            ib = b if isinstance(b, int) else lookup[b]
        except KeyError as err:
            raise DanglingEdge(f"edge endpoint {err.args[0]!r} is not a node") from None
        if not (0 <= ia < len(nodes)) or not (0 <= ib < len(nodes)):
            raise DanglingEdge(f"edge index ({a}, {b}) out of range")
        if ia == ib:
            raise CycleDetected(f"self-loop on node {nodes[ia]!r}")
        idx_edges.add((ia, ib))

    parents = tuple(
        tuple(sorted(a for (a, b) in idx_edges if b == j)) for j in range(len(nodes))
    )
    g = CausalGraph(nodes=nodes, edges=frozenset(idx_edges), _parents=parents)
    _check_acyclic(g)
    return g


def _check_acyclic(g: CausalGraph) -> None:
    # Kahn's algorithm; leftovers mean a cycle.
    indeg = [len(g.parents(j)) for j in range(g.p)]
    ready = [j for j in range(g.p) if indeg[j] == 0]
    done = 0
    while ready:
        v = ready.pop()
        done += 1
        for (a, b) in g.edges:
            if a == v:
                indeg[b] -= 1
                if indeg[b] == 0:
                    ready.append(b)
    if done != g.p:
        cyc = sorted(g.nodes[j] for j in range(g.p) if indeg[j] > 0)
        raise CycleDetected(f"graph contains a cycle through {cyc}")


def _enumerate(g: CausalGraph, cap: int, first_only: bool = False) -> list[Ordering]:
    p = g.p
    children = [[] for _ in range(p)]
    indeg = [0] * p
    for (a, b) in g.edges:
        children[a].append(b)
        indeg[b] += 1
    path: list[int] = []
    taken = [False] * p
    out: list[Ordering] = []

    def backtrack() -> bool:
        if len(path) == p:
            if len(out) >= cap and not first_only:
                raise TooManyOrderings(found=len(out) + 1, cap=cap)
            out.append(Ordering(tuple(path)))
            return first_only
        for v in range(p):
            if taken[v] or indeg[v] != 0:
                continue
            taken[v] = True
            path.append(v)
            for c in children[v]:
                indeg[c] -= 1
            stop = backtrack()
            for c in children[v]:
                indeg[c] += 1
            path.pop()
            taken[v] = False
            if stop:
                return True
        return False

    backtrack()
    return out


def enumerate_topological_orderings(
    g: CausalGraph, cap: int = DEFAULT_ORDERING_CAP
) -> list[Ordering]:
    """All topological orderings of ``g`` in lexicographic order.

    Raises TooManyOrderings as soon as more than ``cap`` orderings exist, so
    callers can switch to ``sample_topological_orderings``.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    return _enumerate(g, cap=cap)


def sample_topological_orderings(g: CausalGraph, n: int, seed: int = 0) -> list[Ordering]:
    """Draw n topological orderings by uniform tie-breaking among sources.

    Each step picks uniformly at random among the currently in-degree-zero
    nodes. Exactly uniform over all orderings when the graph has no edges;
    on general graphs it is an approximation of the uniform average over
    orderings (biased toward orderings that expose many sources early).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    base_indeg = [len(g.parents(j)) for j in range(g.p)]
    children = [g.children(j) for j in range(g.p)]
    out = []
    for _ in range(n):
        indeg = list(base_indeg)
        avail = sorted(j for j in range(g.p) if indeg[j] == 0)
        perm: list[int] = []
        while avail:
            v = avail.pop(int(rng.integers(len(avail))))
            perm.append(v)
            for c in children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    avail.append(c)
            avail.sort()
        out.append(Ordering(tuple(perm)))
    return out


def prefix_set(o: Ordering, j: int) -> frozenset[int]:
    """Indices strictly preceding node j in the ordering."""
    pos = o.position(j)
    return frozenset(o.permutation[:pos])


def load_graph(path: str) -> CausalGraph:
    with open(path) as fh:
        return CausalGraph.from_json(json.load(fh))


def save_graph(g: CausalGraph, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(g.to_json(), fh, indent=1)
        fh.write("\n")
