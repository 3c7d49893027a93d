"""Random DAGs, structural queries, and Markov equivalence classes of forests.

Vertices are 0-based integers internally. The JSON form uses 1-based indices,
``{"d": 3, "edges": [[1, 2], [2, 3]]}``.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np

from .errors import CycleDetected, InvalidParameter, NotAForest, TooLarge

Edge = tuple[int, int]


def _kahn(d: int, edges: Iterable[Edge]) -> tuple[int, ...] | None:
    indeg = [0] * d
    children: list[list[int]] = [[] for _ in range(d)]
    for i, j in edges:
        indeg[j] += 1
        children[i].append(j)
    heap = [v for v in range(d) if indeg[v] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        v = heapq.heappop(heap)
        order.append(v)
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(heap, c)
    if len(order) < d:
        return None
    return tuple(order)


@dataclass(frozen=True)
class Dag:
    """Directed acyclic graph over vertices ``0..d-1``; edge ``(i, j)`` means i -> j."""

    d: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.d < 1:
            raise InvalidParameter(f"vertex count must be positive, got {self.d}")
        raw = list(self.edges)
        edges = frozenset((int(i), int(j)) for i, j in raw)
        if len(edges) != len(raw):
            raise InvalidParameter("duplicate edges")
        for i, j in edges:
            if i == j:
                raise InvalidParameter(f"self-loop at vertex {i}")
            if not (0 <= i < self.d and 0 <= j < self.d):
                raise InvalidParameter(f"edge ({i}, {j}) out of range for d={self.d}")
        object.__setattr__(self, "edges", edges)
        if _kahn(self.d, edges) is None:
            raise CycleDetected("edge set contains a directed cycle")

    @cached_property
    def order(self) -> tuple[int, ...]:
        return _kahn(self.d, self.edges)

    @cached_property
    def _parents(self) -> tuple[tuple[int, ...], ...]:
        pa: list[list[int]] = [[] for _ in range(self.d)]
        for i, j in self.edges:
            pa[j].append(i)
        return tuple(tuple(sorted(p)) for p in pa)

    def parents(self, j: int) -> tuple[int, ...]:
        return self._parents[j]

    def children(self, i: int) -> tuple[int, ...]:
        return tuple(sorted(j for a, j in self.edges if a == i))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges)

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.d, self.d), dtype=bool)
        for i, j in self.edges:
            A[i, j] = True
        return A

    def skeleton(self) -> frozenset:
        return frozenset(frozenset(e) for e in self.edges)

    def v_structures(self) -> frozenset:
        """Triples ``(a, c, b)`` with a -> c <- b, a < b, and a, b non-adjacent."""
        skel = self.skeleton()
        out = set()
        for c in range(self.d):
            for a, b in itertools.combinations(self.parents(c), 2):
                if frozenset((a, b)) not in skel:
                    out.add((a, c, b))
        return frozenset(out)

    @classmethod
    def from_adjacency(cls, A) -> "Dag":
        A = np.asarray(A)
        rows, cols = np.nonzero(A)
        return cls(A.shape[0], frozenset(zip(rows.tolist(), cols.tolist())))

    def to_json(self) -> dict:
        return {"d": self.d, "edges": [[i + 1, j + 1] for i, j in self.sorted_edges()]}

    @classmethod
    def from_json(cls, obj: dict) -> "Dag":
        return cls(int(obj["d"]), [(i - 1, j - 1) for i, j in obj["edges"]])


@dataclass(frozen=True)
class Cpdag:
    """Partially directed graph representing a Markov equivalence class."""

    d: int
    directed: frozenset = field(default_factory=frozenset)
    undirected: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        directed = frozenset((int(i), int(j)) for i, j in self.directed)
        undirected = frozenset(frozenset(int(v) for v in e) for e in self.undirected)
        if any(len(e) != 2 for e in undirected):
            raise InvalidParameter("undirected edges must join two distinct vertices")
        skel_dir = {frozenset(e) for e in directed}
        if len(skel_dir) != len(directed) or skel_dir & undirected:
            raise InvalidParameter("directed and undirected edges overlap")
        object.__setattr__(self, "directed", directed)
        object.__setattr__(self, "undirected", undirected)

    def skeleton(self) -> frozenset:
        return frozenset(frozenset(e) for e in self.directed) | self.undirected

    def neighbors(self) -> list[set[int]]:
        nb: list[set[int]] = [set() for _ in range(self.d)]
        for e in self.skeleton():
            a, b = tuple(e)
            nb[a].add(b)
            nb[b].add(a)
        return nb

    def undirected_components(self) -> list[list[int]]:
        """Vertex sets of the connected components formed by undirected edges (>= 1 edge)."""
        nb: dict[int, set[int]] = {}
        for e in self.undirected:
            a, b = tuple(e)
            nb.setdefault(a, set()).add(b)
            nb.setdefault(b, set()).add(a)
        seen: set[int] = set()
        comps = []
        for start in sorted(nb):
            if start in seen:
                continue
            stack, comp = [start], []
            seen.add(start)
            while stack:
                v = stack.pop()
                comp.append(v)
                for u in nb[v]:
                    if u not in seen:
                        seen.add(u)
                        stack.append(u)
            comps.append(sorted(comp))
        return comps

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "directed": [[i + 1, j + 1] for i, j in sorted(self.directed)],
            "undirected": sorted([sorted(v + 1 for v in e) for e in self.undirected]),
        }


def _check_degree(d: int, k: float) -> None:
    if d < 1:
        raise InvalidParameter("d must be >= 1")
    if not (0 < k <= d - 1):
        raise InvalidParameter(f"expected degree k must lie in (0, d-1], got k={k}, d={d}")


def sample_er(d: int, k: float, rng: np.random.Generator) -> Dag:
    """Erdos-Renyi DAG with expected total degree ``k`` per vertex.

    Each of the d(d-1)/2 pairs that are forward in a uniformly random vertex
    permutation is included independently with probability k/(d-1).
    """
    _check_degree(d, k)
    p = min(1.0, k / (d - 1))
    perm = rng.permutation(d)
    iu, ju = np.triu_indices(d, k=1)
    keep = rng.random(iu.size) < p
    edges = zip(perm[iu[keep]].tolist(), perm[ju[keep]].tolist())
    return Dag(d, frozenset(edges))


def sample_usf(d: int, k: int, rng: np.random.Generator) -> Dag:
    """Undirected Barabasi-Albert graph oriented along an independent random order.

    The attachment process starts from a single vertex; arrival ``t`` connects
    to ``min(k, t)`` distinct existing vertices chosen proportionally to degree.
    """
    if d < 1 or not (1 <= k < d):
        raise InvalidParameter(f"need 1 <= k < d, got k={k}, d={d}")
    degree = np.zeros(d)
    pairs = []
    for t in range(1, d):
        m = min(k, t)
        w = degree[:t]
        total = w.sum()
        if total == 0:
            targets = rng.choice(t, size=m, replace=False)
        else:
            targets = rng.choice(t, size=m, replace=False, p=w / total)
        for s in targets.tolist():
            pairs.append((s, t))
            degree[s] += 1
            degree[t] += 1
    perm = rng.permutation(d)
    rank = np.empty(d, dtype=int)
    rank[perm] = np.arange(d)
    edges = [(a, b) if rank[a] < rank[b] else (b, a) for a, b in pairs]
    return Dag(d, frozenset(edges))


def sample_forest(d: int, rng: np.random.Generator, p_attach: float = 0.85) -> Dag:
    """Random forest DAG: each vertex joins an earlier one with prob ``p_attach``;
    edge directions are drawn uniformly (so colliders occur)."""
    perm = rng.permutation(d)
    edges = []
    for t in range(1, d):
        if rng.random() < p_attach:
            s = int(rng.integers(t))
            a, b = int(perm[s]), int(perm[t])
            edges.append((a, b) if rng.random() < 0.5 else (b, a))
    return Dag(d, frozenset(edges))


def chain(d: int) -> Dag:
    return Dag(d, frozenset((i, i + 1) for i in range(d - 1)))


def topological_order(dag: Dag) -> tuple[int, ...]:
    """Kahn's algorithm with ties broken by smallest vertex index."""
    order = _kahn(dag.d, dag.edges)
    if order is None:
        raise CycleDetected("graph has a directed cycle")
    return order


def is_forest(dag: Dag) -> bool:
    parent = list(range(dag.d))

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for i, j in dag.edges:
        ri, rj = find(i), find(j)
        if ri == rj:
            return False
        parent[ri] = rj
    return True


def meek_rule1(d: int, directed: set, undirected: set, adjacent) -> None:
    """Close ``directed``/``undirected`` in place under a->b, b-c, a !~ c => b->c.

    ``adjacent(a, c)`` reports skeleton adjacency.
    """
    changed = True
    while changed:
        changed = False
        for a, b in sorted(directed):
            for e in sorted(undirected, key=sorted):
                if b not in e:
                    continue
                (c,) = tuple(e - {b})
                if c != a and not adjacent(a, c):
                    undirected.discard(e)
                    directed.add((b, c))
                    changed = True


def cpdag_of_forest(dag: Dag) -> Cpdag:
    """Exact CPDAG of a forest: v-structure edges plus first-Meek-rule closure.

    Rules 2-4 need skeleton triangles, which forests do not have.
    """
    if not is_forest(dag):
        raise NotAForest("skeleton contains a cycle")
    directed = set()
    for c in range(dag.d):
        pa = dag.parents(c)
        if len(pa) >= 2:
            directed.update((p, c) for p in pa)
    undirected = {frozenset(e) for e in dag.edges if e not in directed}
    skel = dag.skeleton()
    meek_rule1(dag.d, directed, undirected, lambda a, c: frozenset((a, c)) in skel)
    return Cpdag(dag.d, frozenset(directed), frozenset(undirected))


def enumerate_forest_mec(cpdag: Cpdag, max_undirected: int = 20) -> list[Dag]:
    """All DAGs in the equivalence class of a forest CPDAG.

    Each undirected component is a tree; its members are the orientations away
    from each choice of root (the only collider-free orientations of a tree).
    """
    if len(cpdag.undirected) > max_undirected:
        raise TooLarge(f"{len(cpdag.undirected)} undirected edges exceeds {max_undirected}")
    skel = cpdag.skeleton()
    if len(skel) != 0 and not is_forest(Dag(cpdag.d, frozenset(tuple(sorted(e)) for e in skel))):
        raise NotAForest("skeleton contains a cycle")
    comps = cpdag.undirected_components()
    nb: dict[int, list[int]] = {}
    for e in cpdag.undirected:
        a, b = tuple(e)
        nb.setdefault(a, []).append(b)
        nb.setdefault(b, []).append(a)

    def orient_from(root):
        out, seen, stack = [], {root}, [root]
        while stack:
            v = stack.pop()
            for u in nb[v]:
                if u not in seen:
                    seen.add(u)
                    out.append((v, u))
                    stack.append(u)
        return out

    members = []
    for roots in itertools.product(*comps):
        edges = set(cpdag.directed)
        for r in roots:
            edges.update(orient_from(r))
        dag = Dag(cpdag.d, frozenset(edges))
        if cpdag_of_forest(dag) == cpdag:
            members.append(dag)
    return members
