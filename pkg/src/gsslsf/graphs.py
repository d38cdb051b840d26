"""Graph topologies used by the separation experiments.

Graphs are undirected and simple, live on vertices ``0..N-1`` and are
stored as a frozen set of ordered pairs ``(u, v)`` with ``u < v``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from os import PathLike

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order
from scipy.spatial.distance import pdist, squareform

from .errors import ConnectivityFailure, SimplicityFailure

__all__ = [
    "Graph",
    "default_rgg_radius",
    "generate_random_geometric",
    "generate_random_regular",
    "build_laplacian",
    "is_connected",
    "read_edgelist",
    "write_edgelist",
]


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph on ``num_nodes`` vertices.

    Parameters
    ----------
    num_nodes : int
        Number of vertices N.
    edges : iterable of (int, int)
        Unordered vertex pairs. Normalised to ``(min, max)`` on construction.
    coords : ndarray of shape (N, 2), optional
        Vertex positions, only set for geometric graphs.
    """

    num_nodes: int
    edges: frozenset = field(default_factory=frozenset)
    coords: np.ndarray | None = None

    def __post_init__(self):
        n = int(self.num_nodes)
        if n < 1:
            raise ValueError(f"num_nodes must be positive, got {n}")
        normed = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) out of range for N={n}")
            normed.add((u, v) if u < v else (v, u))
        object.__setattr__(self, "num_nodes", n)
        object.__setattr__(self, "edges", frozenset(normed))
        if self.coords is not None:
            coords = np.array(self.coords, dtype=float)
            if coords.shape != (n, 2):
                raise ValueError(f"coords must have shape ({n}, 2), got {coords.shape}")
            coords.setflags(write=False)
            object.__setattr__(self, "coords", coords)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def edge_array(self) -> np.ndarray:
        """Edges as a lexicographically sorted ``(M, 2)`` integer array."""
        if not self.edges:
            return np.zeros((0, 2), dtype=np.int64)
        return np.array(sorted(self.edges), dtype=np.int64)

    def adjacency(self) -> np.ndarray:
        """Dense 0/1 integer adjacency matrix."""
        adj = np.zeros((self.num_nodes, self.num_nodes), dtype=np.int64)
        e = self.edge_array()
        adj[e[:, 0], e[:, 1]] = 1
        adj[e[:, 1], e[:, 0]] = 1
        return adj

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_nodes, dtype=np.int64)
        e = self.edge_array()
        np.add.at(deg, e.ravel(), 1)
        return deg

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.num_nodes == other.num_nodes and self.edges == other.edges

    def __hash__(self):
        return hash((self.num_nodes, self.edges))


def default_rgg_radius(n: int) -> float:
    """Connection radius ``1.5 * sqrt(ln N / (pi N))``, above the connectivity threshold."""
    return 1.5 * math.sqrt(math.log(n) / (math.pi * n))


def is_connected(g: Graph) -> bool:
    """True iff a breadth-first traversal from vertex 0 reaches every vertex."""
    if g.num_nodes == 1:
        return True
    e = g.edge_array()
    if len(e) == 0:
        return False
    ones = np.ones(len(e), dtype=np.int8)
    adj = coo_matrix((ones, (e[:, 0], e[:, 1])), shape=(g.num_nodes, g.num_nodes)).tocsr()
    order = breadth_first_order(adj, 0, directed=False, return_predecessors=False)
    return len(order) == g.num_nodes


def generate_random_geometric(
    n: int,
    radius: float | None = None,
    rng: np.random.Generator | int | None = None,
    max_attempts: int = 100,
) -> Graph:
    """Connected random geometric graph in the unit square.

    Vertices are placed uniformly at random and joined whenever their
    Euclidean distance is at most ``radius``. Disconnected samples are
    redrawn up to ``max_attempts`` times.

    Raises
    ------
    ConnectivityFailure
        If every sample was disconnected.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if radius is None:
        radius = default_rgg_radius(n)
    if not (0.0 < radius <= math.sqrt(2.0)):
        raise ValueError(f"radius must lie in (0, sqrt(2)], got {radius}")
    if max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    rng = np.random.default_rng(rng)

    for _ in range(max_attempts):
        pts = rng.uniform(0.0, 1.0, size=(n, 2))
        dist = squareform(pdist(pts))
        iu, ju = np.nonzero(np.triu(dist <= radius, k=1))
        g = Graph(n, frozenset(zip(iu.tolist(), ju.tolist())), coords=pts)
        if is_connected(g):
            return g
    raise ConnectivityFailure(
        f"no connected geometric graph with n={n}, radius={radius:.4g} "
        f"in {max_attempts} attempts"
    )


def _pair_stubs(n: int, degree: int, rng: np.random.Generator):
    # Pairing model: keep the valid pairs of each shuffle and re-pair only the
    # stubs that produced a loop or a repeated edge. Returns None when stuck.
    edges: set[tuple[int, int]] = set()
    stubs = np.repeat(np.arange(n), degree).tolist()
    while stubs:
        rng.shuffle(stubs)
        leftover: dict[int, int] = defaultdict(int)
        it = iter(stubs)
        for a, b in zip(it, it):
            if a > b:
                a, b = b, a
            if a != b and (a, b) not in edges:
                edges.add((a, b))
            else:
                leftover[a] += 1
                leftover[b] += 1
        if not leftover:
            break
        nodes = sorted(leftover)
        if not any(
            u < v and (u, v) not in edges for u in nodes for v in nodes
        ):
            return None
        stubs = [v for v in nodes for _ in range(leftover[v])]
    return edges


def generate_random_regular(
    n: int,
    degree: int,
    rng: np.random.Generator | int | None = None,
    max_attempts: int = 100,
) -> Graph:
    """Connected random ``degree``-regular simple graph via the pairing model.

    Raises
    ------
    SimplicityFailure
        If no attempt produced a simple graph.
    ConnectivityFailure
        If simple graphs were produced but all were disconnected.
    """
    if degree < 0 or degree >= n:
        raise ValueError(f"need 0 <= degree < n, got degree={degree}, n={n}")
    if (n * degree) % 2:
        raise ValueError(f"n * degree must be even, got {n}*{degree}")
    if max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    rng = np.random.default_rng(rng)

    saw_simple = False
    for _ in range(max_attempts):
        edges = _pair_stubs(n, degree, rng)
        if edges is None:
            continue
        saw_simple = True
        g = Graph(n, frozenset(edges))
        if is_connected(g):
            return g
    if saw_simple:
        raise ConnectivityFailure(
            f"all simple {degree}-regular samples on {n} nodes were disconnected"
        )
    raise SimplicityFailure(
        f"pairing model failed to give a simple {degree}-regular graph on {n} nodes "
        f"in {max_attempts} attempts"
    )


def build_laplacian(g: Graph) -> np.ndarray:
    """Combinatorial Laplacian ``L = D - A`` as a float array.

    Assembled in integer arithmetic, so every row sums to exactly zero.
    """
    adj = g.adjacency()
    lap = np.diag(adj.sum(axis=1)) - adj
    return lap.astype(float)


def write_edgelist(g: Graph, path: str | PathLike) -> None:
    """Write ``N M`` followed by one ``u v`` line per edge."""
    e = g.edge_array()
    lines = [f"{g.num_nodes} {len(e)}"]
    lines += [f"{u} {v}" for u, v in e]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_edgelist(path: str | PathLike) -> Graph:
    """Read a graph written by :func:`write_edgelist`."""
    with open(path) as fh:
        rows = [ln.split() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows or len(rows[0]) != 2:
        raise ValueError(f"{path}: first line must be 'N M'")
    n, m = (int(t) for t in rows[0])
    body = rows[1:]
    if len(body) != m:
        raise ValueError(f"{path}: header announces {m} edges, found {len(body)}")
    edges = []
    for lineno, row in enumerate(body, start=2):
        if len(row) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'u v', got {' '.join(row)!r}")
        edges.append((int(row[0]), int(row[1])))
    if len(set((min(u, v), max(u, v)) for u, v in edges)) != m:
        raise ValueError(f"{path}: duplicate edges")
    return Graph(n, frozenset(edges))
