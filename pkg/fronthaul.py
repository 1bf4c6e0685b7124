"""
Fronthaul delivery: transfer requirements and multicast bit-loads.

Three strategies are supported on the shared CU -> ENs link:

- ``unicast``: every (EN, subfile) requirement is sent separately;
- ``multicast``: every needed subfile is sent once;
- ``coded``: XOR-style combinations found by greedy coloring of the
  index-coding conflict graph, where each EN decodes its missing subfile
  with its cache as side information.

EN, file and subfile indices are 1-based.
"""

import logging
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from cache_placement import CacheState
from errors import InstanceTooLargeError, ParameterError
from fran_model import Demand

logger = logging.getLogger(__name__)

Packet = Tuple[int, int]  # (file, subfile)
Requirement = Tuple[int, int, int]  # (EN, file, subfile)

BRUTEFORCE_VERTEX_CAP = 12


@dataclass(frozen=True)
class DeliveryRequirement:
    """Subfiles the CU must deliver to each EN, ``d^i_{f,l} = 1``."""

    d: FrozenSet[Requirement]
    demand: Demand
    serving: Tuple[Tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.d)

    def packets(self) -> FrozenSet[Packet]:
        """Distinct subfiles appearing in the requirement."""
        return frozenset((f, l) for _, f, l in self.d)

    def sorted(self) -> List[Requirement]:
        """Requirements in lexicographic (EN, file, subfile) order."""
        return sorted(self.d)


@dataclass(frozen=True)
class FronthaulLoad:
    """Bits multicast on the fronthaul by one strategy."""

    strategy: str
    S_B: float
    n_sub: int = 0


def compute_requirements(
    cache: CacheState, demand: Demand, serving: Sequence[Sequence[int]]
) -> DeliveryRequirement:
    """
    Subfiles each EN needs to take part in multi-connectivity transmission.

    ``(i, f_k, l)`` is required when EN ``i`` serves UE ``k`` and does not
    cache ``(f_k, l)``. UEs that share a file and an EN add the entry once.
    """
    N = cache.c.shape[0]
    if len(serving) != len(demand.f):
        raise ParameterError(
            f"got {len(serving)} serving sets for {len(demand.f)} UEs"
        )

    d = set()
    for k, ens in enumerate(serving, start=1):
        f = demand.file_of(k)
        for i in ens:
            if not 1 <= i <= N:
                raise ParameterError(f"serving EN {i} outside [1, {N}]")
            missing = np.flatnonzero(~cache.c[i - 1, f - 1])
            d.update((i, f, int(l) + 1) for l in missing)

    return DeliveryRequirement(
        d=frozenset(d),
        demand=demand,
        serving=tuple(tuple(int(i) for i in ens) for ens in serving),
    )


def unicast_bits(req: DeliveryRequirement, subfile_size: float) -> FronthaulLoad:
    """Every requirement sent on its own: ``S_B = |d| * S~``."""
    return FronthaulLoad("unicast", len(req.d) * subfile_size)


def multicast_bits(req: DeliveryRequirement, subfile_size: float) -> FronthaulLoad:
    """Every needed subfile sent once to all ENs that want it."""
    return FronthaulLoad("multicast", len(req.packets()) * subfile_size)


class ConflictGraph:
    """Index-coding conflict graph over (EN, wanted packet) vertices.

    Two vertices conflict, i.e. cannot share one coded transmission, when
    their packets differ and at least one of the two ENs lacks the other's
    packet. Vertex ``j`` is ``vertices[j]``; the adjacency lives in a
    :class:`networkx.Graph` over vertex indices.
    """

    def __init__(self, vertices: Sequence[Tuple[int, Packet]], graph: nx.Graph):
        self.vertices: List[Tuple[int, Packet]] = list(vertices)
        self.graph = graph

    def __len__(self) -> int:
        return len(self.vertices)

    def adjacent(self, u: int, v: int) -> bool:
        return self.graph.has_edge(u, v)

    def edges(self) -> List[Tuple[int, int]]:
        """Edges as sorted index pairs."""
        return sorted(tuple(sorted(e)) for e in self.graph.edges())

    def dump(self) -> str:
        """Edge list: vertex count on the first line, then ``u v`` per edge."""
        lines = [str(len(self.vertices))]
        lines.extend(f"{u} {v}" for u, v in self.edges())
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edge_list(
        cls, text: str, vertices: Optional[Sequence[Tuple[int, Packet]]] = None
    ) -> "ConflictGraph":
        """Inverse of :meth:`dump`; vertices default to placeholders."""
        lines = [line.split() for line in text.splitlines() if line.strip()]
        if not lines:
            raise ParameterError("edge list is empty")
        n = int(lines[0][0])
        graph = nx.Graph()
        graph.add_nodes_from(range(n))
        for u, v in lines[1:]:
            graph.add_edge(int(u), int(v))
        if vertices is None:
            vertices = [(j + 1, (0, 0)) for j in range(n)]
        return cls(vertices, graph)


def _conflict_matrix(
    ens: np.ndarray, files: np.ndarray, subs: np.ndarray, cache: CacheState
) -> np.ndarray:
    """Boolean conflict matrix for vertices given as 0-based index arrays."""
    # has[u, v]: EN of vertex u caches the packet of vertex v
    has = cache.c[ens[:, None], files[None, :], subs[None, :]]
    same_packet = (files[:, None] == files[None, :]) & (subs[:, None] == subs[None, :])
    return ~same_packet & ~(has & has.T)


def _graph_from_matrix(conflict: np.ndarray) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(range(conflict.shape[0]))
    rows, cols = np.nonzero(np.triu(conflict, k=1))
    graph.add_edges_from(zip(rows.tolist(), cols.tolist()))
    return graph


def build_conflict_graph(req: DeliveryRequirement, cache: CacheState) -> ConflictGraph:
    """
    Conflict graph with one vertex per requirement.

    Two packets wanted by the same EN always conflict since an EN never
    caches what it needs.
    """
    entries = req.sorted()
    vertices = [(i, (f, l)) for i, f, l in entries]
    if not entries:
        return ConflictGraph(vertices, nx.Graph())

    arr = np.array(entries, dtype=int) - 1
    conflict = _conflict_matrix(arr[:, 0], arr[:, 1], arr[:, 2], cache)
    return ConflictGraph(vertices, _graph_from_matrix(conflict))


def merge_packets(graph: ConflictGraph) -> Tuple[ConflictGraph, List[List[int]]]:
    """
    Collapse vertices that want the same packet into one vertex.

    The merged vertex conflicts with everything any of its members conflicts
    with. The representative kept in ``vertices`` is the member with the
    smallest EN index.

    Returns:
        The merged graph and, per merged vertex, the original vertex indices
    """
    groups: Dict[Packet, List[int]] = {}
    for j, (_, packet) in enumerate(graph.vertices):
        groups.setdefault(packet, []).append(j)

    members = sorted(groups.values(), key=lambda g: graph.vertices[g[0]])
    owner = {j: m for m, group in enumerate(members) for j in group}

    merged = nx.Graph()
    merged.add_nodes_from(range(len(members)))
    for u, v in graph.graph.edges():
        mu, mv = owner[u], owner[v]
        if mu != mv:
            merged.add_edge(mu, mv)

    vertices = [graph.vertices[group[0]] for group in members]
    return ConflictGraph(vertices, merged), members


def _largest_first_lexicographic(graph: ConflictGraph):
    """networkx strategy: decreasing degree, ties by (EN, file, subfile)."""

    def strategy(G: nx.Graph, colors: Dict[int, int]) -> Iterator[int]:
        return iter(
            sorted(G.nodes(), key=lambda j: (-G.degree(j), graph.vertices[j]))
        )

    return strategy


def greedy_color(graph: ConflictGraph) -> Tuple[Dict[int, int], int]:
    """
    First-fit greedy coloring of the conflict graph.

    Vertices are visited by decreasing conflict degree, ties broken by
    (EN, file, subfile). Each color class is one coded transmission.

    Returns:
        Mapping vertex index -> color (1-based) and the number of colors
    """
    if len(graph) == 0:
        return {}, 0
    raw = nx.coloring.greedy_color(
        graph.graph, strategy=_largest_first_lexicographic(graph)
    )
    coloring = {v: c + 1 for v, c in raw.items()}
    return coloring, max(coloring.values())


def is_proper(graph: ConflictGraph, coloring: Dict[int, int]) -> bool:
    """No edge joins two vertices of the same color."""
    return all(coloring[u] != coloring[v] for u, v in graph.graph.edges())


def is_decodable(
    graph: ConflictGraph, coloring: Dict[int, int], cache: CacheState
) -> bool:
    """
    Every EN in a color class caches all other packets of the class.

    Checked against the caches directly, independently of the edge rule.
    """
    classes: Dict[int, List[int]] = {}
    for v, color in coloring.items():
        classes.setdefault(color, []).append(v)

    for members in classes.values():
        packets = {graph.vertices[v][1] for v in members}
        for v in members:
            en, own = graph.vertices[v]
            for f, l in packets - {own}:
                if not cache.c[en - 1, f - 1, l - 1]:
                    return False
    return True


def expand_coloring(
    coloring: Dict[int, int], members: Sequence[Sequence[int]]
) -> Dict[int, int]:
    """Carry a merged-graph coloring back to the original vertices."""
    return {j: coloring[m] for m, group in enumerate(members) for j in group}


def coded_bits(
    req: DeliveryRequirement, cache: CacheState, subfile_size: float
) -> FronthaulLoad:
    """
    Bits sent with coded multicasting: ``S_B = n_sub * S~``.

    Vertices wanting the same packet are merged before coloring so a single
    transmission serves all of them.
    """
    graph = build_conflict_graph(req, cache)
    merged, _ = merge_packets(graph)
    _, n_sub = greedy_color(merged)
    logger.debug(
        f"Coded multicast: {len(graph)} requirements, {len(merged)} packets, "
        f"{n_sub} transmissions"
    )
    return FronthaulLoad("coded", n_sub * subfile_size, n_sub)


def optimal_color_bruteforce(graph: ConflictGraph) -> int:
    """
    Exact chromatic number by backtracking over color assignments.

    Tries ``k = clique lower bound, ...`` colors in turn; vertices are
    assigned in largest-first order and each vertex may open at most one
    new color, which removes color-permutation symmetry.

    Raises:
        InstanceTooLargeError: Above ``BRUTEFORCE_VERTEX_CAP`` vertices
    """
    n = len(graph)
    if n > BRUTEFORCE_VERTEX_CAP:
        raise InstanceTooLargeError(
            f"brute-force coloring supports at most {BRUTEFORCE_VERTEX_CAP} "
            f"vertices, got {n}"
        )
    if n == 0:
        return 0

    G = graph.graph
    order = sorted(G.nodes(), key=lambda j: -G.degree(j))
    neighbors = {v: set(G.neighbors(v)) for v in order}
    lower = max((len(c) for c in nx.find_cliques(G)), default=1)

    def extend(pos: int, used: int, k: int, colors: Dict[int, int]) -> bool:
        if pos == n:
            return True
        v = order[pos]
        forbidden = {colors[u] for u in neighbors[v] if u in colors}
        for color in range(min(used + 1, k)):
            if color in forbidden:
                continue
            colors[v] = color
            if extend(pos + 1, max(used, color + 1), k, colors):
                return True
            del colors[v]
        return False

    for k in range(lower, n):
        if extend(0, 0, k, {}):
            return k
    return n
