"""Tests for fronthaul requirements, bit-loads and conflict-graph coloring."""

import itertools

import networkx as nx
import numpy as np
import pytest

from cache_placement import from_array, populate_caches
from config import SystemConfig
from errors import InstanceTooLargeError, ParameterError
from fran_model import Demand, sample_demand, serving_sets, zipf_pmf
from fronthaul import (
    BRUTEFORCE_VERTEX_CAP,
    ConflictGraph,
    build_conflict_graph,
    coded_bits,
    compute_requirements,
    expand_coloring,
    greedy_color,
    is_decodable,
    is_proper,
    merge_packets,
    multicast_bits,
    optimal_color_bruteforce,
    unicast_bits,
)

A, B = 1, 2


def make_cache(N, F, L, entries, subfile_size=1.0):
    """Cache state from a list of cached (EN, file, subfile) triples."""
    c = np.zeros((N, F, L), dtype=bool)
    for i, f, l in entries:
        c[i - 1, f - 1, l - 1] = True
    return from_array(c, subfile_size)


@pytest.fixture
def instance_w():
    """Two ENs serving two UEs, each EN missing two of the four packets."""
    cache = make_cache(2, 2, 2, [(1, A, 1), (1, B, 2), (2, A, 2), (2, B, 1)])
    demand = Demand.from_files([A, B])
    req = compute_requirements(cache, demand, serving_sets(2, 2))
    return cache, req


def random_instance(rng, N, L, mu, M, F=5):
    cfg = SystemConfig(N=N, M=M, L=L, F=F, mu=mu, S=float(L))
    cache = populate_caches(rng, cfg)
    demand = sample_demand(rng, zipf_pmf(F, 0.2), N)
    return cfg, cache, compute_requirements(cache, demand, serving_sets(M, N))


def graph_from_edges(n, edges):
    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    graph.add_edges_from(edges)
    return ConflictGraph([(j + 1, (1, j + 1)) for j in range(n)], graph)


class TestRequirements:
    """Test compute_requirements and the uncoded bit-loads."""

    def test_two_en_example(self):
        """Test requirements and unicast load for two ENs."""
        cache = make_cache(2, 1, 2, [(1, 1, 1), (2, 1, 2)])
        demand = Demand.from_files([1, 1])
        req = compute_requirements(cache, demand, [(1, 2), (1, 2)])

        assert req.d == frozenset({(1, 1, 2), (2, 1, 1)})
        assert unicast_bits(req, 3.0).S_B == 6.0

    def test_shared_file_is_not_duplicated(self):
        """Test that a file wanted twice at one EN is needed once."""
        cache = make_cache(1, 1, 1, [])
        req = compute_requirements(cache, Demand.from_files([1, 1]), [(1,), (1,)])

        assert req.d == frozenset({(1, 1, 1)})
        assert len(req) == 1

    def test_full_caching_needs_nothing(self):
        """Test that full caching needs no fronthaul bits."""
        rng = np.random.default_rng(0)
        _, cache, req = random_instance(rng, N=4, L=6, mu=1.0, M=2)

        assert len(req) == 0
        assert unicast_bits(req, 1.0).S_B == 0
        assert multicast_bits(req, 1.0).S_B == 0
        assert coded_bits(req, cache, 1.0).S_B == 0

    def test_membership_invariant(self):
        """Test that every requirement is requested and uncached."""
        rng = np.random.default_rng(7)
        for _ in range(20):
            _, cache, req = random_instance(rng, N=4, L=5, mu=0.4, M=2)
            for i, f, l in req.d:
                assert f in req.demand.requested
                assert not cache.cached(i, f, l)
                assert any(
                    i in ens and req.demand.file_of(k) == f
                    for k, ens in enumerate(req.serving, start=1)
                )

    def test_instance_w_loads(self, instance_w):
        """Test the three loads of the two-EN example."""
        cache, req = instance_w

        assert unicast_bits(req, 1.0).S_B == 4
        assert multicast_bits(req, 1.0).S_B == 4
        load = coded_bits(req, cache, 1.0)
        assert load.S_B == 2
        assert load.n_sub == 2
        assert load.strategy == "coded"

    def test_multicast_collapses_shared_packets(self):
        """Test that multicast sends a shared packet once."""
        cache = make_cache(2, 1, 1, [])
        req = compute_requirements(cache, Demand.from_files([1, 1]), [(1,), (2,)])

        assert unicast_bits(req, 1.0).S_B == 2
        assert multicast_bits(req, 1.0).S_B == 1

    def test_serving_set_count_mismatch(self):
        """Test that a wrong serving set count raises ParameterError."""
        cache = make_cache(2, 1, 1, [])
        with pytest.raises(ParameterError):
            compute_requirements(cache, Demand.from_files([1, 1]), [(1,)])


class TestConflictGraph:
    """Test the conflict graph of instance W and its edge rule."""

    def test_instance_w_vertices(self, instance_w):
        """Test the vertex order of the two-EN example."""
        cache, req = instance_w
        graph = build_conflict_graph(req, cache)

        assert graph.vertices == [(1, (A, 2)), (1, (B, 1)), (2, (A, 1)), (2, (B, 2))]

    def test_instance_w_edges(self, instance_w):
        """Test the edges of the two-EN example."""
        cache, req = instance_w
        graph = build_conflict_graph(req, cache)

        # Only wants at the same EN conflict: every cross-EN pair decodes
        assert graph.edges() == [(0, 1), (2, 3)]
        assert not graph.adjacent(0, 2)
        assert not graph.adjacent(1, 3)

    def test_edge_rule_on_random_instances(self):
        """Test the edge rule on random instances."""
        rng = np.random.default_rng(3)
        for _ in range(30):
            _, cache, req = random_instance(rng, N=3, L=4, mu=0.5, M=2)
            graph = build_conflict_graph(req, cache)
            for u, v in itertools.combinations(range(len(graph)), 2):
                (i1, p1), (i2, p2) = graph.vertices[u], graph.vertices[v]
                decodable = cache.cached(i1, *p2) and cache.cached(i2, *p1)
                conflict = p1 != p2 and not decodable
                assert graph.adjacent(u, v) == conflict

    def test_empty_requirement(self):
        """Test the empty graph and its empty coloring."""
        rng = np.random.default_rng(0)
        _, cache, req = random_instance(rng, N=2, L=3, mu=1.0, M=1)
        graph = build_conflict_graph(req, cache)

        assert len(graph) == 0
        assert greedy_color(graph) == ({}, 0)

    def test_no_side_information_is_complete(self):
        """Test that without caches the merged graph is complete."""
        rng = np.random.default_rng(1)
        _, cache, req = random_instance(rng, N=3, L=3, mu=0.0, M=2)
        merged, _ = merge_packets(build_conflict_graph(req, cache))
        n = len(merged)

        assert merged.graph.number_of_edges() == n * (n - 1) // 2

    def test_dump_round_trip(self, instance_w):
        """Test the edge-list dump and its reload."""
        cache, req = instance_w
        graph = build_conflict_graph(req, cache)
        text = graph.dump()

        assert text == "4\n0 1\n2 3\n"
        restored = ConflictGraph.from_edge_list(text, graph.vertices)
        assert restored.edges() == graph.edges()


class TestMergePackets:
    def test_identical_packets_share_a_vertex(self):
        """Test that requirements for the same packet merge."""
        cache = make_cache(2, 2, 1, [])
        req = compute_requirements(cache, Demand.from_files([1, 2]), [(1, 2), (1, 2)])
        graph = build_conflict_graph(req, cache)
        merged, members = merge_packets(graph)

        assert len(graph) == 4
        assert len(merged) == 2
        assert sorted(len(group) for group in members) == [2, 2]
        assert merged.edges() == [(0, 1)]

    def test_expand_coloring_covers_all_vertices(self):
        """Test that expanded colorings stay proper and decodable."""
        cache = make_cache(2, 2, 1, [])
        req = compute_requirements(cache, Demand.from_files([1, 2]), [(1, 2), (1, 2)])
        graph = build_conflict_graph(req, cache)
        merged, members = merge_packets(graph)
        coloring, _ = greedy_color(merged)
        full = expand_coloring(coloring, members)

        assert set(full) == set(range(len(graph)))
        assert is_proper(graph, full)
        assert is_decodable(graph, full, cache)


class TestGreedyColor:
    """Test greedy_color and the brute-force oracle."""

    def test_instance_w_coloring(self, instance_w):
        """Test the coloring of the two-EN example."""
        cache, req = instance_w
        graph = build_conflict_graph(req, cache)
        coloring, n_sub = greedy_color(graph)

        assert coloring == {0: 1, 1: 2, 2: 1, 3: 2}
        assert n_sub == 2
        assert is_decodable(graph, coloring, cache)
        assert optimal_color_bruteforce(graph) == 2

    def test_compatible_vertices_share_one_color(self):
        """Test that an edgeless graph needs one color."""
        coloring, n_sub = greedy_color(graph_from_edges(5, []))
        assert n_sub == 1
        assert set(coloring.values()) == {1}

    def test_largest_degree_colored_first(self):
        """Test that the highest degree vertex is colored first."""
        # Star centred at vertex 4: the centre takes color 1
        star = graph_from_edges(5, [(4, j) for j in range(4)])
        coloring, n_sub = greedy_color(star)
        assert coloring[4] == 1
        assert n_sub == 2

    def test_no_side_information_matches_multicast(self):
        """Test that coding gains nothing without caches."""
        rng = np.random.default_rng(9)
        for _ in range(20):
            cfg, cache, req = random_instance(rng, N=4, L=4, mu=0.0, M=2)
            coded = coded_bits(req, cache, cfg.subfile_size)
            multicast = multicast_bits(req, cfg.subfile_size)
            assert coded.S_B == multicast.S_B

    def test_random_colorings_are_proper_and_decodable(self):
        """Test greedy colorings against the exact optimum."""
        rng = np.random.default_rng(21)
        checked = 0
        for _ in range(200):
            N = int(rng.integers(2, 4))
            L = int(rng.integers(2, 5))
            mu = float(rng.choice([0.25, 0.5, 0.75]))
            _, cache, req = random_instance(rng, N=N, L=L, mu=mu, M=N, F=3)
            merged, members = merge_packets(build_conflict_graph(req, cache))
            coloring, n_sub = greedy_color(merged)
            full = expand_coloring(coloring, members)
            graph = build_conflict_graph(req, cache)

            assert is_proper(merged, coloring)
            assert is_proper(graph, full)
            assert is_decodable(graph, full, cache)
            assert n_sub <= len(req.packets())

            if 0 < len(merged) <= 10:
                optimum = optimal_color_bruteforce(merged)
                assert optimum <= n_sub <= 1.5 * optimum
                checked += 1
        assert checked > 50


class TestBruteforce:
    def test_triangle(self):
        """Test that a triangle needs three colors."""
        triangle = graph_from_edges(3, [(0, 1), (1, 2), (0, 2)])
        assert optimal_color_bruteforce(triangle) == 3

    def test_empty_graph(self):
        """Test graphs without edges."""
        assert optimal_color_bruteforce(graph_from_edges(4, [])) == 1
        assert optimal_color_bruteforce(graph_from_edges(0, [])) == 0

    def test_odd_cycle(self):
        """Test that a five-cycle needs three colors."""
        edges = [(j, (j + 1) % 5) for j in range(5)]
        assert optimal_color_bruteforce(graph_from_edges(5, edges)) == 3

    def test_matches_networkx_on_small_graphs(self):
        """Test the exact optimum between clique size and greedy."""
        rng = np.random.default_rng(13)
        for _ in range(30):
            n = int(rng.integers(1, 9))
            edges = [
                (u, v)
                for u, v in itertools.combinations(range(n), 2)
                if rng.random() < 0.4
            ]
            graph = graph_from_edges(n, edges)
            optimum = optimal_color_bruteforce(graph)
            _, n_sub = greedy_color(graph)
            assert optimum <= n_sub
            assert optimum >= max(len(c) for c in nx.find_cliques(graph.graph))

    def test_cap(self):
        """Test that graphs above the cap are refused."""
        with pytest.raises(InstanceTooLargeError):
            optimal_color_bruteforce(graph_from_edges(BRUTEFORCE_VERTEX_CAP + 1, []))


class TestStrategyOrdering:
    """Coded never needs more bits than multicast, multicast never more than unicast."""

    def test_ordering_on_random_realizations(self):
        """Test coded <= multicast <= unicast on random realizations."""
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            N = int(rng.choice([2, 3, 4]))
            L = int(rng.integers(2, 21))
            mu = float(rng.choice([0.0, 0.25, 0.5, 0.75, 1.0]))
            M = int(rng.choice([1, 2, N]))
            cfg, cache, req = random_instance(rng, N=N, L=L, mu=mu, M=M)

            unicast = unicast_bits(req, cfg.subfile_size).S_B
            multicast = multicast_bits(req, cfg.subfile_size).S_B
            coded = coded_bits(req, cache, cfg.subfile_size).S_B
            assert coded <= multicast <= unicast
            if mu == 0.0:
                assert coded == multicast
            if mu == 1.0:
                assert unicast == 0
