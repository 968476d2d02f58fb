from itertools import combinations, product
from math import comb

import numpy as np
import pytest
from hypothesis import given, strategies as st

from xxzdroplet import config_space as cs
from xxzdroplet.exceptions import CapacityError, ParameterError


def test_small_enumerations():
    s = cs.enumerate_configs(2, 1)
    assert [s.config(i) for i in range(s.dim)] == [(-1, 0), (-1, 1), (0, 1)]
    assert cs.enumerate_configs(1, 2).dim == 5
    assert cs.enumerate_configs(3, 30).dim == comb(61, 3) == 35990


def test_enumeration_errors():
    with pytest.raises(ParameterError):
        cs.enumerate_configs(0, 2)
    with pytest.raises(ParameterError):
        cs.enumerate_configs(6, 2)
    with pytest.raises(CapacityError):
        cs.enumerate_configs(5, 60)


@given(st.integers(1, 5), st.integers(0, 6))
def test_enumeration_is_sorted_complete_and_ranked(N, L):
    if N > 2 * L + 1:
        return
    s = cs.enumerate_configs(N, L)
    expected = list(combinations(range(-L, L + 1), N))
    assert [tuple(r) for r in s.configs] == expected
    assert np.array_equal(s.rank(s.configs), np.arange(s.dim))
    for i in range(0, s.dim, max(1, s.dim // 7)):
        assert s.index(s.config(i)) == i


def test_index_rejects_invalid():
    s = cs.enumerate_configs(2, 3)
    for bad in [(1, 1), (2, 1), (0, 4), (0,)]:
        with pytest.raises(ParameterError):
            s.index(bad)


@pytest.mark.parametrize("x, w", [((1, 2, 3), 1), ((1, 2, 5), 2), ((0, 2, 4, 6), 4), ((3,), 1)])
def test_cluster_count(x, w):
    assert cs.cluster_count(x) == w
    assert cs.cluster_counts(np.array([x]))[0] == w


def test_neighbors_examples():
    assert set(cs.neighbors((1, 2, 5))) == {(0, 2, 5), (1, 3, 5), (1, 2, 4), (1, 2, 6)}
    assert len(cs.neighbors((4, 5, 6, 7))) == 2
    assert cs.neighbors((-3, -2), L=3) == [(-3, -1)]


def _brute_neighbors(x, span):
    N = len(x)
    return {
        y for y in combinations(range(-span - 1, span + 2), N)
        if sum(abs(a - b) for a, b in zip(x, y)) == 1
    }


def test_degree_law_brute_force():
    # unbounded volume: the degree equals twice the cluster count
    for N in range(1, 5):
        for x in combinations(range(-6, 7), N):
            nb = cs.neighbors(x)
            assert len(nb) == 2 * cs.cluster_count(x)
            if N <= 2:
                assert set(nb) == _brute_neighbors(x, 6)


@given(st.integers(1, 4), st.integers(1, 5))
def test_hopping_pairs_match_neighbors(N, L):
    if N > 2 * L + 1:
        return
    s = cs.enumerate_configs(N, L)
    i, j = cs.hopping_pairs(s)
    edges = {(min(a, b), max(a, b)) for a, b in zip(i, j)}
    assert len(edges) == i.size
    brute = set()
    for a in range(s.dim):
        for y in cs.neighbors(s.config(a), L):
            b = s.index(y)
            brute.add((min(a, b), max(a, b)))
    assert edges == brute


def test_distances():
    assert cs.distance((0, 1), (0, 1)) == 0 == cs.distance((0, 1), (0, 1), "inf")
    assert cs.distance((0, 1), (2, 3)) == 4
    assert cs.distance((0, 1), (2, 3), "inf") == 2
    assert cs.set_distance([], [(0, 1)]) == float("inf")
    assert cs.set_distance([(0, 1), (5, 6)], [(2, 3), (6, 8)]) == 3
    assert cs.set_distance([(0, 1)], [(2, 5)], "inf") == 4
    with pytest.raises(ParameterError):
        cs.distance((0, 1), (0, 1, 2))
    with pytest.raises(ParameterError):
        cs.distance((0,), (1,), "two")


@given(st.lists(st.integers(-5, 5), min_size=2, max_size=2, unique=True),
       st.lists(st.integers(-5, 5), min_size=2, max_size=2, unique=True))
def test_distance_is_a_metric_bound(a, b):
    x, y = tuple(sorted(a)), tuple(sorted(b))
    one, inf = cs.distance(x, y), cs.distance(x, y, "inf")
    assert inf <= one <= len(x) * inf
    assert cs.distance(y, x) == one


def test_support_sets():
    s1 = cs.enumerate_configs(1, 3)
    assert [s1.config(k) for k in cs.support_set({2}, s1)] == [(2,)]
    s2 = cs.enumerate_configs(2, 1)
    assert [s2.config(k) for k in cs.support_set({0}, s2)] == [(-1, 0), (0, 1)]


def test_edge_stratum():
    for N, L in [(1, 3), (2, 4), (3, 4), (4, 5)]:
        s = cs.enumerate_configs(N, L)
        edge = cs.edge_configs(s)
        assert edge.size == 2 * L + 2 - N
        assert all(s.config(k) == cs.edge_config(s.config(k)[0], N) for k in edge)
        for k in range(1, N + 1):
            mem, bulk = cs.edge_stratum(s, k)
            w = cs.cluster_counts(s.configs)
            assert np.array_equal(np.sort(np.concatenate([mem, bulk])), np.arange(s.dim))
            assert np.all(w[mem] <= k) and np.all(w[bulk] > k)


def test_box_edge_identity():
    L = 14
    for N in range(1, 5):
        s = cs.enumerate_configs(N, L)
        for M in range(0, 7):
            x1 = -1
            box = cs.make_box(s, x1, M)
            assert list(box.window) == list(range(x1 - M, x1 + M + 1))
            firsts = sorted(s.configs[box.lambda_set, 0])
            assert firsts == list(range(x1 - M, x1 + M + 1))
            brute = [k for k in range(s.dim) if set(s.config(k)) & set(box.window)]
            assert list(box.support) == brute
            # packed part of the support starts in [x1 - (M + N - 1), x1 + M]
            edge_firsts = sorted(s.configs[box.support_edge(), 0])
            assert edge_firsts == list(range(x1 - (M + N - 1), x1 + M + 1))


def test_box_separation_in_inf_distance():
    L = 24
    for N in (1, 2, 3):
        s = cs.enumerate_configs(N, L)
        for (i, j, M) in product([-12, -9], [4, 8, 11], [1, 2, 3]):
            gap = abs(i - j) - 2 * M - N + 1
            if gap <= 0:
                continue
            a = s.configs[cs.make_box(s, i, M).support_edge()]
            b = s.configs[cs.make_box(s, j, M).support_edge()]
            assert cs.set_distance(a, b, "inf") == gap


def test_box_rejects_negative_width():
    with pytest.raises(ParameterError):
        cs.make_box(cs.enumerate_configs(1, 2), 0, -1)
