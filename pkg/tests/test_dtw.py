import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gamefusion import _dtw_py, dtw as dtw_mod
from gamefusion.dtw import aligned_mean, check_path, dtw, dtw_distance, dtw_oracle, path_cost

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
seq = st.lists(finite, min_size=1, max_size=6)


def enumerate_paths(m, n):
    """Every monotone, continuous path from (0, 0) to (m-1, n-1), built from its step sequence."""
    steps = ((1, 0), (0, 1), (1, 1))
    out = []

    def walk(path):
        i, j = path[-1]
        if (i, j) == (m - 1, n - 1):
            out.append(list(path))
            return
        for di, dj in steps:
            if i + di < m and j + dj < n:
                path.append((i + di, j + dj))
                walk(path)
                path.pop()

    walk([(0, 0)])
    return out


def brute_force(x, y):
    return min(sum((x[i] - y[j]) ** 2 for i, j in p) for p in enumerate_paths(len(x), len(y)))


def test_path_counts_are_delannoy_numbers():
    # D(m-1, n-1): 1, 3, 13, 63
    assert [len(enumerate_paths(k, k)) for k in range(1, 5)] == [1, 3, 13, 63]


def test_against_enumeration_1000_pairs(rng):
    for _ in range(1000):
        x = rng.normal(size=rng.integers(1, 7))
        y = rng.normal(size=rng.integers(1, 7))
        assert abs(dtw_distance(x, y) - brute_force(x, y)) <= 1e-12


def test_library_oracle_matches_brute_force(rng):
    for _ in range(100):
        x = rng.normal(size=rng.integers(1, 7))
        y = rng.normal(size=rng.integers(1, 7))
        assert dtw_oracle(x, y) == pytest.approx(brute_force(x, y), abs=1e-12)


def test_oracle_size_limit():
    with pytest.raises(ValueError, match="m\\*n"):
        dtw_oracle(np.zeros(9), np.zeros(8))


@given(seq, seq)
@settings(max_examples=200, deadline=None)
def test_path_is_valid_and_attains_distance(x, y):
    r = dtw(x, y)
    check_path(r.path, len(x), len(y))
    assert path_cost(x, y, r.path) == pytest.approx(r.distance, rel=1e-12, abs=1e-12)


@given(seq, seq)
@settings(max_examples=200, deadline=None)
def test_symmetric_and_nonnegative(x, y):
    d = dtw_distance(x, y)
    assert d >= 0
    assert dtw_distance(y, x) == pytest.approx(d, rel=1e-12, abs=1e-12)


@given(seq)
@settings(max_examples=100, deadline=None)
def test_self_distance_zero_with_diagonal_path(x):
    r = dtw(x, x)
    assert r.distance == 0.0
    assert r.pairs == [(i, i) for i in range(len(x))]


def test_worked_example():
    # cost grid for x=(0,1,2), y=(0,2): best path (0,0),(1,0)or(1,1),(2,1) costs 1
    r = dtw([0.0, 1.0, 2.0], [0.0, 2.0])
    assert r.distance == 1.0
    check_path(r.path, 3, 2)


def test_tie_breaking_prefers_diagonal():
    # all costs zero: diagonal first, then vertical
    assert dtw(np.zeros(3), np.zeros(3)).pairs == [(0, 0), (1, 1), (2, 2)]
    assert dtw(np.zeros(3), np.zeros(2)).pairs == [(0, 0), (1, 0), (2, 1)]


def test_length_one_against_sequence():
    r = dtw([1.0], [1.0, 2.0, 4.0])
    assert r.distance == 0 + 1 + 9
    assert r.pairs == [(0, 0), (0, 1), (0, 2)]


@pytest.mark.parametrize("bad", [[], [np.nan], [np.inf, 1.0]])
def test_rejects_bad_input(bad):
    with pytest.raises(ValueError):
        dtw(bad, [1.0])


@pytest.mark.parametrize("path,msg", [
    ([(0, 0), (1, 1)], "ends"),
    ([(0, 1), (2, 2)], "starts"),
    ([(0, 0), (2, 1), (2, 2)], "discontinuous"),
    ([(0, 0), (1, 1), (1, 0), (2, 2)], "non-monotone"),
    ([(0, 0), (0, 0), (2, 2)], "discontinuous"),
])
def test_check_path_rejects(path, msg):
    with pytest.raises(ValueError, match=msg):
        check_path(path, 3, 3)


def test_aligned_mean_averages_many_to_one():
    # x has one point: every y value aligns to it
    d, a = aligned_mean([0.0], [1.0, 2.0, 6.0])
    assert a.tolist() == [3.0]
    assert d == 1 + 4 + 36


@given(seq, seq)
@settings(max_examples=100, deadline=None)
def test_aligned_mean_from_path(x, y):
    d, a = aligned_mean(x, y)
    r = dtw(x, y)
    expect = [np.mean([y[j] for i, j in r.pairs if i == k]) for k in range(len(x))]
    assert d == r.distance
    np.testing.assert_allclose(a, expect, rtol=1e-12, atol=1e-12)


def test_enumeration_agrees_with_exhaustive_product():
    # independent count: paths as subsets of steps, checked by itertools
    m = n = 3
    cells = [(i, j) for i in range(m) for j in range(n)]
    count = 0
    for k in range(3, 6):
        for combo in itertools.combinations(cells, k):
            p = sorted(combo)
            try:
                check_path(p, m, n)
                count += 1
            except ValueError:
                pass
    assert count == len(enumerate_paths(m, n)) == 13


def test_backend_flag():
    assert dtw_mod.BACKEND in ("cython", "python")


@pytest.mark.skipif(dtw_mod.BACKEND != "cython", reason="extension not built")
def test_compiled_matches_fallback(rng):
    from gamefusion import _dtw_ext

    for _ in range(200):
        x = rng.normal(size=rng.integers(1, 30))
        y = rng.normal(size=rng.integers(1, 30))
        d1, p1 = _dtw_ext.dtw_path(x, y)
        d2, p2 = _dtw_py.dtw_path(x, y)
        assert d1 == d2
        np.testing.assert_array_equal(p1, p2)
        np.testing.assert_array_equal(_dtw_ext.accumulated_cost(x, y), _dtw_py.accumulated_cost(x, y))
    feats = [rng.normal(size=rng.integers(1, 12)) for _ in range(5)]
    flat = np.concatenate(feats)
    offsets = np.concatenate([[0], np.cumsum([len(f) for f in feats])])
    A1, b1 = _dtw_ext.cross_features_flat(flat, offsets, -1.0)
    A2, b2 = _dtw_py.cross_features_flat(flat, offsets, -1.0)
    np.testing.assert_array_equal(A1, A2)
    np.testing.assert_array_equal(b1, b2)
