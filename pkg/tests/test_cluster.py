import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfx import cluster
from mfx.cluster import DistanceMatrix
from mfx.errors import DomainError, ParameterError
from mfx.rho import RhoMatrix

from oracles import brute_mst

scipy_hier = pytest.importorskip("scipy.cluster.hierarchy")
from scipy.spatial.distance import squareform  # noqa: E402


def dm(values, labels=None):
    values = np.asarray(values, dtype=float)
    return DistanceMatrix(labels or [f"L{i}" for i in range(len(values))], values)


def random_distances(seed, n):
    pts = np.random.default_rng(seed).standard_normal((n, 3))
    return np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))


def test_distance_values():
    r = RhoMatrix(["a", "b", "c", "d"], 1.0, 20, np.array(
        [[1, 1, 0, -1], [1, 1, 0.5, 0], [0, 0.5, 1, 0], [-1, 0, 0, 1.0]]))
    d = cluster.to_distance(r).values
    assert d[0, 1] == 0 and d[0, 2] == pytest.approx(math.sqrt(2)) and d[0, 3] == pytest.approx(2)
    assert np.all(np.diag(d) == 0)


def test_distance_rejects_out_of_range():
    with pytest.raises(DomainError):
        cluster.to_distance(RhoMatrix(["a", "b"], 1.0, 20, np.array([[1, 1.1], [1.1, 1]])))


@given(st.floats(-1, 1), st.floats(-1, 1))
def test_distance_monotone(a, b):
    da = cluster.to_distance(RhoMatrix(["x", "y"], 1, 20, np.array([[1, a], [a, 1]]))).values[0, 1]
    db = cluster.to_distance(RhoMatrix(["x", "y"], 1, 20, np.array([[1, b], [b, 1]]))).values[0, 1]
    if a < b:
        assert da > db or math.isclose(a, b, abs_tol=1e-15)


def test_two_leaves():
    tree = cluster.agglomerate(dm([[0, 0.5], [0.5, 0]]))
    assert len(tree.merges) == 1 and tree.merges[0].height == 0.5


@pytest.mark.parametrize("linkage", cluster.LINKAGES)
def test_separated_scales(linkage):
    tree = cluster.agglomerate(dm([[0, 0.1, 1], [0.1, 0, 1], [1, 1, 0]]), linkage)
    assert (tree.merges[0].a, tree.merges[0].b, tree.merges[0].height) == (0, 1, 0.1)
    assert tree.merges[1].height == 1.0


@pytest.mark.parametrize("linkage", cluster.LINKAGES)
@pytest.mark.parametrize("seed", range(5))
def test_matches_scipy(linkage, seed):
    D = random_distances(seed, 9)
    ours = cluster.agglomerate(dm(D), linkage)
    ref = scipy_hier.linkage(squareform(D, checks=False), method=linkage)
    np.testing.assert_allclose(ours.heights, ref[:, 2], rtol=1e-12)
    for k in range(1, 10):
        got = sorted(sorted(int(l[1:]) for l in g) for g in cluster.cut(ours, k))
        labels = scipy_hier.fcluster(ref, k, criterion="maxclust")
        exp = sorted(sorted(np.flatnonzero(labels == c).tolist()) for c in np.unique(labels))
        assert got == exp


@pytest.mark.parametrize("seed", range(10))
def test_single_linkage_is_mst(seed):
    D = random_distances(seed, 2 + seed % 9)
    tree = cluster.agglomerate(dm(D), "single")
    assert tree.heights.tolist() == brute_mst(D.tolist())


def test_permutation_invariance():
    D = random_distances(3, 7)
    perm = np.random.default_rng(0).permutation(7)
    for linkage in cluster.LINKAGES:
        a = cluster.agglomerate(dm(D), linkage).heights
        b = cluster.agglomerate(dm(D[np.ix_(perm, perm)]), linkage).heights
        np.testing.assert_allclose(np.sort(a), np.sort(b), rtol=1e-14)


def test_ties_deterministic():
    D = np.ones((4, 4)) - np.eye(4)
    tree = cluster.agglomerate(dm(D), "average")
    assert (tree.merges[0].a, tree.merges[0].b) == (0, 1)


def test_cut_extremes_and_gap():
    D = np.full((6, 6), 2.0)
    D[:3, :3] = D[3:, 3:] = 0.3
    np.fill_diagonal(D, 0)
    tree = cluster.agglomerate(dm(D))
    assert cluster.cut(tree, 1) == [[f"L{i}" for i in range(6)]]
    assert cluster.cut(tree, 6) == [[f"L{i}"] for i in range(6)]
    assert cluster.cut(tree, 2) == [["L0", "L1", "L2"], ["L3", "L4", "L5"]]
    assert cluster.largest_gap_k(tree) == 2
    with pytest.raises(ParameterError):
        cluster.cut(tree, 0)


def test_newick_and_json():
    tree = cluster.agglomerate(dm([[0, 0.2, 1], [0.2, 0, 1], [1, 1, 0]], ["EUR/USD", "a b", "C"]))
    nwk = tree.to_newick()
    assert nwk == "(C:1,(EUR/USD:0.2,'a b':0.2):0.8);"
    assert tree.to_dict()["merges"][0][:2] == [0, 1]


def test_gap_ignores_leaf_level():
    # first merge far above zero must not count as the widest gap
    D = np.full((6, 6), 1.5)
    D[:3, :3] = D[3:, 3:] = 0.95
    D[0, 1] = D[1, 0] = 0.9
    np.fill_diagonal(D, 0)
    assert cluster.largest_gap_k(cluster.agglomerate(dm(D))) == 2
