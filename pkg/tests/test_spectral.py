import math

import numpy as np
import pytest
import scipy.linalg as la
import scipy.sparse as sp
from hypothesis import given, settings

from nlsgraph.graph import standard_graph
from nlsgraph.mesh import build_mesh
from nlsgraph.spectral import eigenpairs, friedlander_bound, lambda2, mesh_eigenpairs, second_eigenpair

from _helpers import graphs

H = 1 / 128


def test_interval_lambda2(interval):
    assert lambda2(interval, H) == pytest.approx(math.pi ** 2, rel=1e-3)


def test_long_interval_scaling():
    assert lambda2(standard_graph("interval", 2.0), H) == pytest.approx(math.pi ** 2 / 4, rel=1e-3)


def test_cycle_lambda2_double(cycle):
    lam, _, mult = second_eigenpair(build_mesh(cycle, H))
    assert lam == pytest.approx(4 * math.pi ** 2, rel=1e-3)
    assert mult == 2


def test_star_lambda2(star3):
    lam, _, mult = second_eigenpair(build_mesh(star3, H))
    assert lam == pytest.approx(math.pi ** 2 / 4, rel=1e-3)
    assert mult == 2  # antisymmetric pairs of edges span a two-dimensional space


def test_ground_state_is_constant(dumbbell):
    res = mesh_eigenpairs(build_mesh(dumbbell, 0.05), k=3)
    assert abs(res.eigenvalues[0]) < 1e-10
    phi = res.eigenvectors[:, 0]
    assert np.ptp(phi) < 1e-8 * np.abs(phi).max()


def test_matches_dense_solver(star3):
    mesh = build_mesh(star3, 0.1)
    res = mesh_eigenpairs(mesh, k=5)
    ref = la.eigh(mesh.K.toarray(), mesh.M.toarray(), eigvals_only=True)[:5]
    np.testing.assert_allclose(res.eigenvalues, ref, rtol=1e-9, atol=1e-10)


def test_m_orthonormal_and_small_residuals(dumbbell):
    mesh = build_mesh(dumbbell, 0.05)
    res = mesh_eigenpairs(mesh, k=4)
    X = res.eigenvectors
    np.testing.assert_allclose(X.T @ (mesh.M @ X), np.eye(4), atol=1e-10)
    assert res.residuals.max() < 1e-8 * max(1.0, res.eigenvalues.max())


def test_seed_determinism(star3):
    mesh = build_mesh(star3, 0.05)
    a = mesh_eigenpairs(mesh, k=4, seed=7)
    b = mesh_eigenpairs(mesh, k=4, seed=7)
    assert a.eigenvalues.tobytes() == b.eigenvalues.tobytes()
    assert a.eigenvectors.tobytes() == b.eigenvectors.tobytes()
    c = mesh_eigenpairs(mesh, k=4, seed=8)
    np.testing.assert_allclose(a.eigenvalues, c.eigenvalues, rtol=1e-9, atol=1e-12)


def test_raw_matrices_without_mesh():
    # combinatorial path Laplacian: eigenvalues 2 - 2 cos(pi j / n)
    n = 200
    main = np.full(n, 2.0)
    main[[0, -1]] = 1.0
    K = sp.diags([main, -np.ones(n - 1), -np.ones(n - 1)], [0, 1, -1]).tocsr()
    res = eigenpairs(K, sp.identity(n, format="csr"), k=4)
    j = np.arange(4)
    np.testing.assert_allclose(res.eigenvalues, 2 - 2 * np.cos(np.pi * j / n), rtol=1e-9, atol=1e-14)
    assert res.iterations > 1
    with pytest.raises(ValueError):
        res.eigenfunction(0)


@settings(max_examples=15)
@given(graphs(max_edges=6))
def test_lambda2_above_friedlander_bound(g):
    assert lambda2(g) >= friedlander_bound(g) - 1e-6
