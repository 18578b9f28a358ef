import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from thermistor.errors import AssemblyError, ConstraintError, SolverDivergenceError
from thermistor.fem import (SparseSystem, apply_dirichlet, assemble_boundary_load, assemble_boundary_mass,
                            assemble_load, assemble_mass, assemble_weighted_stiffness, solve_sparse)
from thermistor.mesh import DIRICHLET, build_rect_mesh


def dense_reference(mesh, weight):
    """Loop-based assembly from first principles (coordinates, not cached gradients)."""
    n = mesh.n_nodes
    K = np.zeros((n, n))
    M = np.zeros((n, n))
    for t, tri in enumerate(mesh.triangles):
        P = mesh.nodes[tri]
        T = np.array([[1, *P[0]], [1, *P[1]], [1, *P[2]]])
        coef = np.linalg.inv(T)  # columns: barycentric l_i = a + b x + c y
        grads = coef[1:, :].T
        area = 0.5 * abs(np.linalg.det(T))
        for a in range(3):
            for b in range(3):
                K[tri[a], tri[b]] += weight[t] * area * grads[a] @ grads[b]
                M[tri[a], tri[b]] += area * (2.0 if a == b else 1.0) / 12.0
    return K, M


def test_matches_dense_reference():
    mesh = build_rect_mesh(3, 2, 1.5, 1.0)
    rng = np.random.default_rng(0)
    w = rng.uniform(0.5, 2.0, mesh.n_triangles)
    K, M = dense_reference(mesh, w)
    np.testing.assert_allclose(assemble_weighted_stiffness(mesh, w).toarray(), K, atol=1e-13)
    np.testing.assert_allclose(assemble_mass(mesh).toarray(), M, atol=1e-15)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.floats(0.2, 3), st.floats(0.2, 3))
def test_matrix_identities(nx, ny, lx, ly):
    mesh = build_rect_mesh(nx, ny, lx, ly)
    A = assemble_weighted_stiffness(mesh, 1.0)
    M = assemble_mass(mesh)
    one = np.ones(mesh.n_nodes)
    assert np.max(np.abs(A @ one)) <= 1e-12 * max(1.0, abs(A).max())
    assert abs((A - A.T)).max() <= 1e-14
    assert one @ M @ one == pytest.approx(lx * ly, rel=1e-12)
    assert assemble_mass(mesh, lumped=True).diagonal().sum() == pytest.approx(lx * ly, rel=1e-12)
    B = assemble_boundary_mass(mesh)
    assert one @ B @ one == pytest.approx(2 * (lx + ly), rel=1e-12)
    np.testing.assert_allclose(B @ one, assemble_boundary_load(mesh), atol=1e-14)
    # energy of a linear field: int |grad (ax + by)|^2 = (a^2 + b^2) |Omega|
    f = 2.0 * mesh.nodes[:, 0] - 0.5 * mesh.nodes[:, 1]
    assert f @ A @ f == pytest.approx(4.25 * lx * ly, rel=1e-12)


def test_boundary_mass_by_tag():
    mesh = build_rect_mesh(4, 4, dirichlet_sides=("left",))
    one = np.ones(mesh.n_nodes)
    assert one @ assemble_boundary_mass(mesh, tag=DIRICHLET) @ one == pytest.approx(1.0)
    assert assemble_boundary_mass(mesh, lumped=True).diagonal().sum() == pytest.approx(4.0)


def test_load_of_constant_source():
    mesh = build_rect_mesh(5, 3, 2.0, 1.0)
    b = assemble_load(mesh, 3.0)
    assert b.sum() == pytest.approx(6.0)
    np.testing.assert_allclose(b, assemble_mass(mesh) @ np.full(mesh.n_nodes, 3.0), atol=1e-14)


def test_negative_weight_rejected():
    mesh = build_rect_mesh(2, 2)
    with pytest.raises(AssemblyError):
        assemble_weighted_stiffness(mesh, -1.0)
    with pytest.raises(AssemblyError):
        assemble_weighted_stiffness(mesh, np.nan)


def test_dirichlet_solve_reproduces_linear_field():
    mesh = build_rect_mesh(6, 4, 3.0, 2.0)
    A = assemble_weighted_stiffness(mesh, 1.0)
    nodes = mesh.dirichlet_nodes
    exact = 1.0 + 0.5 * mesh.nodes[:, 0]
    sys = apply_dirichlet(SparseSystem(A, np.zeros(mesh.n_nodes)), (nodes, exact[nodes]), mesh)
    assert abs(sys.matrix - sys.matrix.T).max() == 0
    x = solve_sparse(sys)
    assert np.max(np.abs(x - exact)) <= 1e-12
    np.testing.assert_array_equal(x[nodes], exact[nodes])


def test_dirichlet_dict_and_off_boundary_error():
    mesh = build_rect_mesh(2, 2)
    A = assemble_weighted_stiffness(mesh, 1.0)
    sys = apply_dirichlet(SparseSystem(A, np.zeros(9)), {0: 1.0, 3: 1.0, 6: 1.0, 2: 0.0, 5: 0.0, 8: 0.0})
    assert solve_sparse(sys)[4] == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(ConstraintError):
        apply_dirichlet(SparseSystem(A, np.zeros(9)), {4: 1.0}, mesh)


def test_cg_against_dense_solve():
    mesh = build_rect_mesh(7, 5)
    rng = np.random.default_rng(1)
    A = assemble_weighted_stiffness(mesh, rng.uniform(0.1, 10, mesh.n_triangles)) + assemble_mass(mesh)
    b = rng.normal(size=mesh.n_nodes)
    x = solve_sparse(SparseSystem(A.tocsr(), b), rtol=1e-13)
    np.testing.assert_allclose(x, np.linalg.solve(A.toarray(), b), rtol=1e-10, atol=1e-12)
    assert np.all(solve_sparse(SparseSystem(A.tocsr(), np.zeros(mesh.n_nodes))) == 0)


def test_cg_divergence_reported():
    A = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(SolverDivergenceError):
        solve_sparse(SparseSystem(A, np.array([1.0, 0.0])))
    spd = sp.csr_matrix(np.diag(np.logspace(0, 8, 50)) + 0.0)
    with pytest.raises(SolverDivergenceError) as info:
        solve_sparse(SparseSystem(spd + sp.eye(50, k=1) * 0.4 + sp.eye(50, k=-1) * 0.4, np.ones(50)),
                     rtol=1e-15, max_iter=2)
    assert info.value.iterations == 2
