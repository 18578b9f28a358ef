import numpy as np
import pytest

from thermistor.constitutive import ConstitutiveSpec, Profile
from thermistor.errors import NonconvergenceError
from thermistor.estimates import w1p_seminorm
from thermistor.mesh import build_rect_mesh
from thermistor.potential import discrete_residual, energy, harmonic_lift, solve_potential

SIGMA_QUAD = Profile("poly", (-2.0, 2.0, 1.0, 0.0, 1.0))  # 1 + u^2


def left_right(mesh, V=1.0):
    x = mesh.nodes[mesh.dirichlet_nodes, 0]
    return np.where(np.isclose(x, mesh.lx), V, 0.0)


def checkerboard(mesh):
    x, y = mesh.nodes.T
    return np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.0])
def test_linear_potential_exact(p):
    mesh = build_rect_mesh(6, 5, 2.0, 1.0)
    spec = ConstitutiveSpec(p=p, delta=0.3, sigma0=Profile("constant", (2.5,)))
    phi, rep = solve_potential(mesh, np.zeros(mesh.n_nodes), left_right(mesh, 3.0), spec)
    assert np.max(np.abs(phi - 1.5 * mesh.nodes[:, 0])) <= 1e-10
    assert rep.converged and rep.iterations <= 2
    assert discrete_residual(mesh, 1.5 * mesh.nodes[:, 0], np.zeros(mesh.n_nodes), spec) <= 1e-12


def test_constant_data_everywhere():
    mesh = build_rect_mesh(5, 5, dirichlet_sides=("left", "right", "top", "bottom"))
    spec = ConstitutiveSpec(p=3.0, delta=0.1, sigma0=SIGMA_QUAD)
    phi, _ = solve_potential(mesh, checkerboard(mesh), np.full(mesh.dirichlet_nodes.size, 0.7), spec)
    np.testing.assert_allclose(phi, 0.7, atol=1e-12)


def test_discrete_maximum_principle():
    mesh = build_rect_mesh(10, 10, dirichlet_sides=("left", "right", "top"))
    x, y = mesh.nodes[mesh.dirichlet_nodes].T
    vals = np.sin(3 * x) + y ** 2
    spec = ConstitutiveSpec(p=2.0, sigma0=Profile("saturating", (0.5, 2.0)))
    phi, _ = solve_potential(mesh, checkerboard(mesh), vals, spec)
    assert phi.min() >= vals.min() - 1e-12 and phi.max() <= vals.max() + 1e-12


@pytest.mark.parametrize("p,delta", [(1.5, 0.5), (3.0, 0.1), (4.0, 0.0)])
def test_converged_solution_properties(p, delta):
    mesh = build_rect_mesh(12, 12)
    u = checkerboard(mesh)
    spec = ConstitutiveSpec(p=p, delta=delta, sigma0=SIGMA_QUAD)
    phi, rep = solve_potential(mesh, u, left_right(mesh), spec)
    assert rep.converged
    assert rep.residual_norm <= 1e-8
    assert discrete_residual(mesh, phi, u, spec) == pytest.approx(rep.residual_norm)
    assert np.all(np.diff(rep.energies) <= 1e-12)
    assert rep.energies[-1] == pytest.approx(energy(mesh, phi, u, spec))


def test_residual_grows_with_perturbation():
    mesh = build_rect_mesh(10, 10)
    u = checkerboard(mesh)
    spec = ConstitutiveSpec(p=3.0, delta=0.1, sigma0=SIGMA_QUAD)
    phi, _ = solve_potential(mesh, u, left_right(mesh), spec, kacanov_rtol=1e-11)
    rng = np.random.default_rng(5)
    direction = rng.normal(size=mesh.n_nodes)
    direction[mesh.dirichlet_nodes] = 0
    res = [discrete_residual(mesh, phi + t * direction, u, spec) for t in (1e-6, 1e-5, 1e-4, 1e-3, 1e-2)]
    assert all(b > a for a, b in zip(res, res[1:]))


def test_energy_is_minimised():
    # the converged solution minimises E among fields with the same boundary data
    mesh = build_rect_mesh(8, 8)
    u = checkerboard(mesh)
    spec = ConstitutiveSpec(p=3.0, delta=0.1, sigma0=SIGMA_QUAD)
    phi, _ = solve_potential(mesh, u, left_right(mesh), spec, kacanov_rtol=1e-11)
    rng = np.random.default_rng(2)
    E = energy(mesh, phi, u, spec)
    for _ in range(20):
        d = rng.normal(size=mesh.n_nodes) * 1e-3
        d[mesh.dirichlet_nodes] = 0
        assert energy(mesh, phi + d, u, spec) > E


def test_uniqueness_surrogate():
    mesh = build_rect_mesh(12, 12)
    u = checkerboard(mesh)
    spec = ConstitutiveSpec(p=3.0, delta=0.1, sigma0=SIGMA_QUAD)
    a, _ = solve_potential(mesh, u, left_right(mesh), spec)
    b, _ = solve_potential(mesh, u, left_right(mesh), spec, initial_guess=np.zeros(mesh.n_nodes))
    assert w1p_seminorm(a - b, 3.0, mesh) <= 10 * 1e-8


def test_self_convergence_against_fine_mesh():
    spec = ConstitutiveSpec(p=3.0, delta=0.1, sigma0=SIGMA_QUAD)
    sols = {}
    for n in (16, 32, 64):
        mesh = build_rect_mesh(n, n)
        phi, _ = solve_potential(mesh, checkerboard(mesh), left_right(mesh), spec, kacanov_rtol=1e-10)
        sols[n] = phi.reshape(n + 1, n + 1)
    coarse16 = lambda n: sols[n][:: n // 16, :: n // 16]
    d_16_32 = np.max(np.abs(coarse16(16) - coarse16(32)))
    e_16 = np.max(np.abs(coarse16(16) - coarse16(64)))
    e_32 = np.max(np.abs(coarse16(32) - coarse16(64)))
    assert e_32 < e_16
    # second-order envelope: |phi_h - phi| ~ (4/3) |phi_h - phi_{h/2}|
    assert e_16 <= 1.5 * d_16_32


def test_nonconvergence_raises_with_report():
    mesh = build_rect_mesh(8, 8)
    spec = ConstitutiveSpec(p=3.0, delta=0.1, sigma0=SIGMA_QUAD)
    with pytest.raises(NonconvergenceError) as info:
        solve_potential(mesh, checkerboard(mesh), left_right(mesh), spec, max_iter=1)
    assert info.value.report.iterations == 1 and not info.value.report.converged
    _, rep = solve_potential(mesh, checkerboard(mesh), left_right(mesh), spec, max_iter=1,
                             raise_on_failure=False)
    assert not rep.converged


def test_harmonic_lift_is_linear_for_side_data():
    mesh = build_rect_mesh(4, 3)
    lift = harmonic_lift(mesh, left_right(mesh, 2.0))
    np.testing.assert_allclose(lift, 2.0 * mesh.nodes[:, 0], atol=1e-12)
