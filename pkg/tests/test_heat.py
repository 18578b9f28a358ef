import numpy as np
import pytest

from thermistor.constitutive import ConstitutiveSpec, Profile
from thermistor.errors import ConfigurationError
from thermistor.estimates import lp_norm
from thermistor.fem import assemble_boundary_load, assemble_boundary_mass, assemble_load, assemble_mass
from thermistor.heat import HeatStepInputs, joule_load, sample_initial, smooth_initial, step_heat
from thermistor.mesh import build_rect_mesh


def march(mesh, spec, u0, phi, dt, steps, eps=1.0, lumped=False):
    u = u0.copy()
    for m in range(steps):
        u = step_heat(HeatStepInputs(mesh, u, phi, (m + 1) * dt, dt, eps, spec, lumped=lumped), kappa_freeze=u)
    return u


@pytest.mark.parametrize("lumped", [False, True])
def test_equilibrium_preserved(lumped):
    mesh = build_rect_mesh(8, 8)
    spec = ConstitutiveSpec(kappa=Profile("saturating", (0.5, 3.0)), g=2.0, h=0.35, eta1=0.0)
    u0 = np.full(mesh.n_nodes, 0.35)
    u = march(mesh, spec, u0, np.zeros(mesh.n_nodes), 0.01, 50, lumped=lumped)
    assert np.max(np.abs(u - 0.35)) <= 1e-12


def test_discrete_heat_balance():
    # 1^T M (u1 - u0)/dt + g 1^T B u1 - g h 1^T b = 1^T F   since the stiffness annihilates constants
    mesh = build_rect_mesh(9, 7, 1.3, 0.8)
    spec = ConstitutiveSpec(p=2.0, kappa=Profile("table", (-1.0, 0.5, 1.0, 2.0)), eta1=0.6, g=1.7, h=0.2)
    x, y = mesh.nodes.T
    u0 = 0.3 * np.sin(4 * x) * y
    phi = 2.0 * x + np.cos(3 * y)
    dt, eps = 0.03, 0.05
    u1 = step_heat(HeatStepInputs(mesh, u0, phi, dt, dt, eps, spec), kappa_freeze=u0)
    one = np.ones(mesh.n_nodes)
    F = joule_load(mesh, dt, u0, phi, eps, spec)
    lhs = one @ assemble_mass(mesh) @ (u1 - u0) / dt + spec.g * one @ assemble_boundary_mass(mesh) @ u1 \
        - spec.g * spec.h * one @ assemble_boundary_load(mesh)
    assert lhs == pytest.approx(F.sum(), rel=1e-10)


def test_source_capped_by_inverse_eps():
    mesh = build_rect_mesh(6, 6)
    spec = ConstitutiveSpec(p=2.0, eta1=1.0)
    phi = 1e4 * mesh.nodes[:, 0]
    for eps in (1.0, 0.1, 0.01):
        F = joule_load(mesh, 0.0, np.zeros(mesh.n_nodes), phi, eps, spec)
        assert F.sum() <= 1.0 / eps
        assert F.sum() == pytest.approx(1.0 / eps, rel=1e-6)


def test_uniform_source_load():
    mesh = build_rect_mesh(4, 4)
    spec = ConstitutiveSpec(p=2.0, eta1=0.5, sigma0=Profile("constant", (2.0,)))
    phi = 3.0 * mesh.nodes[:, 0]  # f = 0.5 * 2 * 9 = 9 everywhere
    F = joule_load(mesh, 0.0, np.zeros(mesh.n_nodes), phi, 1e-300, spec)
    np.testing.assert_allclose(F, assemble_load(mesh, 9.0), rtol=1e-12)


def test_well_mixed_limit_follows_recurrence():
    # with a very large conductivity the temperature stays uniform and obeys
    # (1 + k dt) u_n = u_{n-1} with k = g |dOmega| / |Omega| = 4
    mesh = build_rect_mesh(8, 8)
    spec = ConstitutiveSpec(kappa=Profile("constant", (1e3,)), eta1=0.0)
    dt, steps = 0.025, 20
    u = march(mesh, spec, np.ones(mesh.n_nodes), np.zeros(mesh.n_nodes), dt, steps)
    assert np.ptp(u) < 2e-4
    assert np.max(np.abs(u - (1 + 4 * dt) ** -steps)) < 1e-3


def test_inputs_validated():
    mesh = build_rect_mesh(2, 2)
    spec = ConstitutiveSpec()
    z = np.zeros(mesh.n_nodes)
    for kw in (dict(dt=0.0, eps=1.0), dict(dt=0.1, eps=0.0)):
        with pytest.raises(ConfigurationError):
            HeatStepInputs(mesh, z, z, 0.0, kw["dt"], kw["eps"], spec)
    with pytest.raises(ConfigurationError):
        HeatStepInputs(mesh, z[:-1], z, 0.0, 0.1, 1.0, spec)
    with pytest.raises(ConfigurationError):
        step_heat(HeatStepInputs(mesh, z, z, 0.0, 0.1, 1.0, spec), kappa_freeze=np.full(mesh.n_nodes, np.nan))


def test_sample_initial():
    mesh = build_rect_mesh(4, 4)
    lin = sample_initial(mesh, lambda x, y: 2 * x - y)
    np.testing.assert_allclose(lin, 2 * mesh.nodes[:, 0] - mesh.nodes[:, 1])
    np.testing.assert_allclose(sample_initial(mesh, lambda x, y: 3.0, rough=True), 3.0)
    step = sample_initial(mesh, lambda x, y: (x > 0.5).astype(float), rough=True)
    assert 0 <= step.min() and step.max() <= 1
    assert lp_norm(step, 1.0, mesh) == pytest.approx(0.5, abs=0.1)


def test_smooth_initial():
    mesh = build_rect_mesh(20, 20)
    np.testing.assert_allclose(smooth_initial(mesh, np.full(mesh.n_nodes, -1.5), 0.3), -1.5, rtol=1e-14)
    rough = (mesh.nodes[:, 0] > 0.5).astype(float)
    dists = [lp_norm(smooth_initial(mesh, rough, e) - rough, 1.0, mesh) for e in (0.2, 0.1, 0.05, 0.01)]
    assert all(b < a for a, b in zip(dists, dists[1:]))
    # radius below the grid spacing leaves nodal data untouched
    np.testing.assert_array_equal(smooth_initial(mesh, rough, 0.01), rough)
