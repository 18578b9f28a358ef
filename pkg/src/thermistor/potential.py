"""Quasilinear potential equation -div(sigma(u, |grad phi|) grad phi) = 0.

The discrete problem is the minimiser of the convex energy
``E(phi) = sum_K sigma0(u_K) (delta + |grad phi|_K^2)^(p/2) |K|`` over fields
matching the Dirichlet data; it is solved by Kacanov iteration (freeze the
coefficient, solve a weighted Laplace problem).  For p > 2 the frozen step
can overshoot, so a step that would raise E is halved until it does not.
The update direction is always a descent direction, so this only shortens
steps and never changes the limit.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .constitutive import ConstitutiveSpec, sigma
from .errors import ConfigurationError, NonconvergenceError
from .estimates import w1p_seminorm
from .fem import (SparseSystem, apply_dirichlet, assemble_weighted_stiffness,
                  dirichlet_values, solve_sparse)
from .mesh import Mesh

log = logging.getLogger(__name__)


@dataclass
class PotentialReport:
    iterations: int = 0
    increment_norm: float = np.inf
    residual_norm: float = np.inf
    converged: bool = False
    energies: list[float] = field(default_factory=list)
    damped_steps: int = 0


def energy(mesh: Mesh, phi, u, spec: ConstitutiveSpec) -> float:
    g = mesh.gradient(phi)
    t2 = g[:, 0] ** 2 + g[:, 1] ** 2
    s0 = spec.sigma0(mesh.barycentric_mean(u))
    return float(mesh.areas @ (s0 * (spec.delta + t2) ** (spec.p / 2)))


def _coefficient(mesh, phi, u_bar, spec):
    g = mesh.gradient(phi)
    return sigma(u_bar, np.hypot(g[:, 0], g[:, 1]), spec)


def harmonic_lift(mesh: Mesh, phi_D, rtol: float = 1e-12, max_iter=None) -> np.ndarray:
    """Discrete harmonic extension of the Dirichlet data (unit weight solve)."""
    A = assemble_weighted_stiffness(mesh, 1.0)
    system = apply_dirichlet(SparseSystem(A, np.zeros(mesh.n_nodes)), dirichlet_values(mesh, phi_D))
    return solve_sparse(system, rtol=rtol, max_iter=max_iter)


def discrete_residual(mesh: Mesh, phi, u, spec: ConstitutiveSpec) -> float:
    """Euclidean norm of the assembled form on the free (non-Dirichlet) nodes."""
    w = _coefficient(mesh, phi, mesh.barycentric_mean(u), spec)
    r = assemble_weighted_stiffness(mesh, w) @ np.asarray(phi, dtype=float)
    free = np.ones(mesh.n_nodes, dtype=bool)
    free[mesh.dirichlet_nodes] = False
    return float(np.linalg.norm(r[free]))


def solve_potential(mesh: Mesh, u, phi_D, spec: ConstitutiveSpec, kacanov_rtol: float = 1e-8,
                    max_iter: int = 200, initial_guess=None, linear_rtol: float = 1e-12,
                    linear_max_iter=None, raise_on_failure: bool = True, relaxation=None):
    """Solve for the potential at a frozen temperature field ``u``.

    ``phi_D`` holds the values at ``mesh.dirichlet_nodes`` (or a full nodal
    array).  Returns ``(phi, PotentialReport)``.

    ``relaxation`` scales each frozen-coefficient update; the default is 1
    for p <= 2 and 1/(p-1) above, which removes the oscillating mode of the
    plain iteration (its linearised multiplier is -(p-2) on 1D profiles).
    Steps are halved further while the energy would increase.
    """
    if spec.p < 2 and spec.delta == 0:
        raise ConfigurationError("p < 2 requires delta > 0 (coefficient is singular at zero gradient)")
    nodes, vals = dirichlet_values(mesh, phi_D)
    u = np.asarray(u, dtype=float)
    u_bar = mesh.barycentric_mean(u)
    p = spec.p

    if initial_guess is None:
        phi = harmonic_lift(mesh, vals, rtol=linear_rtol, max_iter=linear_max_iter)
    else:
        phi = np.array(initial_guess, dtype=float)
        phi[nodes] = vals
    relax = (1.0 if p <= 2 else 1.0 / (p - 1)) if relaxation is None else float(relaxation)
    if not 0 < relax <= 1:
        raise ConfigurationError(f"relaxation must lie in (0, 1], got {relax}")
    report = PotentialReport()
    E = energy(mesh, phi, u, spec)
    report.energies.append(E)
    zero_rhs = np.zeros(mesh.n_nodes)

    for it in range(1, max_iter + 1):
        w = _coefficient(mesh, phi, u_bar, spec)
        system = apply_dirichlet(SparseSystem(assemble_weighted_stiffness(mesh, w), zero_rhs), (nodes, vals))
        target = solve_sparse(system, rtol=linear_rtol, max_iter=linear_max_iter, x0=phi)
        step = target - phi
        omega = relax
        new = phi + omega * step if omega != 1.0 else target
        E_new = energy(mesh, new, u, spec)
        halvings = 0
        # energy terms are non-negative, so this bounds the summation rounding
        noise = 64 * np.finfo(float).eps * E
        while E_new > E + noise and halvings < 50:
            omega *= 0.5
            halvings += 1
            new = phi + omega * step
            E_new = energy(mesh, new, u, spec)
        if E_new > E + noise:
            # no decrease representable in floating point: stay put
            new, E_new = phi, E
        if halvings:
            report.damped_steps += 1
        incr = w1p_seminorm(new - phi, p, mesh)
        ref = w1p_seminorm(new, p, mesh)
        phi, E = new, E_new
        report.energies.append(E)
        res = discrete_residual(mesh, phi, u, spec)
        report.iterations, report.increment_norm, report.residual_norm = it, incr, res
        if incr <= kacanov_rtol * ref and res <= kacanov_rtol:
            report.converged = True
            break
        if incr == 0.0 and res > kacanov_rtol:
            break

    log.debug("kacanov: %d iterations, increment %.3e, residual %.3e",
              report.iterations, report.increment_norm, report.residual_norm)
    if not report.converged and raise_on_failure:
        raise NonconvergenceError(
            f"Kacanov iteration did not converge in {report.iterations} iterations "
            f"(increment {report.increment_norm:.3e}, residual {report.residual_norm:.3e})", report)
    return phi, report
