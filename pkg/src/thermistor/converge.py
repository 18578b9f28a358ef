"""Built-in manufactured cases for refinement studies.

``potential-1d``
    Frozen temperature u = x, phi = 0 on the left side and V on the right,
    insulated top and bottom.  The flux is constant across x, so
    phi'(x) = g^{-1}(C / sigma0(x)) with g(s) = (delta + s^2)^((p-2)/2) s and C
    fixed by phi(lx) = V.  The reference is evaluated by bisection and
    composite Gauss-Legendre quadrature, independently of the FE code.
``heat-time``
    Linear heat problem (kappa frozen at u0 = 1, no source) marched with
    backward Euler; the reference is the exact solution of the semi-discrete
    system, a dense matrix exponential.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq

from .constitutive import ConstitutiveSpec
from .estimates import lp_norm
from .fem import assemble_boundary_load, assemble_boundary_mass, assemble_mass, assemble_weighted_stiffness
from .heat import HeatStepInputs, step_heat
from .mesh import build_rect_mesh
from .potential import solve_potential

CASES = ("potential-1d", "heat-time")
V_APPLIED = 1.0
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


@dataclass
class RefinementRow:
    case: str
    level: int
    h: float
    dt: float
    error: float
    rate: float


def _invert_flux(c, p, delta, iters=200):
    """Solve (delta + s^2)^((p-2)/2) s = c for s >= 0 elementwise by bisection."""
    c = np.asarray(c, dtype=float)
    lo = np.zeros_like(c)
    hi = np.ones_like(c)
    flux = lambda s: (delta + s * s) ** ((p - 2) / 2) * s
    while np.any(flux(hi) < c):
        hi = np.where(flux(hi) < c, 2 * hi, hi)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = flux(mid) < c
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= 1e-15 * np.maximum(hi, 1.0)):
            break
    return 0.5 * (lo + hi)


def exact_potential_1d(x_nodes, spec: ConstitutiveSpec, lx: float, V: float = V_APPLIED):
    """Reference phi at sorted abscissae ``x_nodes`` (first 0, last lx)."""
    x_nodes = np.asarray(x_nodes, dtype=float)
    a, b = x_nodes[:-1], x_nodes[1:]
    pts = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * _GL_X[None, :]
    wts = 0.5 * (b - a)[:, None] * _GL_W[None, :]
    sig0 = spec.sigma0(pts)  # temperature equals x

    def pieces(C):
        return np.sum(wts * _invert_flux(C / sig0, spec.p, spec.delta), axis=1)

    hi = 1.0
    while pieces(hi).sum() < V:
        hi *= 2
    C = brentq(lambda c: pieces(c).sum() - V, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return np.concatenate([[0.0], np.cumsum(pieces(C))])


def potential_case(spec: ConstitutiveSpec, nx0: int, ny0: int, lx: float, ly: float, levels: int):
    rows = []
    for level in range(levels):
        nx, ny = nx0 * 2 ** level, ny0 * 2 ** level
        mesh = build_rect_mesh(nx, ny, lx, ly, ("left", "right"))
        x = mesh.nodes[:, 0]
        phi_D = np.where(np.isclose(x[mesh.dirichlet_nodes], lx), V_APPLIED, 0.0)
        phi, _ = solve_potential(mesh, x.copy(), phi_D, spec, kacanov_rtol=1e-10, max_iter=500)
        ref = exact_potential_1d(np.linspace(0.0, lx, nx + 1), spec, lx)
        err = float(np.max(np.abs(phi - ref[np.rint(x / lx * nx).astype(int)])))
        rows.append(RefinementRow("potential-1d", level, lx / nx, math.nan, err, math.nan))
    return _rates(rows, "h")


def heat_case(spec: ConstitutiveSpec, nx: int, ny: int, lx: float, ly: float, T: float, steps0: int,
              levels: int, lumped: bool = False):
    mesh = build_rect_mesh(nx, ny, lx, ly, ("left", "right"))
    n = mesh.n_nodes
    ones = np.ones(n)
    k = float(spec.kappa(1.0))
    M = assemble_mass(mesh, lumped=lumped).toarray()
    K = (assemble_weighted_stiffness(mesh, np.full(mesh.n_triangles, k))
         + spec.g * assemble_boundary_mass(mesh, lumped=lumped)).toarray()
    # u - h solves the homogeneous problem since B 1 equals the boundary load
    assert np.allclose(assemble_boundary_mass(mesh, lumped=lumped) @ ones, assemble_boundary_load(mesh))
    ref = spec.h + sla.expm(-T * np.linalg.solve(M, K)) @ (ones - spec.h)
    zeros = np.zeros(n)
    rows = []
    for level in range(levels):
        steps = steps0 * 2 ** level
        dt = T / steps
        u = ones.copy()
        for m in range(steps):
            inp = HeatStepInputs(mesh, u, zeros, (m + 1) * dt, dt, 1.0, spec, lumped=lumped)
            u = step_heat(inp, kappa_freeze=ones)
        err = lp_norm(u - ref, math.inf, mesh)
        rows.append(RefinementRow("heat-time", level, math.hypot(lx / nx, ly / ny), dt, err, math.nan))
    return _rates(rows, "dt")


def _rates(rows, key):
    for prev, row in zip(rows, rows[1:]):
        if prev.error > 0 and row.error > 0:
            row.rate = math.log(prev.error / row.error) / math.log(getattr(prev, key) / getattr(row, key))
    return rows


def refinement_study(cfg, levels: int):
    """Run both built-in cases with the mesh, constitutive and time data of ``cfg``."""
    m, c = cfg.mesh, cfg.coupling
    rows = potential_case(cfg.spec, m.nx, m.ny, m.lx, m.ly, levels)
    rows += heat_case(cfg.spec, m.nx, m.ny, m.lx, m.ly, c.T_final, c.steps, levels, lumped=c.lumped)
    return rows
