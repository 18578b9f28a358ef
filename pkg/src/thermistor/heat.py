"""Backward-Euler step of the heat equation with Robin (Newton cooling)
boundary condition and a frozen-coefficient regularised Joule source."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .constitutive import ConstitutiveSpec, source_f_eps
from .errors import ConfigurationError
from .fem import (SparseSystem, assemble_boundary_load, assemble_boundary_mass, assemble_load,
                  assemble_mass, assemble_weighted_stiffness, solve_sparse)
from .mesh import Mesh


@dataclass
class HeatStepInputs:
    mesh: Mesh
    u_prev: np.ndarray
    phi: np.ndarray
    t: float
    dt: float
    eps: float
    spec: ConstitutiveSpec
    lumped: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError(f"time step must be > 0, got {self.dt}")
        if not self.eps > 0:
            raise ConfigurationError(f"eps must be > 0, got {self.eps}")
        n = self.mesh.n_nodes
        if np.shape(self.u_prev) != (n,) or np.shape(self.phi) != (n,):
            raise ConfigurationError("u_prev and phi must be nodal fields on the same mesh")


class _HeatOperators:
    """Mesh-level matrices that do not change between steps."""

    def __init__(self, mesh: Mesh, lumped: bool):
        self.M = assemble_mass(mesh, lumped=lumped)
        self.B = assemble_boundary_mass(mesh, lumped=lumped)
        self.b = assemble_boundary_load(mesh)


_cache: dict = {}


def _operators(mesh: Mesh, lumped: bool) -> _HeatOperators:
    key = (id(mesh), lumped)
    hit = _cache.get(key)
    if hit is None or hit[0] is not mesh:
        if len(_cache) > 32:
            _cache.clear()
        hit = (mesh, _HeatOperators(mesh, lumped))
        _cache[key] = hit
    return hit[1]


def joule_load(mesh: Mesh, t: float, u_eval, phi, eps: float, spec: ConstitutiveSpec) -> np.ndarray:
    """Load vector of f_eps(x_K, t, u_K, grad phi_K) (barycenter rule)."""
    fe = source_f_eps(mesh.barycenters, t, mesh.barycentric_mean(u_eval), mesh.gradient(phi), eps, spec)
    return assemble_load(mesh, fe)


def step_heat(inputs: HeatStepInputs, kappa_freeze, rtol: float = 1e-12, max_iter=None) -> np.ndarray:
    """Solve (M/dt + A_kappa + g B) u = M u_prev/dt + g h b + F_eps.

    kappa and the temperature argument of the source are evaluated at
    ``kappa_freeze``; phi enters only through its per-triangle gradient.
    """
    mesh, spec, dt = inputs.mesh, inputs.spec, inputs.dt
    kappa_freeze = np.asarray(kappa_freeze, dtype=float)
    if kappa_freeze.shape != (mesh.n_nodes,) or not np.all(np.isfinite(kappa_freeze)):
        raise ConfigurationError("kappa_freeze must be a finite nodal field")
    ops = _operators(mesh, inputs.lumped)
    A = assemble_weighted_stiffness(mesh, spec.kappa(mesh.barycentric_mean(kappa_freeze)))
    lhs = (ops.M / dt + A + spec.g * ops.B).tocsr()
    rhs = ops.M @ np.asarray(inputs.u_prev, dtype=float) / dt + spec.g * spec.h * ops.b
    rhs = rhs + joule_load(mesh, inputs.t, kappa_freeze, inputs.phi, inputs.eps, spec)
    return solve_sparse(SparseSystem(lhs, rhs), rtol=rtol, max_iter=max_iter, x0=kappa_freeze)


def sample_initial(mesh: Mesh, u0: Callable, rough: bool = False) -> np.ndarray:
    """Nodal values of initial data.

    Continuous data are sampled at the nodes.  Rough data are averaged over
    each triangle (centroid plus edge-midpoint rule) and the element means
    are distributed to the nodes with area weights.
    """
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    if not rough:
        return np.broadcast_to(np.asarray(u0(x, y), dtype=float), (mesh.n_nodes,)).copy()
    P = mesh.nodes[mesh.triangles]
    pts = [P.mean(axis=1), 0.5 * (P[:, 0] + P[:, 1]), 0.5 * (P[:, 1] + P[:, 2]), 0.5 * (P[:, 2] + P[:, 0])]
    means = np.mean([np.broadcast_to(u0(q[:, 0], q[:, 1]), (mesh.n_triangles,)) for q in pts], axis=0)
    num = np.zeros(mesh.n_nodes)
    np.add.at(num, mesh.triangles.ravel(), np.repeat(means * mesh.areas, 3))
    den = np.zeros(mesh.n_nodes)
    np.add.at(den, mesh.triangles.ravel(), np.repeat(mesh.areas, 3))
    return num / den


def smooth_initial(mesh: Mesh, u0_nodal, eps: float, scale: float | None = None) -> np.ndarray:
    """Regularised initial datum: lumped-mass weighted average over the ball of
    radius ``eps * scale`` around each node (scale defaults to the domain diagonal).

    Constants are reproduced exactly and the radius vanishes with eps, so the
    result converges to the input as eps -> 0.
    """
    if not eps > 0:
        raise ConfigurationError(f"eps must be > 0, got {eps}")
    u0_nodal = np.asarray(u0_nodal, dtype=float)
    if scale is None:
        scale = float(np.hypot(mesh.lx, mesh.ly))
    radius = eps * scale
    tree = cKDTree(mesh.nodes)
    m = mesh.lumped_mass
    out = np.empty_like(u0_nodal)
    for i, nb in enumerate(tree.query_ball_point(mesh.nodes, radius)):
        nb = np.sort(np.asarray(nb, dtype=np.int64))
        w = m[nb]
        out[i] = float(w @ u0_nodal[nb]) / float(w.sum())
    return out
