"""Time marching of the coupled system and the eps-continuation study.

Each backward-Euler step is solved by Picard iteration of the map
``u_k -> u_hat``: potential at frozen temperature ``u_k``, then one linear
heat step with kappa and the source frozen at ``u_k``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .constitutive import ConstitutiveSpec
from .errors import ConfigurationError, CouplingDivergenceError, ThermistorError
from .estimates import (EstimateLedger, LedgerRow, lambda_from_q, ledger_row, lp_norm,
                        space_time_l2_distance)
from .heat import HeatStepInputs, smooth_initial, step_heat
from .mesh import Mesh, SIDES
from .potential import PotentialReport, harmonic_lift, solve_potential

log = logging.getLogger(__name__)

DEFAULT_EPS = (1e-1, 1e-2, 1e-3, 1e-4)


@dataclass
class CouplingConfig:
    T_final: float = 1.0
    steps: int = 10
    eps_schedule: tuple = DEFAULT_EPS
    fp_rtol: float = 1e-8
    fp_max_iter: int = 50
    kacanov_rtol: float = 1e-8
    kacanov_max_iter: int = 500
    linear_rtol: float = 1e-12
    linear_max_iter: Optional[int] = None
    q: float = 9 / 8
    r: float = 1.5
    lam: Optional[float] = None
    omega: float = 1.0
    lumped: bool = False
    seed: str = "previous"
    warm_start: bool = True

    def __post_init__(self):
        errs = coupling_errors(self)
        if errs:
            raise ConfigurationError("; ".join(errs))
        self.eps_schedule = tuple(float(e) for e in self.eps_schedule)

    @property
    def dt(self) -> float:
        return self.T_final / self.steps

    @property
    def lam_value(self) -> float:
        return lambda_from_q(self.q) if self.lam is None else self.lam


def coupling_errors(cfg: CouplingConfig) -> list[str]:
    errs = []
    if not cfg.T_final > 0:
        errs.append("T_final must be > 0")
    if int(cfg.steps) != cfg.steps or cfg.steps < 1:
        errs.append("steps must be an integer >= 1")
    eps = list(cfg.eps_schedule)
    if not eps or any(not e > 0 for e in eps):
        errs.append("eps_schedule must be a non-empty list of positive values")
    elif any(b >= a for a, b in zip(eps, eps[1:])):
        errs.append("eps_schedule must be strictly decreasing")
    for name in ("fp_rtol", "kacanov_rtol", "linear_rtol"):
        if not getattr(cfg, name) > 0:
            errs.append(f"{name} must be > 0")
    for name in ("fp_max_iter", "kacanov_max_iter"):
        if getattr(cfg, name) < 1:
            errs.append(f"{name} must be >= 1")
    if not 1 < cfg.q < 4 / 3:
        errs.append(f"q must lie in (1, 4/3), got {cfg.q}")
    if not 1 < cfg.r < 2:
        errs.append(f"r must lie in (1, 2), got {cfg.r}")
    lam = lambda_from_q(cfg.q) if cfg.lam is None else cfg.lam
    if not 0 < lam < 1:
        errs.append(f"lambda must lie in (0, 1), got {lam}")
    if not 0 < cfg.omega <= 1:
        errs.append("omega must lie in (0, 1]")
    if cfg.seed not in ("previous", "ambient"):
        errs.append("seed must be 'previous' or 'ambient'")
    return errs


# ------------------------------------------------------------ boundary data

@dataclass(frozen=True)
class SideBoundary:
    """Constant value per rectangle side, optionally ramped as V min(t/t_ramp, 1)."""

    values: tuple  # ((side, V), ...)
    t_ramp: Optional[float] = None

    def __call__(self, mesh: Mesh, t: float) -> np.ndarray:
        full = np.zeros(mesh.n_nodes)
        scale = 1.0 if self.t_ramp is None else min(t / self.t_ramp, 1.0)
        for side in SIDES:  # fixed order: later sides win at corners
            for s, v in self.values:
                if s == side:
                    full[mesh.side_nodes(side)] = scale * v
        return full[mesh.dirichlet_nodes]


@dataclass(frozen=True)
class ExpressionBoundary:
    """phi_D given by a function of (x, y, t) evaluated at the Dirichlet nodes."""

    func: Callable
    text: str = ""

    def __call__(self, mesh: Mesh, t: float) -> np.ndarray:
        pts = mesh.nodes[mesh.dirichlet_nodes]
        vals = self.func(pts[:, 0], pts[:, 1], t)
        return np.broadcast_to(np.asarray(vals, dtype=float), (pts.shape[0],)).copy()


# ------------------------------------------------------------ trajectories

@dataclass
class Trajectory:
    mesh: Mesh
    eps: float
    dt: float
    times: list = field(default_factory=list)
    u: list = field(default_factory=list)
    phi: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    fp_iterations: list = field(default_factory=list)
    fp_histories: list = field(default_factory=list)
    kacanov_iterations: list = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.u) - 1


@dataclass
class StepResult:
    u: np.ndarray
    phi: np.ndarray
    iterations: int
    history: list
    kacanov_iterations: int
    report: PotentialReport


def fixed_point_map(mesh: Mesh, u_k, u_prev, t: float, dt: float, eps: float, phi_D_vals,
                    spec: ConstitutiveSpec, config: CouplingConfig, phi_guess=None):
    """One application of the coupling map.

    Returns ``(u_hat, phi_k, report)`` where ``phi_k`` solves the potential
    problem at temperature ``u_k`` and ``u_hat`` the heat step with
    coefficients frozen at ``u_k``.
    """
    phi_k, report = solve_potential(mesh, u_k, phi_D_vals, spec, kacanov_rtol=config.kacanov_rtol,
                                    max_iter=config.kacanov_max_iter, initial_guess=phi_guess,
                                    linear_rtol=config.linear_rtol,
                                    linear_max_iter=config.linear_max_iter)
    inputs = HeatStepInputs(mesh, u_prev, phi_k, t, dt, eps, spec, lumped=config.lumped)
    u_hat = step_heat(inputs, kappa_freeze=u_k, rtol=config.linear_rtol, max_iter=config.linear_max_iter)
    return u_hat, phi_k, report


def solve_timestep(mesh: Mesh, u_prev, t: float, dt: float, eps: float, phi_D_vals,
                   spec: ConstitutiveSpec, config: CouplingConfig, seed=None, phi_guess=None) -> StepResult:
    """Picard iteration of the coupling map until
    ``||u_{k+1} - u_k||_L2 <= fp_rtol (1 + ||u_{k+1}||_L2)``."""
    u_prev = np.asarray(u_prev, dtype=float)
    if seed is None:
        seed = u_prev if config.seed == "previous" else np.full_like(u_prev, spec.h)
    u_k = np.array(seed, dtype=float)
    history = []
    kac = 0
    phi = phi_guess
    for it in range(1, config.fp_max_iter + 1):
        u_hat, phi, report = fixed_point_map(mesh, u_k, u_prev, t, dt, eps, phi_D_vals, spec, config, phi)
        kac += report.iterations
        u_new = u_hat if config.omega == 1.0 else (1 - config.omega) * u_k + config.omega * u_hat
        change = lp_norm(u_new - u_k, 2.0, mesh)
        rel = change / (1.0 + lp_norm(u_new, 2.0, mesh))
        history.append(rel)
        u_k = u_new
        if not math.isfinite(rel):
            break
        if rel <= config.fp_rtol:
            return StepResult(u_k, phi, it, history, kac, report)
    raise CouplingDivergenceError(
        f"fixed-point iteration did not converge in {config.fp_max_iter} iterations at t={t:.6g} "
        f"(last relative change {history[-1]:.3e})", history=history)


def run_simulation(mesh: Mesh, config: CouplingConfig, eps: float, spec: ConstitutiveSpec,
                   phi_D: Callable, u0, warm: Optional[Trajectory] = None) -> Trajectory:
    """March ``config.steps`` backward-Euler steps at regularisation ``eps``.

    ``u0`` is the nodal initial datum; it is smoothed on the eps scale before
    use.  ``warm`` (a trajectory on the same grid) supplies fixed-point seeds.
    """
    dt = config.dt
    u_start = smooth_initial(mesh, u0, eps)
    phi0, rep0 = solve_potential(mesh, u_start, phi_D(mesh, 0.0), spec, config.kacanov_rtol,
                                 config.kacanov_max_iter, linear_rtol=config.linear_rtol,
                                 linear_max_iter=config.linear_max_iter)
    traj = Trajectory(mesh=mesh, eps=eps, dt=dt, times=[0.0], u=[u_start], phi=[phi0], reports=[rep0],
                      fp_iterations=[0], fp_histories=[[]], kacanov_iterations=[rep0.iterations])
    for m in range(config.steps):
        t = (m + 1) * dt
        seed = warm.u[m + 1] if warm is not None and len(warm.u) > m + 1 else None
        try:
            res = solve_timestep(mesh, traj.u[-1], t, dt, eps, phi_D(mesh, t), spec, config,
                                 seed=seed, phi_guess=traj.phi[-1])
        except ThermistorError as exc:
            raise CouplingDivergenceError(f"step {m + 1} (t={t:.6g}, eps={eps:g}) failed: {exc}",
                                          history=getattr(exc, "history", []), partial=traj) from exc
        traj.times.append(t)
        traj.u.append(res.u)
        traj.phi.append(res.phi)
        traj.reports.append(res.report)
        traj.fp_iterations.append(res.iterations)
        traj.fp_histories.append(res.history)
        traj.kacanov_iterations.append(res.kacanov_iterations)
    return traj


def dirichlet_lifts(mesh: Mesh, config: CouplingConfig, phi_D: Callable) -> list:
    """Harmonic extensions of the boundary data on the time grid (data norm of phi_D)."""
    return [harmonic_lift(mesh, phi_D(mesh, m * config.dt), rtol=config.linear_rtol)
            for m in range(config.steps + 1)]


def eps_continuation(mesh: Mesh, config: CouplingConfig, spec: ConstitutiveSpec, phi_D: Callable,
                     u0) -> EstimateLedger:
    """Run the simulation for every eps in the schedule and tabulate the
    a-priori quantities; ``ledger.trajectories`` keeps the runs."""
    ledger = EstimateLedger(p=spec.p, q=config.q, r=config.r, lam=config.lam_value)
    ledger.trajectories = []
    lifts = dirichlet_lifts(mesh, config, phi_D)
    prev = None
    for eps in config.eps_schedule:
        try:
            traj = run_simulation(mesh, config, eps, spec, phi_D, u0,
                                  warm=prev if config.warm_start else None)
        except ThermistorError as exc:
            log.error("eps=%g failed: %s", eps, exc)
            ledger.rows.append(LedgerRow(eps=eps, failed=True, message=str(exc)))
            ledger.trajectories.append(None)
            continue
        row = ledger_row(traj, spec, config.q, config.r, config.lam_value, lifts)
        if prev is not None:
            row.cauchy_dist = space_time_l2_distance(mesh, prev.u, traj.u, config.dt)
        ledger.rows.append(row)
        ledger.trajectories.append(traj)
        prev = traj
    return ledger


def trajectory_distance(a: Trajectory, b: Trajectory) -> float:
    return space_time_l2_distance(a.mesh, a.u, b.u, a.dt)


def max_step_distance(a: Trajectory, b: Trajectory) -> float:
    """Largest per-step L2 distance between two trajectories on the same grid."""
    return max(lp_norm(x - y, 2.0, a.mesh) for x, y in zip(a.u, b.u))
