"""Discrete norms, the Phi/Psi test-function calculus and the a-priori
estimate ledger used for the eps -> 0 study.

Field norms use nodal (lumped) quadrature, gradient norms the exact
one-point rule for P1.  Space-time norms use the rectangle rule on the step
grid with right endpoints, L^inf in time is the maximum over all samples.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields as dc_fields
from typing import Sequence

import numpy as np

from .errors import ConfigurationError
from .mesh import Mesh

N_DIM = 2


def lambda_from_q(q: float, n: int = N_DIM) -> float:
    """Exponent lambda = (n + 2 - q(n + 1)) / n paired with q in (1, (n+2)/(n+1))."""
    return (n + 2 - q * (n + 1)) / n


def _check_lambda(lam):
    if not 0 < lam < 1:
        raise ConfigurationError(f"lambda must lie in (0, 1), got {lam}")


def phi_lambda(s, lam):
    _check_lambda(lam)
    s = np.asarray(s, dtype=float)
    return (1.0 - (1.0 + np.abs(s)) ** (-lam)) * np.sign(s)


def psi_lambda(s, lam):
    _check_lambda(lam)
    a = np.abs(np.asarray(s, dtype=float))
    # -expm1(log1p(a)*(1-lam)) keeps precision for small |s|
    return a - np.expm1((1.0 - lam) * np.log1p(a)) / (1.0 - lam)


def phi_lambda_prime(s, lam):
    _check_lambda(lam)
    return lam / (1.0 + np.abs(np.asarray(s, dtype=float))) ** (1.0 + lam)


def psi_lower_bound(s, lam):
    return np.abs(s) / 2 - 2 ** ((1 - lam) / 2) / (1 - lam)


# ---------------------------------------------------------------- norms

def lp_norm(values, p: float, mesh: Mesh) -> float:
    v = np.abs(np.asarray(values, dtype=float))
    if math.isinf(p):
        return float(v.max())
    return float((mesh.lumped_mass @ v ** p) ** (1.0 / p))


def l2_norm_consistent(values, mesh: Mesh) -> float:
    from .fem import assemble_mass
    v = np.asarray(values, dtype=float)
    return float(np.sqrt(v @ (assemble_mass(mesh) @ v)))


def w1p_seminorm(values, p: float, mesh: Mesh) -> float:
    g = mesh.gradient(values)
    mag = np.hypot(g[:, 0], g[:, 1])
    return float((mesh.areas @ mag ** p) ** (1.0 / p))


def w1p_norm(values, p: float, mesh: Mesh) -> float:
    return float((lp_norm(values, p, mesh) ** p + w1p_seminorm(values, p, mesh) ** p) ** (1.0 / p))


_SPATIAL = {
    "L": lambda v, p, m: lp_norm(v, p, m),
    "W1p": lambda v, p, m: w1p_norm(v, p, m),
    "w1p": lambda v, p, m: w1p_seminorm(v, p, m),
}


def bochner_norm(fields: Sequence[np.ndarray], mesh: Mesh, dt: float, spatial: str = "L",
                 space_exponent: float = 2.0, time_exponent: float = 2.0) -> float:
    """Space-time norm of a sampled trajectory ``fields[0..M]``.

    ``spatial`` is ``"L"`` (Lebesgue), ``"W1p"`` (full Sobolev) or ``"w1p"``
    (gradient seminorm).  For finite time exponents the initial sample is
    skipped (right-endpoint rectangle rule).
    """
    norm = _SPATIAL[spatial]
    vals = [norm(f, space_exponent, mesh) for f in fields]
    if math.isinf(time_exponent):
        return float(max(vals))
    s = time_exponent
    return float((dt * sum(v ** s for v in vals[1:])) ** (1.0 / s))


def weighted_gradient_integral(mesh: Mesh, fields: Sequence[np.ndarray], dt: float, lam: float) -> float:
    """lam * sum_m dt * int |grad u|^2 / (1 + |u|)^(1 + lam) over steps 1..M."""
    _check_lambda(lam)
    total = 0.0
    for u in fields[1:]:
        g = mesh.gradient(u)
        ub = mesh.barycentric_mean(u)
        dens = (g[:, 0] ** 2 + g[:, 1] ** 2) / (1.0 + np.abs(ub)) ** (1.0 + lam)
        total += dt * float(mesh.areas @ dens)
    return lam * total


def interpolation_check(values, q: float, mesh: Mesh, n: int = N_DIM) -> tuple[float, float]:
    """Both sides of ||z||_{q(n+1)/n} <= ||z||_1^{1/(n+1)} ||z||_{nq/(n-q)}^{n/(n+1)}."""
    if not 1 < q < n:
        raise ConfigurationError(f"q must lie in (1, {n}), got {q}")
    lhs = lp_norm(values, q * (n + 1) / n, mesh)
    rhs = lp_norm(values, 1.0, mesh) ** (1.0 / (n + 1)) * lp_norm(values, n * q / (n - q), mesh) ** (n / (n + 1))
    return lhs, rhs


# ---------------------------------------------------------------- ledger

LEDGER_COLUMNS = ("eps", "phi_norm", "f_eps_integral", "u_LinfL1", "weighted_grad",
                  "u_LqW1q", "u_LrLr", "u0_L1", "phiD_norm", "cauchy_dist")

# quantities whose eps-uniform boundedness is asserted
BOUNDED_QUANTITIES = ("phi_norm", "f_eps_integral", "u_LinfL1", "weighted_grad", "u_LqW1q", "u_LrLr")


@dataclass
class LedgerRow:
    eps: float
    phi_norm: float = math.nan
    f_eps_integral: float = math.nan
    u_LinfL1: float = math.nan
    weighted_grad: float = math.nan
    u_LqW1q: float = math.nan
    u_LrLr: float = math.nan
    u0_L1: float = math.nan
    phiD_norm: float = math.nan
    # distance to the previous (larger) eps; undefined for the first row
    cauchy_dist: float = math.nan
    # L^1(Q_T) norm of the discrete time derivative, an upper proxy for its dual norm
    du_proxy: float = math.nan
    du_ratio: float = math.nan
    u_L2L2: float = math.nan
    failed: bool = False
    message: str = ""

    def values(self):
        return [getattr(self, c) for c in LEDGER_COLUMNS]


@dataclass
class EstimateLedger:
    p: float
    q: float
    r: float
    lam: float
    rows: list[LedgerRow] = field(default_factory=list)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows], dtype=float)


def ledger_row(trajectory, spec, q: float, r: float, lam: float, phi_D_lifts=None) -> LedgerRow:
    """Evaluate every monitored quantity on one converged trajectory."""
    from .constitutive import source_f_eps
    mesh, dt, p, eps = trajectory.mesh, trajectory.dt, spec.p, trajectory.eps
    us, phis = trajectory.u, trajectory.phi
    row = LedgerRow(eps=eps)
    row.phi_norm = bochner_norm(phis, mesh, dt, "W1p", p, p)
    f_int = 0.0
    for m in range(1, len(us)):
        grad = mesh.gradient(phis[m])
        fe = source_f_eps(mesh.barycenters, trajectory.times[m], mesh.barycentric_mean(us[m]), grad, eps, spec)
        f_int += dt * float(mesh.areas @ fe)
    row.f_eps_integral = f_int
    row.u_LinfL1 = bochner_norm(us, mesh, dt, "L", 1.0, math.inf)
    row.weighted_grad = weighted_gradient_integral(mesh, us, dt, lam)
    row.u_LqW1q = bochner_norm(us, mesh, dt, "W1p", q, q)
    row.u_LrLr = bochner_norm(us, mesh, dt, "L", r, r)
    row.u_L2L2 = bochner_norm(us, mesh, dt, "L", 2.0, 2.0)
    row.u0_L1 = lp_norm(us[0], 1.0, mesh)
    if phi_D_lifts is not None:
        row.phiD_norm = bochner_norm(phi_D_lifts, mesh, dt, "W1p", p, p)
    du = [lp_norm((us[m] - us[m - 1]) / dt, 1.0, mesh) for m in range(1, len(us))]
    row.du_proxy = dt * float(sum(du))
    shape = [1.0 + w1p_norm(us[m], q, mesh) + w1p_norm(phis[m], p, mesh) ** p for m in range(1, len(us))]
    row.du_ratio = float(max(d / s for d, s in zip(du, shape))) if du else 0.0
    return row


def space_time_l2_distance(mesh: Mesh, a: Sequence[np.ndarray], b: Sequence[np.ndarray], dt: float) -> float:
    return bochner_norm([x - y for x, y in zip(a, b)], mesh, dt, "L", 2.0, 2.0)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class VerificationReport:
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self):
        return [f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}" for c in self.checks]


def verify_ledger(ledger: EstimateLedger, growth: float = 2.0, stabilization: float = 0.10,
                  abs_tol: float = 1e-12) -> VerificationReport:
    """Flat-trend checks of the eps-uniform bounds.

    (a) every bounded quantity stays below ``growth`` times its largest-eps value;
    (b) relative change between the two smallest eps is at most ``stabilization``;
    (c) phi_norm <= C (1 + phiD_norm) and f_eps_integral <= C' (1 + phiD_norm^p)
        with C, C' fitted on the first row and allowed a factor ``growth``;
    (d) the discrete time-derivative proxy obeys its bound shape with a constant
        fitted on the first row, up to ``growth``;
    (e) the Cauchy distances decrease strictly (or all vanish).
    """
    rows = [r for r in ledger.rows if not r.failed]
    checks = []
    if len(ledger.rows) - len(rows):
        checks.append(CheckResult("runs", False, f"{len(ledger.rows) - len(rows)} eps run(s) failed"))
    if len(rows) < 2:
        checks.append(CheckResult("rows", False, "ledger needs at least two successful rows"))
        return VerificationReport(checks)

    finite = all(
        np.isfinite(getattr(r, c)) and getattr(r, c) >= 0
        for i, r in enumerate(rows) for c in LEDGER_COLUMNS
        if not (c == "cauchy_dist" and i == 0) and not (c == "phiD_norm" and math.isnan(r.phiD_norm))
    )
    checks.append(CheckResult("finite", finite, "all entries finite and non-negative"))

    for name in BOUNDED_QUANTITIES:
        col = np.array([getattr(r, name) for r in rows])
        ref = col[0]
        worst = float(col.max())
        ok = worst <= growth * ref + abs_tol
        checks.append(CheckResult(f"bounded[{name}]", bool(ok), f"max {worst:.6g} vs {growth}x{ref:.6g}"))
        a, b = col[-2], col[-1]
        rel = abs(a - b) / max(abs(a), abs(b)) if max(abs(a), abs(b)) > abs_tol else 0.0
        checks.append(CheckResult(f"stable[{name}]", bool(rel <= stabilization), f"relative change {rel:.3e}"))

    p = ledger.p
    if all(np.isfinite(r.phiD_norm) for r in rows):
        C = rows[0].phi_norm / (1.0 + rows[0].phiD_norm)
        ok = all(r.phi_norm <= growth * C * (1.0 + r.phiD_norm) + abs_tol for r in rows)
        checks.append(CheckResult("potential-bound", ok, f"C = {C:.6g}"))
        Cf = rows[0].f_eps_integral / (1.0 + rows[0].phiD_norm ** p)
        ok = all(r.f_eps_integral <= growth * Cf * (1.0 + r.phiD_norm ** p) + abs_tol for r in rows)
        checks.append(CheckResult("source-bound", ok, f"C = {Cf:.6g}"))

    cd = rows[0].du_ratio
    ok = all(r.du_ratio <= growth * cd + abs_tol for r in rows)
    checks.append(CheckResult("time-derivative-bound", ok, f"fitted c = {cd:.6g}"))

    dists = np.array([r.cauchy_dist for r in rows[1:]])
    if np.all(dists <= abs_tol):
        ok, detail = True, "all distances vanish"
    else:
        ok = bool(np.all(np.diff(dists) < 0))
        detail = "distances " + ", ".join(f"{d:.3e}" for d in dists)
    checks.append(CheckResult("cauchy-decreasing", ok, detail))
    return VerificationReport(checks)
