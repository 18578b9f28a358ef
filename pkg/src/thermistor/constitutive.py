"""Constitutive laws of the thermistor model and numerical checks of their
structural properties (growth bounds, strict monotonicity).

The conductivity prototype is ``sigma(u, tau) = sigma0(u) (delta + tau^2)^((p-2)/2)``
and the heat source is the loss-scaled Joule heat
``f = eta * sigma(u, |xi|) |xi|^2``.

Current-voltage note: for ``delta -> 0`` the characteristic
``I = sigma0(u) (delta + V^2)^((p-2)/2) V`` tends to ``sigma0(u) V^(p-1)``.
Some literature prints the limit law with exponent ``p - 2``; that form is
inconsistent with ``p = alpha + 1`` and is not offered here.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConfigurationError, SingularEvaluationError, StructuralError

PROFILE_SHAPES = ("constant", "saturating", "table", "poly")


@dataclass(frozen=True)
class Profile:
    """Bounded scalar map of temperature.

    shapes:
      constant    params = (c,)
      saturating  params = (lo, hi):  lo + (hi - lo) / (1 + exp(-u))
      table       params = (u0, v0, u1, v1, ...): piecewise linear, flat outside
      poly        params = (umin, umax, c0, c1, ...): sum c_k v^k with v = clip(u, umin, umax)
    """

    shape: str = "constant"
    params: tuple = (1.0,)

    def __post_init__(self):
        if self.shape not in PROFILE_SHAPES:
            raise ConfigurationError(f"unknown profile shape {self.shape!r}; expected one of {PROFILE_SHAPES}")
        n = len(self.params)
        if self.shape == "constant" and n != 1:
            raise ConfigurationError("constant profile takes exactly one parameter")
        if self.shape == "saturating":
            if n != 2:
                raise ConfigurationError("saturating profile takes two parameters (lo, hi)")
            if not self.params[0] <= self.params[1]:
                raise ConfigurationError("saturating profile needs lo <= hi")
        if self.shape == "table":
            if n < 4 or n % 2:
                raise ConfigurationError("table profile needs an even number (>= 4) of parameters u0 v0 u1 v1 ...")
            if np.any(np.diff(self.params[0::2]) <= 0):
                raise ConfigurationError("table abscissae must be strictly increasing")
        if self.shape == "poly":
            if n < 3:
                raise ConfigurationError("poly profile needs umin, umax and at least one coefficient")
            if not self.params[0] < self.params[1]:
                raise ConfigurationError("poly profile needs umin < umax")

    @property
    def bounds(self) -> tuple[float, float]:
        if self.shape == "constant":
            return float(self.params[0]), float(self.params[0])
        if self.shape == "saturating":
            return float(self.params[0]), float(self.params[1])
        if self.shape == "table":
            vals = self.params[1::2]
            return float(min(vals)), float(max(vals))
        lo, hi = self.params[0], self.params[1]
        poly = np.polynomial.Polynomial(self.params[2:])
        crit = [r.real for r in poly.deriv().roots() if abs(r.imag) < 1e-14 and lo < r.real < hi]
        vals = poly(np.array([lo, hi, *crit]))
        return float(vals.min()), float(vals.max())

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.shape == "constant":
            return np.full_like(u, self.params[0])
        if self.shape == "saturating":
            lo, hi = self.params
            # clip keeps exp finite for extreme temperatures
            return lo + (hi - lo) / (1.0 + np.exp(-np.clip(u, -700.0, 700.0)))
        if self.shape == "table":
            return np.interp(u, self.params[0::2], self.params[1::2])
        v = np.clip(u, self.params[0], self.params[1])
        return np.polynomial.polynomial.polyval(v, self.params[2:])


@dataclass(frozen=True)
class ConstitutiveSpec:
    p: float = 2.0
    delta: float = 1.0
    sigma0: Profile = field(default_factory=Profile)
    kappa: Profile = field(default_factory=Profile)
    eta1: float = 1.0
    # constant in [0, eta1] or a callable (x, t, u, jhat) -> values in [0, eta1]
    eta: Optional[object] = None
    # callable (u, xi) -> scalar; None means a = sigma(u, |xi|)
    a_coeff: Optional[Callable] = None
    g: float = 1.0
    h: float = 0.0

    def __post_init__(self):
        errs = spec_errors(self)
        if errs:
            raise ConfigurationError("; ".join(errs))

    @property
    def eta_value(self):
        return self.eta1 if self.eta is None else self.eta


def spec_errors(spec: ConstitutiveSpec) -> list[str]:
    errs = []
    if not (spec.p > 1 and np.isfinite(spec.p)):
        errs.append(f"p must lie in (1, inf), got {spec.p}")
    if spec.delta < 0:
        errs.append(f"delta must be >= 0, got {spec.delta}")
    elif spec.p < 2 and spec.delta == 0:
        errs.append("delta must be > 0 when p < 2")
    lo, _ = spec.sigma0.bounds
    if lo <= 0:
        errs.append("sigma0 lower bound must be > 0")
    lo, _ = spec.kappa.bounds
    if lo <= 0:
        errs.append("kappa lower bound must be > 0")
    if spec.eta1 < 0:
        errs.append(f"eta1 must be >= 0, got {spec.eta1}")
    if spec.eta is not None and not callable(spec.eta):
        if not 0 <= float(spec.eta) <= spec.eta1:
            errs.append(f"constant eta must lie in [0, eta1={spec.eta1}]")
    if not spec.g > 0:
        errs.append(f"g must be > 0, got {spec.g}")
    if not np.isfinite(spec.h):
        errs.append("h must be finite")
    return errs


def _flux_factor(tau, p, delta):
    """(delta + tau^2)^((p-2)/2), raising on the singular point."""
    tau = np.asarray(tau, dtype=float)
    base = delta + tau * tau
    if p < 2 and np.any(base == 0):
        raise SingularEvaluationError("sigma is singular at tau = 0 for p < 2 and delta = 0")
    if p == 2:
        return np.ones_like(base)
    return base ** ((p - 2) / 2)


def sigma(u, tau, spec: ConstitutiveSpec):
    if np.any(np.asarray(tau) < 0):
        raise ValueError("tau must be non-negative")
    return spec.sigma0(u) * _flux_factor(tau, spec.p, spec.delta)


def kappa(u, spec: ConstitutiveSpec):
    return spec.kappa(u)


def _eta(x, t, u, xi, spec):
    eta = spec.eta_value
    if not callable(eta):
        return eta
    xi = np.asarray(xi, dtype=float)
    if spec.a_coeff is None:
        a = sigma(u, np.linalg.norm(xi, axis=-1), spec)
    else:
        a = spec.a_coeff(u, -xi)
    jhat = -np.asarray(a)[..., None] * xi
    return np.clip(eta(x, t, u, jhat), 0.0, spec.eta1)


def source_f(x, t, u, xi, spec: ConstitutiveSpec):
    """Joule source eta * sigma(u, |xi|) |xi|^2 (vectorised over leading axes of xi)."""
    xi = np.asarray(xi, dtype=float)
    tau2 = np.einsum("...d,...d->...", xi, xi)
    s = sigma(u, np.sqrt(tau2), spec)
    return _eta(x, t, u, xi, spec) * s * tau2


def regularize(f, eps):
    """f / (1 + eps f): bounded by 1/eps and by f itself."""
    if not eps > 0:
        raise ConfigurationError(f"eps must be > 0, got {eps}")
    f = np.asarray(f, dtype=float)
    return f / (1.0 + eps * f)


def source_f_eps(x, t, u, xi, eps, spec: ConstitutiveSpec):
    if not eps > 0:
        raise ConfigurationError(f"eps must be > 0, got {eps}")
    return regularize(source_f(x, t, u, xi, spec), eps)


def iv_characteristic(u, V, spec: ConstitutiveSpec):
    V = np.asarray(V, dtype=float)
    if np.any(V < 0):
        raise ValueError("voltage must be non-negative")
    return spec.sigma0(u) * _flux_factor(V, spec.p, spec.delta) * V


def iv_limit(u, V, spec: ConstitutiveSpec):
    """delta -> 0 limit of the characteristic: sigma0(u) V^(p-1)."""
    return spec.sigma0(u) * np.asarray(V, dtype=float) ** (spec.p - 1)


def monotonicity_gap(xi, xibar, p, delta):
    """Return ``(lhs, lower_bound)`` for the vector field
    ``xi -> (delta + |xi|^2)^((p-2)/2) xi``.

    For 1 < p <= 2 the bound is (p-1)|xi-xibar|^2 / (delta + |xi|^2 + |xibar|^2)^((2-p)/2),
    for p >= 2 it is min(1/2, 2^(2-p)) |xi-xibar|^p.  Inputs broadcast over
    leading axes; the last axis is the vector component.
    """
    xi = np.asarray(xi, dtype=float)
    xibar = np.asarray(xibar, dtype=float)
    if p < 2 and delta == 0:
        raise SingularEvaluationError("monotonicity bound for p < 2 needs delta > 0")
    n2 = np.einsum("...d,...d->...", xi, xi)
    m2 = np.einsum("...d,...d->...", xibar, xibar)
    a = (delta + n2) ** ((p - 2) / 2)
    b = (delta + m2) ** ((p - 2) / 2)
    diff = xi - xibar
    d2 = np.einsum("...d,...d->...", diff, diff)
    lhs = np.einsum("...d,...d->...", a[..., None] * xi - b[..., None] * xibar, diff)
    if p <= 2:
        lower = (p - 1) * d2 / (delta + n2 + m2) ** ((2 - p) / 2)
        lower = np.where(d2 == 0, 0.0, lower)
    else:
        lower = min(0.5, 2.0 ** (2 - p)) * d2 ** (p / 2)
    return lhs, lower


@dataclass
class EquivalenceResult:
    holds: bool
    scalar_monotone: bool
    vector_monotone: bool
    witness: Optional[tuple] = None

    @property
    def equivalent(self) -> bool:
        return self.scalar_monotone == self.vector_monotone

    def __bool__(self):
        return self.holds


def scalar_vector_equivalence_check(a_profile: Callable, samples: int = 2000,
                                    tau_max: float = 10.0, seed: int = 0) -> EquivalenceResult:
    """Sample the scalar statement (a(t)t - a(s)s)(t - s) > 0 and the vector
    statement (a(|x|)x - a(|y|)y).(x - y) > 0 on matched draws (|x| = t,
    |y| = s, random directions plus the collinear case).

    ``holds`` is true only when both statements hold on every sample; a
    witness (t, s) is returned otherwise.
    """
    rng = np.random.default_rng(seed)
    grid = np.linspace(0.0, tau_max, 201)
    t = np.concatenate([rng.uniform(0, tau_max, samples), grid[:-1]])
    s = np.concatenate([rng.uniform(0, tau_max, samples), grid[1:]])
    keep = t != s
    t, s = t[keep], s[keep]
    at, as_ = np.asarray(a_profile(t), float), np.asarray(a_profile(s), float)
    scalar = (at * t - as_ * s) * (t - s)
    scalar_ok = bool(np.all(scalar > 0))

    theta = rng.uniform(0, 2 * np.pi, t.size)
    rot = rng.uniform(0, 2 * np.pi, t.size)
    vector_ok = True
    witness = None
    for angle in (rot, np.zeros_like(rot)):
        x = t[:, None] * np.column_stack([np.cos(theta), np.sin(theta)])
        y = s[:, None] * np.column_stack([np.cos(theta + angle), np.sin(theta + angle)])
        val = np.einsum("nd,nd->n", at[:, None] * x - as_[:, None] * y, x - y)
        nonzero = np.einsum("nd,nd->n", x - y, x - y) > 0
        fail = np.flatnonzero(nonzero & ~(val > 0))
        if fail.size:
            vector_ok = False
            witness = witness or (float(t[fail[0]]), float(s[fail[0]]))
    if not scalar_ok:
        k = int(np.flatnonzero(~(scalar > 0))[0])
        witness = (float(t[k]), float(s[k]))
    return EquivalenceResult(scalar_ok and vector_ok, scalar_ok, vector_ok, witness)


@dataclass
class H1Constants:
    c1: float
    c2: float
    c3: float


def h1_witness(spec: ConstitutiveSpec, tau_max: float = 100.0, samples: int = 20001) -> H1Constants:
    """Constants with ``c1 tau^p - c2 <= sigma tau^2`` and
    ``sigma <= c3 (1 + tau^2)^((p-2)/2)`` on ``[0, tau_max]``.

    The temperature factor separates, so the scan runs over tau only and
    scales by the declared bounds of sigma0.
    """
    p, delta = spec.p, spec.delta
    lo, hi = spec.sigma0.bounds
    tau = np.linspace(0.0, tau_max, samples)[1:]
    s = _flux_factor(tau, p, delta)
    growth = s * tau ** 2 / tau ** p
    upper = s / (1.0 + tau ** 2) ** ((p - 2) / 2)
    if delta > 0:
        # for p < 2 and delta < 1 the ratio peaks at tau = 0
        upper = np.append(upper, _flux_factor(0.0, p, delta))
    if p == 2:
        return H1Constants(lo, 0.0, hi)
    if delta == 0 and p > 2:
        return H1Constants(lo, 0.0, hi * float(upper.max()))
    tail = tau >= min(1.0, tau_max)
    c1 = lo * float(growth[tail].min())
    gap = c1 * tau ** p - lo * s * tau ** 2
    k = int(np.argmax(gap))
    c2 = max(0.0, float(gap[k]))
    if c2 > 0:
        # polish the grid maximum, the gap is smooth in tau
        lo_t, hi_t = tau[max(k - 1, 0)], tau[min(k + 1, tau.size - 1)]
        res = minimize_scalar(lambda t: -(c1 * t ** p - lo * _flux_factor(t, p, delta) * t ** 2),
                              bounds=(lo_t, hi_t), method="bounded", options={"xatol": 1e-12})
        c2 = max(c2, -float(res.fun)) * (1 + 1e-9) + 1e-12
    c3 = hi * float(upper.max()) * (1 + 1e-12)
    return H1Constants(c1, c2, c3)


def verify_h1(spec: ConstitutiveSpec, consts: H1Constants, tau_max: float = 100.0,
              samples: int = 100_000, seed: int = 1, u_range: float = 50.0) -> None:
    """Re-check the growth bounds on a fresh random sample; raise StructuralError on failure."""
    rng = np.random.default_rng(seed)
    tau = rng.uniform(0.0, tau_max, samples)
    u = rng.uniform(-u_range, u_range, samples)
    if spec.p < 2 and spec.delta == 0:
        tau = tau[tau > 0]
        u = u[: tau.size]
    sig = sigma(u, tau, spec)
    lower_ok = consts.c1 * tau ** spec.p - consts.c2 <= sig * tau ** 2 * (1 + 1e-12) + 1e-12
    upper_ok = sig <= consts.c3 * (1 + tau ** 2) ** ((spec.p - 2) / 2) * (1 + 1e-12)
    if not lower_ok.all():
        k = int(np.flatnonzero(~lower_ok)[0])
        raise StructuralError(f"coercivity bound fails at u={u[k]:.6g}, tau={tau[k]:.6g}")
    if not upper_ok.all():
        k = int(np.flatnonzero(~upper_ok)[0])
        raise StructuralError(f"growth bound fails at u={u[k]:.6g}, tau={tau[k]:.6g}")
