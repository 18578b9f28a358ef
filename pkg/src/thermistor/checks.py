"""Seeded property suites behind ``thermistor check``.

Each suite returns a list of :class:`CheckResult`; a suite passes when all
of its results pass.
"""
from __future__ import annotations

import math
import time

import numpy as np

from .constitutive import (ConstitutiveSpec, Profile, iv_characteristic, monotonicity_gap,
                           scalar_vector_equivalence_check, h1_witness, verify_h1)
from .errors import StructuralError
from .estimates import (CheckResult, interpolation_check, lambda_from_q, phi_lambda, psi_lambda,
                        psi_lower_bound)
from .mesh import build_rect_mesh

MONOTONICITY_P = (1.2, 1.5, 2.0, 3.0, 4.0)
MONOTONICITY_DELTA = (0.0, 0.1, 1.0)
PHIPSI_LAMBDAS = (0.1, lambda_from_q(9 / 8), 0.9)
INTERPOLATION_Q = (1.05, 9 / 8, 1.15)


def _disk(rng, n, radius):
    r = radius * np.sqrt(rng.uniform(0.0, 1.0, n))
    a = rng.uniform(0.0, 2 * np.pi, n)
    return np.column_stack([r * np.cos(a), r * np.sin(a)])


def monotonicity_suite(samples=100_000, seed=0, radius=10.0):
    """Lower bounds of the vector flux and its strict monotonicity on random pairs."""
    rng = np.random.default_rng(seed)
    out = []
    for p in MONOTONICITY_P:
        for delta in MONOTONICITY_DELTA:
            if p < 2 and delta == 0:
                continue
            xi = _disk(rng, samples, radius)
            xibar = _disk(rng, samples, radius)
            # a slice of nearly coincident pairs probes the strictness claim
            k = samples // 10
            xibar[:k] = xi[:k] + _disk(rng, k, 1e-6)
            lhs, lower = monotonicity_gap(xi, xibar, p, delta)
            bound_ok = lhs >= lower - 1e-12 * (1 + np.abs(lhs))
            dist = np.linalg.norm(xi - xibar, axis=1)
            strict_ok = (lhs > 0) | (dist <= 1e-9)
            ok = bool(bound_ok.all() and strict_ok.all())
            worst = float(np.min(lhs - lower))
            out.append(CheckResult(f"monotonicity[p={p:g}, delta={delta:g}]", ok,
                                   f"{samples} pairs, min(lhs - lower) = {worst:.3e}, "
                                   f"{int((~strict_ok).sum())} non-strict"))
    return out


def _prototype_specs():
    sat = Profile("saturating", (0.5, 2.0))
    return [
        ConstitutiveSpec(p=2.0, delta=1.0, sigma0=sat),
        ConstitutiveSpec(p=1.5, delta=1.0, sigma0=Profile("constant", (1.0,))),
        ConstitutiveSpec(p=1.2, delta=0.1, sigma0=sat),
        ConstitutiveSpec(p=3.0, delta=0.0, sigma0=sat),
        ConstitutiveSpec(p=3.0, delta=0.1, sigma0=Profile("poly", (-2.0, 2.0, 1.0, 0.0, 1.0))),
        ConstitutiveSpec(p=4.0, delta=1.0, sigma0=Profile("table", (-1.0, 0.5, 0.0, 1.0, 1.0, 3.0))),
    ]


def h1_suite(samples=100_000, seed=0):
    """Growth constants for prototype conductivities, re-verified on fresh draws,
    plus the scalar/vector monotonicity equivalence and I-V monotonicity."""
    out = []
    for spec in _prototype_specs():
        name = f"h1[p={spec.p:g}, delta={spec.delta:g}, sigma0={spec.sigma0.shape}]"
        consts = h1_witness(spec)
        try:
            verify_h1(spec, consts, samples=samples, seed=seed)
            out.append(CheckResult(name, True, f"c1={consts.c1:.6g} c2={consts.c2:.6g} c3={consts.c3:.6g}"))
        except StructuralError as exc:
            out.append(CheckResult(name, False, str(exc)))

        v = np.linspace(0.0, 10.0, 1001)
        cur = iv_characteristic(0.3, v, spec)
        out.append(CheckResult(f"iv-increasing[p={spec.p:g}, delta={spec.delta:g}]",
                               bool(np.all(np.diff(cur) > 0)), "strictly increasing on [0, 10]"))

    n_eq = max(100, min(samples, 20_000))
    for p, delta in ((2.0, 0.0), (1.5, 0.5), (1.2, 0.1), (3.0, 0.0), (4.0, 1.0)):
        res = scalar_vector_equivalence_check(
            lambda t, p=p, d=delta: (d + np.asarray(t) ** 2) ** ((p - 2) / 2) if d > 0 or p >= 2
            else np.asarray(t) ** (p - 2), samples=n_eq, seed=seed)
        out.append(CheckResult(f"equivalence[p={p:g}, delta={delta:g}]", bool(res.holds and res.equivalent),
                               "scalar and vector monotonicity both hold"))
    bad = scalar_vector_equivalence_check(lambda t: 1.0 / (1.0 + np.asarray(t) ** 2), samples=n_eq, seed=seed)
    out.append(CheckResult("equivalence[a=1/(1+t^2)]", (not bad.holds) and bad.equivalent and bad.witness is not None,
                           f"non-monotone flux detected, witness {bad.witness}"))
    return out


def _random_field(rng, n, kind):
    if kind == 0:
        return rng.normal(size=n)
    if kind == 1:
        return rng.standard_cauchy(size=n)
    if kind == 2:
        z = np.zeros(n)
        idx = rng.choice(n, size=max(1, n // 50), replace=False)
        z[idx] = rng.exponential(10.0, idx.size)
        return z
    return rng.uniform(0.0, 1.0, n) ** 8


def interpolation_suite(samples=1000, seed=0, nx=16):
    """Discrete interpolation inequality on random fields, with equality on constants."""
    rng = np.random.default_rng(seed)
    mesh = build_rect_mesh(nx, nx)
    out = []
    for q in INTERPOLATION_Q:
        worst = 0.0
        ok = True
        for i in range(samples):
            lhs, rhs = interpolation_check(_random_field(rng, mesh.n_nodes, i % 4), q, mesh)
            ok &= lhs <= rhs * (1 + 1e-10)
            worst = max(worst, lhs / rhs if rhs > 0 else 0.0)
        out.append(CheckResult(f"interpolation[q={q:g}]", bool(ok), f"{samples} fields, max lhs/rhs = {worst:.12f}"))
        gaps = []
        for c in (1.0, -3.5, 1e-3, 250.0):
            lhs, rhs = interpolation_check(np.full(mesh.n_nodes, c), q, mesh)
            gaps.append(abs(lhs - rhs) / abs(c))
        out.append(CheckResult(f"interpolation-equality[q={q:g}]", max(gaps) <= 1e-12,
                               f"max relative gap on constants {max(gaps):.2e}"))
    return out


def phipsi_suite(samples=100_000, seed=0, points=1000):
    """Psi' = Phi by central differences (second order) and the two-sided Psi bounds."""
    rng = np.random.default_rng(seed)
    out = []
    for lam in PHIPSI_LAMBDAS:
        s = rng.uniform(0.05, 10.0, points) * rng.choice((-1.0, 1.0), points)
        errs = []
        for h in (1e-2, 5e-3):
            fd = (psi_lambda(s + h, lam) - psi_lambda(s - h, lam)) / (2 * h)
            errs.append(float(np.max(np.abs(fd - phi_lambda(s, lam)))))
        order = math.log2(errs[0] / errs[1])
        out.append(CheckResult(f"psi-derivative[lambda={lam:g}]", order >= 1.9,
                               f"errors {errs[0]:.3e}, {errs[1]:.3e}, order {order:.3f}"))

        mag = np.concatenate([rng.uniform(0.0, 10.0, samples // 2),
                              10.0 ** rng.uniform(-8, 8, samples - samples // 2)])
        s = mag * rng.choice((-1.0, 1.0), mag.size)
        psi = psi_lambda(s, lam)
        ok = bool(np.all(psi_lower_bound(s, lam) <= psi + 1e-12) and np.all(psi <= np.abs(s) + 1e-12))
        out.append(CheckResult(f"psi-bounds[lambda={lam:g}]", ok, f"{s.size} samples"))
    return out


SUITES = {
    "monotonicity": monotonicity_suite,
    "h1": h1_suite,
    "interpolation": interpolation_suite,
    "phipsi": phipsi_suite,
}

DEFAULT_SAMPLES = {"monotonicity": 100_000, "h1": 100_000, "interpolation": 1000, "phipsi": 100_000}


def run_suite(name, samples=None, seed=0):
    """Return (results, elapsed seconds)."""
    fn = SUITES[name]
    start = time.perf_counter()
    results = fn(samples=DEFAULT_SAMPLES[name] if samples is None else samples, seed=seed)
    return results, time.perf_counter() - start
