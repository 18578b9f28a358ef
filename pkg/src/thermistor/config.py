"""Line-oriented run configuration: ``section.key = value`` with ``#`` comments.

All problems in a document are collected and reported together, each with
its line number.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .constitutive import PROFILE_SHAPES, ConstitutiveSpec, Profile
from .coupling import DEFAULT_EPS, CouplingConfig, ExpressionBoundary, SideBoundary
from .errors import ConfigurationError
from .estimates import lambda_from_q
from .expr import compile_expression
from .heat import sample_initial
from .mesh import SIDES, build_rect_mesh


class ConfigError(ConfigurationError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("\n".join(self.problems))


@dataclass
class MeshBlock:
    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0
    dirichlet_sides: tuple = ("left", "right")

    def build(self):
        return build_rect_mesh(self.nx, self.ny, self.lx, self.ly, self.dirichlet_sides)


@dataclass
class BoundaryBlock:
    """kind: ``constant`` (value per side), ``expression`` (phi_D(x, y)) or
    ``ramp`` (value per side times min(t / t_ramp, 1))."""

    kind: str = "constant"
    sides: tuple = ()  # ((side, value), ...)
    expr: str = ""
    t_ramp: Optional[float] = None

    def data(self):
        if self.kind == "expression":
            fn = compile_expression(self.expr)
            return ExpressionBoundary(lambda x, y, t: fn(x, y), self.expr)
        return SideBoundary(self.sides, self.t_ramp if self.kind == "ramp" else None)


@dataclass
class InitialBlock:
    u0: str = "0"
    rough: bool = False

    def nodal(self, mesh):
        return sample_initial(mesh, compile_expression(self.u0), rough=self.rough)


@dataclass
class OutputBlock:
    directory: str = "out"
    formats: tuple = ("csv",)
    stride: int = 1


@dataclass
class RunConfig:
    mesh: MeshBlock
    spec: ConstitutiveSpec
    coupling: CouplingConfig
    boundary: BoundaryBlock
    initial: InitialBlock
    output: OutputBlock = field(default_factory=OutputBlock)


# ------------------------------------------------------------------ parsing

def _float(s):
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("not finite")
    return v


def _int(s):
    return int(s)


def _floats(s):
    return tuple(_float(t) for t in s.split(",") if t.strip())


def _words(s):
    return tuple(t.strip() for t in s.split(",") if t.strip())


def _bool(s):
    low = s.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError("expected true/false")


def _opt_int(s):
    return None if s.strip().lower() == "none" else int(s)


def _opt_float(s):
    return None if s.strip().lower() == "none" else _float(s)


def _str(s):
    return s.strip()


# key -> (converter, default); a default of _REQUIRED marks mandatory keys
_REQUIRED = object()
_SCHEMA = {
    "mesh.nx": (_int, _REQUIRED),
    "mesh.ny": (_int, _REQUIRED),
    "mesh.lx": (_float, 1.0),
    "mesh.ly": (_float, 1.0),
    "mesh.dirichlet_sides": (_words, ("left", "right")),
    "constitutive.p": (_float, _REQUIRED),
    "constitutive.delta": (_float, 1.0),
    "constitutive.sigma0.shape": (_str, "constant"),
    "constitutive.sigma0.params": (_floats, (1.0,)),
    "constitutive.kappa.shape": (_str, "constant"),
    "constitutive.kappa.params": (_floats, (1.0,)),
    "constitutive.eta1": (_float, 1.0),
    "constitutive.g": (_float, 1.0),
    "constitutive.h": (_float, 0.0),
    "coupling.T_final": (_float, 1.0),
    "coupling.steps": (_int, 10),
    "coupling.eps_schedule": (_floats, DEFAULT_EPS),
    "coupling.fp_rtol": (_float, 1e-8),
    "coupling.fp_max_iter": (_int, 50),
    "coupling.kacanov_rtol": (_float, 1e-8),
    "coupling.kacanov_max_iter": (_int, 500),
    "coupling.linear_rtol": (_float, 1e-12),
    "coupling.linear_max_iter": (_opt_int, None),
    "coupling.q": (_float, 9 / 8),
    "coupling.r": (_float, 1.5),
    "coupling.lambda": (_opt_float, None),
    "coupling.omega": (_float, 1.0),
    "coupling.lumped": (_bool, False),
    "coupling.seed": (_str, "previous"),
    "coupling.warm_start": (_bool, True),
    "boundary.kind": (_str, "constant"),
    "boundary.expr": (_str, ""),
    "boundary.t_ramp": (_opt_float, None),
    "initial.u0": (_str, _REQUIRED),
    "initial.rough": (_bool, False),
    "output.directory": (_str, "out"),
    "output.formats": (_words, ("csv",)),
    "output.stride": (_int, 1),
}
for _side in SIDES:
    _SCHEMA[f"boundary.{_side}"] = (_float, None)


def parse_config(text: str) -> RunConfig:
    problems = []
    raw, lines = {}, {}
    for no, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            problems.append(f"line {no}: expected 'section.key = value'")
            continue
        key, value = (part.strip() for part in body.split("=", 1))
        if key not in _SCHEMA:
            problems.append(f"line {no}: unknown key {key!r}")
            continue
        if key in raw:
            problems.append(f"line {no}: duplicate key {key!r} (first set on line {lines[key]})")
            continue
        conv, _ = _SCHEMA[key]
        try:
            raw[key] = conv(value)
            lines[key] = no
        except (ValueError, TypeError) as exc:
            problems.append(f"line {no}: bad value {value!r} for {key}: {exc}")

    def where(key):
        return f"line {lines[key]}" if key in lines else "default"

    def get(key):
        if key in raw:
            return raw[key]
        default = _SCHEMA[key][1]
        return None if default is _REQUIRED else default

    for key, (_, default) in _SCHEMA.items():
        if default is _REQUIRED and key not in raw and not any(p.endswith(f"{key}: ") for p in problems):
            problems.append(f"missing required key {key!r}")

    def check(cond, key, msg):
        if not cond:
            problems.append(f"{where(key)}: {key} {msg}")

    nx, ny = get("mesh.nx"), get("mesh.ny")
    if nx is not None:
        check(nx >= 1, "mesh.nx", "must be >= 1")
    if ny is not None:
        check(ny >= 1, "mesh.ny", "must be >= 1")
    check(get("mesh.lx") > 0, "mesh.lx", "must be > 0")
    check(get("mesh.ly") > 0, "mesh.ly", "must be > 0")
    sides = get("mesh.dirichlet_sides")
    check(len(sides) > 0, "mesh.dirichlet_sides", "must name at least one side (Dirichlet boundary non-empty)")
    check(set(sides) <= set(SIDES), "mesh.dirichlet_sides", f"must be a subset of {SIDES}")

    p, delta = get("constitutive.p"), get("constitutive.delta")
    if p is not None:
        check(p > 1, "constitutive.p", "violates constraint p in (1, inf)")
        if p < 2 and delta == 0:
            problems.append(f"{where('constitutive.delta')}: constitutive.delta must be > 0 when p < 2")
    check(delta >= 0, "constitutive.delta", "must be >= 0")
    check(get("constitutive.eta1") >= 0, "constitutive.eta1", "must be >= 0")
    check(get("constitutive.g") > 0, "constitutive.g", "must be > 0")

    profiles = {}
    for name in ("sigma0", "kappa"):
        shape_key, params_key = f"constitutive.{name}.shape", f"constitutive.{name}.params"
        shape = get(shape_key)
        if shape not in PROFILE_SHAPES:
            problems.append(f"{where(shape_key)}: {shape_key} must be one of {PROFILE_SHAPES}")
            continue
        try:
            prof = Profile(shape, get(params_key))
        except ConfigurationError as exc:
            problems.append(f"{where(params_key)}: {params_key}: {exc}")
            continue
        if prof.bounds[0] <= 0:
            problems.append(f"{where(params_key)}: {name} must be bounded below by a positive constant")
            continue
        profiles[name] = prof

    cfg_kwargs = dict(
        T_final=get("coupling.T_final"), steps=get("coupling.steps"),
        eps_schedule=get("coupling.eps_schedule"), fp_rtol=get("coupling.fp_rtol"),
        fp_max_iter=get("coupling.fp_max_iter"), kacanov_rtol=get("coupling.kacanov_rtol"),
        kacanov_max_iter=get("coupling.kacanov_max_iter"), linear_rtol=get("coupling.linear_rtol"),
        linear_max_iter=get("coupling.linear_max_iter"), q=get("coupling.q"), r=get("coupling.r"),
        lam=get("coupling.lambda"), omega=get("coupling.omega"), lumped=get("coupling.lumped"),
        seed=get("coupling.seed"), warm_start=get("coupling.warm_start"),
    )
    check(cfg_kwargs["T_final"] > 0, "coupling.T_final", "must be > 0")
    check(cfg_kwargs["steps"] >= 1, "coupling.steps", "must be >= 1")
    eps = cfg_kwargs["eps_schedule"]
    check(len(eps) > 0 and all(e > 0 for e in eps), "coupling.eps_schedule", "must list positive values")
    check(all(b < a for a, b in zip(eps, eps[1:])), "coupling.eps_schedule", "must be strictly decreasing")
    for key in ("coupling.fp_rtol", "coupling.kacanov_rtol", "coupling.linear_rtol"):
        check(get(key) > 0, key, "must be > 0")
    for key in ("coupling.fp_max_iter", "coupling.kacanov_max_iter"):
        check(get(key) >= 1, key, "must be >= 1")
    q = cfg_kwargs["q"]
    check(1 < q < 4 / 3, "coupling.q", "must lie in (1, (n+2)/(n+1)) = (1, 4/3)")
    check(1 < cfg_kwargs["r"] < 2, "coupling.r", "must lie in (1, (n+2)/n) = (1, 2)")
    lam = cfg_kwargs["lam"] if cfg_kwargs["lam"] is not None else lambda_from_q(q)
    check(0 < lam < 1, "coupling.lambda", "must lie in (0, 1)")
    check(0 < cfg_kwargs["omega"] <= 1, "coupling.omega", "must lie in (0, 1]")
    check(cfg_kwargs["seed"] in ("previous", "ambient"), "coupling.seed", "must be 'previous' or 'ambient'")

    kind = get("boundary.kind")
    side_vals = tuple((s, raw[f"boundary.{s}"]) for s in SIDES if f"boundary.{s}" in raw)
    if kind not in ("constant", "expression", "ramp"):
        problems.append(f"{where('boundary.kind')}: boundary.kind must be constant, expression or ramp")
    elif kind == "expression":
        try:
            compile_expression(get("boundary.expr"))
        except ConfigurationError as exc:
            problems.append(f"{where('boundary.expr')}: boundary.expr: {exc}")
    else:
        missing = [s for s in sides if f"boundary.{s}" not in raw]
        if missing:
            problems.append(f"boundary: no value given for Dirichlet side(s) {missing}")
        extra = [s for s, _ in side_vals if s not in sides]
        for s in extra:
            problems.append(f"{where('boundary.' + s)}: boundary.{s} set but {s} is not a Dirichlet side")
        if kind == "ramp":
            tr = get("boundary.t_ramp")
            if tr is None or not tr > 0:
                problems.append(f"{where('boundary.t_ramp')}: boundary.t_ramp must be > 0 for a ramp")

    if "initial.u0" in raw:
        try:
            compile_expression(raw["initial.u0"])
        except ConfigurationError as exc:
            problems.append(f"{where('initial.u0')}: initial.u0: {exc}")

    formats = get("output.formats")
    check(set(formats) <= {"csv", "vtk"}, "output.formats", "must be a subset of {csv, vtk}")
    check(get("output.stride") >= 1, "output.stride", "must be >= 1")

    if problems:
        raise ConfigError(problems)

    spec = ConstitutiveSpec(p=p, delta=delta, sigma0=profiles["sigma0"], kappa=profiles["kappa"],
                            eta1=get("constitutive.eta1"), g=get("constitutive.g"), h=get("constitutive.h"))
    return RunConfig(
        mesh=MeshBlock(nx, ny, get("mesh.lx"), get("mesh.ly"), tuple(sides)),
        spec=spec,
        coupling=CouplingConfig(**cfg_kwargs),
        boundary=BoundaryBlock(kind, side_vals if kind != "expression" else (), get("boundary.expr"),
                               get("boundary.t_ramp")),
        initial=InitialBlock(raw["initial.u0"], get("initial.rough")),
        output=OutputBlock(get("output.directory"), tuple(formats), get("output.stride")),
    )


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# -------------------------------------------------------------- serializing

def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def serialize_config(cfg: RunConfig) -> str:
    s, c = cfg.spec, cfg.coupling
    items = [
        ("mesh.nx", cfg.mesh.nx), ("mesh.ny", cfg.mesh.ny), ("mesh.lx", float(cfg.mesh.lx)),
        ("mesh.ly", float(cfg.mesh.ly)), ("mesh.dirichlet_sides", cfg.mesh.dirichlet_sides),
        ("constitutive.p", float(s.p)), ("constitutive.delta", float(s.delta)),
        ("constitutive.sigma0.shape", s.sigma0.shape),
        ("constitutive.sigma0.params", tuple(float(x) for x in s.sigma0.params)),
        ("constitutive.kappa.shape", s.kappa.shape),
        ("constitutive.kappa.params", tuple(float(x) for x in s.kappa.params)),
        ("constitutive.eta1", float(s.eta1)), ("constitutive.g", float(s.g)), ("constitutive.h", float(s.h)),
        ("coupling.T_final", float(c.T_final)), ("coupling.steps", c.steps),
        ("coupling.eps_schedule", tuple(float(e) for e in c.eps_schedule)),
        ("coupling.fp_rtol", float(c.fp_rtol)), ("coupling.fp_max_iter", c.fp_max_iter),
        ("coupling.kacanov_rtol", float(c.kacanov_rtol)), ("coupling.kacanov_max_iter", c.kacanov_max_iter),
        ("coupling.linear_rtol", float(c.linear_rtol)), ("coupling.linear_max_iter", c.linear_max_iter),
        ("coupling.q", float(c.q)), ("coupling.r", float(c.r)),
        ("coupling.lambda", None if c.lam is None else float(c.lam)),
        ("coupling.omega", float(c.omega)), ("coupling.lumped", c.lumped), ("coupling.seed", c.seed),
        ("coupling.warm_start", c.warm_start),
        ("boundary.kind", cfg.boundary.kind),
    ]
    if cfg.boundary.kind == "expression":
        items.append(("boundary.expr", cfg.boundary.expr))
    else:
        items.extend((f"boundary.{side}", float(v)) for side, v in cfg.boundary.sides)
    if cfg.boundary.t_ramp is not None:
        items.append(("boundary.t_ramp", float(cfg.boundary.t_ramp)))
    items += [
        ("initial.u0", cfg.initial.u0), ("initial.rough", cfg.initial.rough),
        ("output.directory", cfg.output.directory), ("output.formats", cfg.output.formats),
        ("output.stride", cfg.output.stride),
    ]
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in items)
