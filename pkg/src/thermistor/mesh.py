"""Structured P1 triangulations of a rectangle with tagged boundary edges."""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigurationError

DIRICHLET = "D"
NEUMANN = "N"
SIDES = ("bottom", "right", "top", "left")


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangulation of ``[0, lx] x [0, ly]``.

    ``boundary_edges`` is an (E, 2) array of node indices, ``edge_tags`` the
    matching array of ``"D"`` / ``"N"`` tags.  Geometric quantities that the
    assemblers need repeatedly are cached on first access.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    edge_tags: np.ndarray
    lx: float
    ly: float
    nx: int = 0
    ny: int = 0
    dirichlet_sides: tuple = field(default=())

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def areas(self) -> np.ndarray:
        return np.abs(self.signed_areas)

    @cached_property
    def basis_gradients(self) -> np.ndarray:
        """(T, 3, 2) constant gradients of the three barycentric functions."""
        p = self.nodes[self.triangles]
        x, y = p[..., 0], p[..., 1]
        two_a = 2.0 * self.signed_areas[:, None]
        gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
        gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
        return np.stack([gx / two_a, gy / two_a], axis=-1)

    @cached_property
    def barycenters(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        d = self.nodes[self.boundary_edges[:, 1]] - self.nodes[self.boundary_edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    @cached_property
    def dirichlet_nodes(self) -> np.ndarray:
        mask = self.edge_tags == DIRICHLET
        return np.unique(self.boundary_edges[mask].ravel())

    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        return np.unique(self.boundary_edges.ravel())

    @cached_property
    def lumped_mass(self) -> np.ndarray:
        """Nodal weights ``sum_K |K|/3``; they sum to the domain area."""
        m = np.zeros(self.n_nodes)
        np.add.at(m, self.triangles.ravel(), np.repeat(self.areas / 3.0, 3))
        return m

    def barycentric_mean(self, values: np.ndarray) -> np.ndarray:
        """Value of a P1 field at every triangle barycenter."""
        return np.asarray(values)[self.triangles].mean(axis=1)

    def gradient(self, values: np.ndarray) -> np.ndarray:
        """(T, 2) per-triangle gradient of a P1 field."""
        v = np.asarray(values, dtype=float)[self.triangles]
        return np.einsum("tk,tkd->td", v, self.basis_gradients)

    def side_nodes(self, side: str) -> np.ndarray:
        x, y = self.nodes[:, 0], self.nodes[:, 1]
        tol = 1e-12 * max(self.lx, self.ly)
        sel = {
            "left": np.abs(x) <= tol,
            "right": np.abs(x - self.lx) <= tol,
            "bottom": np.abs(y) <= tol,
            "top": np.abs(y - self.ly) <= tol,
        }[side]
        return np.flatnonzero(sel)


def build_rect_mesh(nx: int, ny: int, lx: float = 1.0, ly: float = 1.0,
                    dirichlet_sides=("left", "right")) -> Mesh:
    """Uniform ``nx`` x ``ny`` grid, every cell cut along its lower-left to
    upper-right diagonal.  Nodes are numbered row-major (x fastest)."""
    sides = tuple(dirichlet_sides)
    if nx < 1 or ny < 1:
        raise ConfigurationError(f"cell counts must be >= 1, got nx={nx}, ny={ny}")
    if not (lx > 0 and ly > 0):
        raise ConfigurationError(f"domain extents must be positive, got lx={lx}, ly={ly}")
    if not sides:
        raise ConfigurationError("dirichlet_sides is empty: the Dirichlet boundary must be non-empty")
    unknown = set(sides) - set(SIDES)
    if unknown:
        raise ConfigurationError(f"unknown side(s) {sorted(unknown)}; expected a subset of {SIDES}")

    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def idx(i, j):
        return j * (nx + 1) + i

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    n0, n1, n2, n3 = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
    tris = np.empty((2 * nx * ny, 3), dtype=np.int64)
    tris[0::2] = np.column_stack([n0, n1, n2])
    tris[1::2] = np.column_stack([n0, n2, n3])

    # counterclockwise loop: bottom, right, top, left
    edges, tags = [], []
    runs = {
        "bottom": [(idx(k, 0), idx(k + 1, 0)) for k in range(nx)],
        "right": [(idx(nx, k), idx(nx, k + 1)) for k in range(ny)],
        "top": [(idx(k + 1, ny), idx(k, ny)) for k in reversed(range(nx))],
        "left": [(idx(0, k + 1), idx(0, k)) for k in reversed(range(ny))],
    }
    for side in SIDES:
        edges.extend(runs[side])
        tags.extend([DIRICHLET if side in sides else NEUMANN] * len(runs[side]))

    return Mesh(nodes=nodes, triangles=tris,
                boundary_edges=np.asarray(edges, dtype=np.int64),
                edge_tags=np.asarray(tags), lx=float(lx), ly=float(ly),
                nx=nx, ny=ny, dirichlet_sides=sides)


@dataclass
class ValidationReport:
    ok: bool
    problems: list[str]
    total_area: float = 0.0


def validate(mesh: Mesh) -> ValidationReport:
    problems = []
    areas = mesh.signed_areas
    bad = np.flatnonzero(areas <= 0)
    for t in bad[:10]:
        problems.append(f"triangle {t} has non-positive signed area {areas[t]:.3e} (clockwise or degenerate)")
    if len(bad) > 10:
        problems.append(f"... {len(bad) - 10} more non-positive triangles")

    counts = Counter()
    for tri in mesh.triangles:
        a, b, c = (int(v) for v in tri)
        for e in ((a, b), (b, c), (c, a)):
            counts[frozenset(e)] += 1
    over = [e for e, c in counts.items() if c > 2]
    if over:
        problems.append(f"{len(over)} edge(s) shared by more than two triangles")
    topo_boundary = {e for e, c in counts.items() if c == 1}

    bedges = [frozenset(map(int, e)) for e in mesh.boundary_edges]
    bcount = Counter(bedges)
    dup = [e for e, c in bcount.items() if c > 1]
    if dup:
        problems.append(f"boundary loop violation: {len(dup)} duplicated boundary edge(s), "
                        f"e.g. {sorted(next(iter(dup)))}")
    bset = set(bedges)
    if bset - topo_boundary:
        problems.append(f"{len(bset - topo_boundary)} tagged boundary edge(s) do not belong to exactly one triangle")
    if topo_boundary - bset:
        problems.append(f"{len(topo_boundary - bset)} boundary edge(s) of the triangulation are untagged")

    degree = defaultdict(int)
    adj = defaultdict(set)
    for e in mesh.boundary_edges:
        a, b = int(e[0]), int(e[1])
        degree[a] += 1
        degree[b] += 1
        adj[a].add(b)
        adj[b].add(a)
    if any(d != 2 for d in degree.values()):
        problems.append("boundary loop violation: some boundary node is not incident to exactly two boundary edges")
    if adj:
        start = next(iter(adj))
        seen, stack = {start}, [start]
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        if len(seen) != len(adj):
            problems.append("boundary loop violation: boundary edges form more than one component")
    else:
        problems.append("mesh has no boundary edges")

    if len(mesh.edge_tags) != len(mesh.boundary_edges):
        problems.append("edge tag count does not match boundary edge count")
    if not np.any(mesh.edge_tags == DIRICHLET):
        problems.append("Dirichlet edge set is empty")

    return ValidationReport(ok=not problems, problems=problems, total_area=float(areas.sum()))
