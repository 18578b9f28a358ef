"""CSV, legacy-VTK and plain-text mesh output."""
from __future__ import annotations

import csv
import os

import numpy as np

from .constitutive import ConstitutiveSpec, source_f_eps
from .errors import ThermistorError
from .estimates import LEDGER_COLUMNS, EstimateLedger, lp_norm, w1p_norm
from .mesh import Mesh

TRAJECTORY_COLUMNS = ("t", "step", "fp_iters", "kacanov_iters", "u_L1", "u_L2", "phi_W1p", "f_eps_int")

VTK_TRIANGLE = 5


class OutputError(ThermistorError):
    pass


def format_value(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return "%.17g" % float(v)


def _open(path, mode="w"):
    try:
        return open(path, mode, encoding="utf-8", newline="")
    except OSError as exc:
        raise OutputError(f"cannot open {os.fspath(path)!r}: {exc.strerror}") from exc


def write_table(path, header, rows):
    with _open(path) as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")


def read_table(path):
    """Return (header, rows) with every entry parsed as float."""
    with _open(path, "r") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in line] for line in reader if line]
    return header, rows


def trajectory_rows(traj, spec: ConstitutiveSpec):
    mesh = traj.mesh
    rows = []
    for m, t in enumerate(traj.times):
        u, phi = traj.u[m], traj.phi[m]
        fe = source_f_eps(mesh.barycenters, t, mesh.barycentric_mean(u), mesh.gradient(phi), traj.eps, spec)
        rows.append((float(t), m, int(traj.fp_iterations[m]), int(traj.kacanov_iterations[m]),
                     lp_norm(u, 1.0, mesh), lp_norm(u, 2.0, mesh), w1p_norm(phi, spec.p, mesh),
                     float(mesh.areas @ fe)))
    return rows


def write_trajectory_csv(traj, spec: ConstitutiveSpec, path):
    write_table(path, TRAJECTORY_COLUMNS, trajectory_rows(traj, spec))


def write_ledger_csv(ledger: EstimateLedger, path):
    write_table(path, LEDGER_COLUMNS, [r.values() for r in ledger.rows])


def write_vtk(mesh: Mesh, path, point_data: dict, title="thermistor"):
    n, t = mesh.n_nodes, mesh.n_triangles
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {n} double"]
    lines += [f"{format_value(x)} {format_value(y)} 0" for x, y in mesh.nodes]
    lines.append(f"CELLS {t} {4 * t}")
    lines += [f"3 {i} {j} {k}" for i, j, k in mesh.triangles]
    lines.append(f"CELL_TYPES {t}")
    lines += [str(VTK_TRIANGLE)] * t
    if point_data:
        lines.append(f"POINT_DATA {n}")
        for name, values in point_data.items():
            values = np.asarray(values, dtype=float)
            if values.shape != (n,):
                raise OutputError(f"point data {name!r} has shape {values.shape}, expected ({n},)")
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [format_value(v) for v in values]
    with _open(path) as fh:
        fh.write("\n".join(lines) + "\n")


def write_vtk_series(traj, directory, stride=1, prefix="step"):
    """One file per dumped step (every ``stride``-th plus the last); returns the paths."""
    last = len(traj.u) - 1
    steps = sorted(set(range(0, last + 1, stride)) | {last})
    width = max(4, len(str(last)))
    paths = []
    for m in steps:
        path = os.path.join(directory, f"{prefix}_{m:0{width}d}.vtk")
        write_vtk(traj.mesh, path, {"phi": traj.phi[m], "u": traj.u[m]},
                  title=f"eps={traj.eps:g} t={traj.times[m]:.17g}")
        paths.append(path)
    return paths


def write_mesh_text(mesh: Mesh, path):
    """Sections ``NODES n`` ("x y"), ``TRIANGLES t`` ("i j k"), ``EDGES e`` ("i j TAG")."""
    with _open(path) as fh:
        fh.write(f"NODES {mesh.n_nodes}\n")
        fh.writelines(f"{format_value(x)} {format_value(y)}\n" for x, y in mesh.nodes)
        fh.write(f"TRIANGLES {mesh.n_triangles}\n")
        fh.writelines(f"{i} {j} {k}\n" for i, j, k in mesh.triangles)
        fh.write(f"EDGES {len(mesh.boundary_edges)}\n")
        fh.writelines(f"{i} {j} {tag}\n" for (i, j), tag in zip(mesh.boundary_edges, mesh.edge_tags))


def read_mesh_text(path):
    """Inverse of :func:`write_mesh_text`; returns (nodes, triangles, edges, tags)."""
    with _open(path, "r") as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    out, i = {}, 0
    for section in ("NODES", "TRIANGLES", "EDGES"):
        if lines[i][0] != section:
            raise OutputError(f"{os.fspath(path)!r}: expected section {section}")
        count = int(lines[i][1])
        out[section] = lines[i + 1:i + 1 + count]
        i += 1 + count
    nodes = np.array([[float(a), float(b)] for a, b in out["NODES"]])
    tris = np.array([[int(v) for v in row] for row in out["TRIANGLES"]], dtype=np.int64)
    edges = np.array([[int(a), int(b)] for a, b, _ in out["EDGES"]], dtype=np.int64)
    tags = np.array([tag for _, _, tag in out["EDGES"]])
    return nodes, tris, edges, tags

