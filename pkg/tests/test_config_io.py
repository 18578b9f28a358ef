import os
from importlib import resources

import numpy as np
import pytest

from thermistor.config import ConfigError, parse_config, serialize_config
from thermistor.constitutive import ConstitutiveSpec
from thermistor.coupling import DEFAULT_EPS, CouplingConfig, run_simulation
from thermistor.estimates import LEDGER_COLUMNS, EstimateLedger
from thermistor.expr import compile_expression
from thermistor.errors import ConfigurationError
from thermistor.io import (TRAJECTORY_COLUMNS, OutputError, read_mesh_text, read_table, trajectory_rows,
                           write_ledger_csv, write_mesh_text, write_trajectory_csv, write_vtk)
from thermistor.mesh import build_rect_mesh

MINIMAL = """\
# smallest useful document
mesh.nx = 4
mesh.ny = 3
constitutive.p = 2
boundary.left = 0
boundary.right = 1
initial.u0 = 0
"""


def test_minimal_document_gets_defaults():
    cfg = parse_config(MINIMAL)
    assert (cfg.mesh.nx, cfg.mesh.ny, cfg.mesh.lx) == (4, 3, 1.0)
    assert cfg.coupling.eps_schedule == DEFAULT_EPS
    assert cfg.coupling.q == 9 / 8 and cfg.coupling.fp_max_iter == 50
    assert cfg.spec.p == 2.0 and cfg.spec.delta == 1.0
    assert cfg.boundary.kind == "constant"
    assert cfg.output.formats == ("csv",)


def test_constraint_cited():
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL.replace("constitutive.p = 2", "constitutive.p = 0.5"))
    assert any("line 4" in p and "p in (1, inf)" in p for p in info.value.problems)


def test_all_errors_collected():
    doc = MINIMAL + "constitutive.g = 0\nbogus.key = 1\nmesh.lx = abc\nconstitutive.delta = 0\n"
    doc = doc.replace("constitutive.p = 2", "constitutive.p = 1.5")
    with pytest.raises(ConfigError) as info:
        parse_config(doc)
    text = "\n".join(info.value.problems)
    assert "line 8" in text and "constitutive.g" in text
    assert "line 9: unknown key 'bogus.key'" in text
    assert "line 10: bad value" in text
    assert "delta must be > 0 when p < 2" in text


def test_case_sensitive_keys_and_syntax():
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL + "Mesh.NX = 3\njust words\n")
    assert len(info.value.problems) == 2


def test_expression_errors_reported():
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL.replace("initial.u0 = 0", "initial.u0 = sqrt(x)"))
    assert any("initial.u0" in p for p in info.value.problems)


def test_round_trip():
    doc = MINIMAL + """\
constitutive.sigma0.shape = table
constitutive.sigma0.params = -1, 0.5, 1, 2
constitutive.eta1 = 0.3
coupling.eps_schedule = 0.5, 0.05
coupling.lumped = true
boundary.kind = ramp
boundary.t_ramp = 0.25
output.formats = csv, vtk
"""
    cfg = parse_config(doc)
    again = parse_config(serialize_config(cfg))
    assert again == cfg
    assert serialize_config(again) == serialize_config(cfg)
    expr = parse_config(MINIMAL.replace("boundary.left = 0\nboundary.right = 1\n",
                                        "boundary.kind = expression\nboundary.expr = 1 - 2*x\n"))
    assert parse_config(serialize_config(expr)) == expr


def test_bundled_configs_parse():
    root = resources.files("thermistor") / "configs"
    names = sorted(p.name for p in root.iterdir() if p.name.endswith(".cfg"))
    assert {"uniform_decay.cfg", "joule_ramp.cfg"} <= set(names)
    for name in names:
        parse_config((root / name).read_text())


def test_expression_grammar():
    f = compile_expression("1 - 2*x + sin(y)/2")
    x, y = np.array([0.0, 0.5]), np.array([0.0, np.pi / 2])
    np.testing.assert_allclose(f(x, y), [1.0, 0.5])
    assert compile_expression("-(x+1)*-2")(1.0, 0.0) == 4.0
    assert compile_expression("2*3+4/2-1")(0.0, 0.0) == 7.0
    assert compile_expression("exp(0)+cos(0)")(0.0, 0.0) == 2.0
    assert compile_expression("1.5e2")(np.zeros(3), np.zeros(3)).shape == (3,)
    for bad in ("x ^ 2", "log(x)", "(x", "x +", "", "2 x"):
        with pytest.raises(ConfigurationError):
            compile_expression(bad)


def test_empty_ledger_header_only(tmp_path):
    path = tmp_path / "ledger.csv"
    write_ledger_csv(EstimateLedger(2.0, 9 / 8, 1.5, 5 / 16), path)
    assert path.read_text() == ",".join(LEDGER_COLUMNS) + "\n"


def test_trajectory_csv_reads_back_bit_exact(tmp_path):
    mesh = build_rect_mesh(4, 4)
    cfg = CouplingConfig(T_final=0.05, steps=3)
    spec = ConstitutiveSpec(eta1=0.5)
    from thermistor.coupling import SideBoundary
    traj = run_simulation(mesh, cfg, 0.1, spec, SideBoundary((("left", 0.0), ("right", 1.0))),
                          0.1 * mesh.nodes[:, 1])
    path = tmp_path / "traj.csv"
    write_trajectory_csv(traj, spec, path)
    header, rows = read_table(path)
    assert tuple(header) == TRAJECTORY_COLUMNS
    expected = trajectory_rows(traj, spec)
    assert len(rows) == len(expected) == 4
    for got, want in zip(rows, expected):
        assert got == [float(v) for v in want]
    assert "," in path.read_text() and ";" not in path.read_text()


def test_vtk_two_triangles(tmp_path):
    mesh = build_rect_mesh(1, 1)
    path = tmp_path / "snap.vtk"
    write_vtk(mesh, path, {"phi": [0, 1, 0, 1], "u": [0.5, 0.5, 0.5, 0.5]})
    lines = path.read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0" and lines[2] == "ASCII"
    assert "DATASET UNSTRUCTURED_GRID" in lines
    assert "POINTS 4 double" in lines
    assert "CELLS 2 8" in lines
    i = lines.index("CELL_TYPES 2")
    assert lines[i + 1:i + 3] == ["5", "5"]
    assert "SCALARS phi double 1" in lines and "SCALARS u double 1" in lines
    with pytest.raises(OutputError):
        write_vtk(mesh, path, {"u": [1.0, 2.0]})


def test_mesh_text_round_trip(tmp_path):
    mesh = build_rect_mesh(3, 2, 1.5, 0.5, ("left", "top"))
    path = tmp_path / "mesh.txt"
    write_mesh_text(mesh, path)
    nodes, tris, edges, tags = read_mesh_text(path)
    np.testing.assert_array_equal(nodes, mesh.nodes)
    np.testing.assert_array_equal(tris, mesh.triangles)
    np.testing.assert_array_equal(edges, mesh.boundary_edges)
    np.testing.assert_array_equal(tags, mesh.edge_tags)


def test_unwritable_path_reports_path(tmp_path):
    target = os.path.join(tmp_path, "missing", "ledger.csv")
    with pytest.raises(OutputError, match="missing"):
        write_ledger_csv(EstimateLedger(2.0, 9 / 8, 1.5, 5 / 16), target)
