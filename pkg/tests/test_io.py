import struct

import numpy as np
import pytest

from helpers import random_state
from varswe.dynamics import ModelState
from varswe.io import (ConfigError, load_config, parse_config, read_checkpoint, read_vtk,
                       write_checkpoint, write_mesh_summary, write_vtk)
from varswe.testcases import CaseSpec, initialize
from varswe.timeint import IntegratorConfig, step


# -- checkpoints -----------------------------------------------------------------------


def test_checkpoint_round_trip_is_bitwise(tmp_path, mesh3):
    V, D = random_state(mesh3, 1)
    V[0] = 5e-324  # subnormals survive
    st = ModelState(V, D, time=1234.5, step=17)
    p = tmp_path / "c.bin"
    write_checkpoint(p, mesh3, st)
    back, head = read_checkpoint(p, mesh3)
    assert back.V.tobytes() == V.tobytes() and back.D.tobytes() == D.tobytes()
    assert (back.step, back.time) == (17, 1234.5)
    assert head["level"] == 3 and head["n_cells"] == mesh3.n_cells
    assert p.stat().st_size == 56 + 8 * (mesh3.n_edges + mesh3.n_cells)


def test_restart_reproduces_straight_run(tmp_path, mesh3):
    state, static = initialize(mesh3, CaseSpec("geostrophic"))
    cfg = IntegratorConfig(dt=600.0)
    straight = state
    for _ in range(6):
        straight, _ = step(mesh3, straight, static, cfg)
    half = state
    for _ in range(3):
        half, _ = step(mesh3, half, static, cfg)
    write_checkpoint(tmp_path / "c.bin", mesh3, half)
    resumed, _ = read_checkpoint(tmp_path / "c.bin", mesh3)
    for _ in range(3):
        resumed, _ = step(mesh3, resumed, static, cfg)
    assert np.array_equal(resumed.V, straight.V) and np.array_equal(resumed.D, straight.D)
    assert resumed.step == 6 and resumed.time == straight.time


def test_checkpoint_errors(tmp_path, mesh2, mesh3):
    V, D = random_state(mesh3, 1)
    p = tmp_path / "c.bin"
    write_checkpoint(p, mesh3, ModelState(V, D))
    raw = p.read_bytes()
    with pytest.raises(ValueError, match="level-3"):
        read_checkpoint(p, mesh2)
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"XXXXXXXX" + raw[8:])
    with pytest.raises(ValueError, match="not a checkpoint"):
        read_checkpoint(bad)
    bad.write_bytes(raw[:8] + struct.pack("<I", 9) + raw[12:])
    with pytest.raises(ValueError, match="version"):
        read_checkpoint(bad)
    bad.write_bytes(raw[:-8])
    with pytest.raises(ValueError, match="size"):
        read_checkpoint(bad)
    bad.write_bytes(raw[:20])
    with pytest.raises(ValueError, match="truncated"):
        read_checkpoint(bad)
    with pytest.raises(ValueError):
        write_checkpoint(p, mesh2, ModelState(V, D))
    # a failed write leaves the previous file intact
    assert p.read_bytes() == raw


# -- VTK -----------------------------------------------------------------------------------


def test_vtk_round_trip(tmp_path, mesh2):
    rng = np.random.default_rng(0)
    D, vec, vort = rng.normal(size=mesh2.n_cells), rng.normal(size=(mesh2.n_cells, 3)), rng.normal(size=mesh2.n_vertices)
    p = tmp_path / "f.vtk"
    write_vtk(p, mesh2, {"D": D, "u": vec}, {"w": vort}, title="t")
    text = p.read_text().splitlines()
    assert text[0] == "# vtk DataFile Version 3.0" and text[2] == "ASCII"
    assert text[3] == "DATASET UNSTRUCTURED_GRID"
    back = read_vtk(p)
    assert np.array_equal(back["points"], mesh2.vertices * mesh2.radius_m)
    assert np.array_equal(back["cells"], mesh2.cell_vertices)
    assert np.array_equal(back["cell_data"]["D"], D)
    assert np.array_equal(back["cell_data"]["u"], vec)
    assert np.array_equal(back["cell_data"]["area"], mesh2.cell_areas)
    assert np.array_equal(back["point_data"]["w"], vort)


def test_vtk_rejects_bad_fields(tmp_path, mesh2):
    with pytest.raises(ValueError):
        write_vtk(tmp_path / "x.vtk", mesh2, {"D": np.ones(3)})
    with pytest.raises(ValueError):
        write_vtk(tmp_path / "x.vtk", mesh2, point_data={"w": np.ones(3)})
    with pytest.raises(ValueError):
        write_vtk(tmp_path / "x.vtk", mesh2, {"T": np.ones((mesh2.n_cells, 2))})
    assert not (tmp_path / "x.vtk").exists()


def test_mesh_summary(tmp_path, mesh2):
    write_mesh_summary(tmp_path / "s.txt", mesh2)
    assert (tmp_path / "s.txt").read_text().strip() == mesh2.summary().strip()


# -- configuration -----------------------------------------------------------------------------

EXAMPLE = """
[case]
name = mountain
days = 2.5
u0 = 15

[mesh]
level = 4
optimize = yes

[integrator]
scheme = crank_nicolson
dt = 200   # seconds
fp_tolerance = 1e-9
linear_solver = gmres

[output]
directory = results
diagnostics_every = 10
dump_days = 0, 1.5
"""


def test_parse_config(tmp_path):
    cfg = parse_config(EXAMPLE)
    assert cfg.case == CaseSpec("mountain", days=2.5, u0=15.0)
    assert (cfg.level, cfg.optimize_mesh) == (4, True)
    assert cfg.integrator == IntegratorConfig(scheme="crank_nicolson", dt=200.0, fp_tolerance=1e-9,
                                              linear_solver="gmres")
    assert cfg.output.directory == "results" and cfg.output.dump_days == (0.0, 1.5)
    assert cfg.n_steps == 1080 and cfg.compare_to_initial is False
    p = tmp_path / "c.ini"
    p.write_text(EXAMPLE)
    assert load_config(p) == cfg


def test_config_defaults():
    cfg = parse_config("")
    assert cfg.level == 5 and cfg.case.case == "geostrophic"
    assert cfg.days == 12.0 and cfg.compare_to_initial


@pytest.mark.parametrize("text", [
    "[physics]\nnu = 1\n",
    "[case]\nviscosity = 1\n",
    "[case]\nname = shear\n",
    "[mesh]\nlevel = three\n",
    "[mesh]\noptimize = maybe\n",
    "[integrator]\ndt = -1\n",
    "[integrator]\nscheme = rk4\n",
    "[output]\ndiagnostics_every = 0\n",
    "not an ini file",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)
