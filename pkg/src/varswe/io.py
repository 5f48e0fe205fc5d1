"""File formats: legacy ASCII VTK, binary checkpoints, run configuration.

Checkpoint layout (all little-endian)::

    offset  size  field
    0       8     magic  b"VSWECKP1"
    8       4     uint32 format version (1)
    12      4     uint32 mesh level
    16      8     int64  step
    24      8     float64 time [s]
    32      8     float64 sphere radius [m]
    40      8     uint64 n_edges
    48      8     uint64 n_cells
    56      8*ne  float64 V, edge order of the mesh
    ...     8*nc  float64 D, cell order of the mesh

Values are stored bit for bit, so a restart reproduces an uninterrupted run.
"""
from __future__ import annotations

import configparser
import os
import struct
import tempfile
from dataclasses import dataclass, field, fields

import numpy as np

from .dynamics import ModelState
from .testcases import CaseSpec
from .timeint import IntegratorConfig

CHECKPOINT_MAGIC = b"VSWECKP1"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<8sIIqddQQ")


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


# --------------------------------------------------------------------------
# atomic writes


def _atomic_write(path, data, mode="wb"):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --------------------------------------------------------------------------
# checkpoints


def write_checkpoint(path, mesh, state):
    V = np.ascontiguousarray(state.V, dtype="<f8")
    D = np.ascontiguousarray(state.D, dtype="<f8")
    if V.shape != (mesh.n_edges,) or D.shape != (mesh.n_cells,):
        raise ValueError("state does not match mesh")
    head = _HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, mesh.level, int(state.step),
                        float(state.time), float(mesh.radius_m), mesh.n_edges, mesh.n_cells)
    _atomic_write(path, head + V.tobytes() + D.tobytes())


def read_checkpoint(path, mesh=None):
    """Return ``(state, header)``; checks sizes against ``mesh`` when given."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated checkpoint header")
    magic, version, level, step, time, radius, ne, nc = _HEADER.unpack_from(raw)
    if magic != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    if len(raw) != _HEADER.size + 8 * (ne + nc):
        raise ValueError(f"{path}: payload size does not match header")
    if mesh is not None and (mesh.n_edges, mesh.n_cells) != (ne, nc):
        raise ValueError(f"{path}: checkpoint is for a level-{level} mesh")
    V = np.frombuffer(raw, dtype="<f8", count=ne, offset=_HEADER.size).astype(float)
    D = np.frombuffer(raw, dtype="<f8", count=nc, offset=_HEADER.size + 8 * ne).astype(float)
    header = {"level": level, "step": step, "time": time, "radius_m": radius,
              "n_edges": ne, "n_cells": nc}
    return ModelState(V, D, time, step), header


# --------------------------------------------------------------------------
# VTK


def _fmt(a):
    return "\n".join(" ".join(repr(float(v)) for v in row) for row in np.atleast_2d(a))


def _data_block(data):
    out = []
    for name, arr in data.items():
        arr = np.asarray(arr, dtype=float)
        if arr.ndim == 1:
            out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default", _fmt(arr[:, None])]
        elif arr.ndim == 2 and arr.shape[1] == 3:
            out += [f"VECTORS {name} double", _fmt(arr)]
        else:
            raise ValueError(f"field {name!r} must be scalar or 3-vector per entity")
    return out


def write_vtk(path, mesh, cell_data=None, point_data=None, title="varswe mesh"):
    """Legacy ASCII unstructured grid: triangles on the sphere, coordinates in metres."""
    cell_data = {"area": mesh.cell_areas, **(cell_data or {})}
    point_data = point_data or {}
    for name, arr in cell_data.items():
        if len(arr) != mesh.n_cells:
            raise ValueError(f"cell field {name!r} has {len(arr)} values, mesh has {mesh.n_cells}")
    for name, arr in point_data.items():
        if len(arr) != mesh.n_vertices:
            raise ValueError(f"point field {name!r} has {len(arr)} values")
    nc = mesh.n_cells
    lines = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII",
             "DATASET UNSTRUCTURED_GRID",
             f"POINTS {mesh.n_vertices} double", _fmt(mesh.vertices * mesh.radius_m),
             f"CELLS {nc} {4 * nc}",
             "\n".join(f"3 {a} {b} {c}" for a, b, c in mesh.cell_vertices),
             f"CELL_TYPES {nc}", "\n".join(["5"] * nc),
             f"CELL_DATA {nc}", *_data_block(cell_data)]
    if point_data:
        lines += [f"POINT_DATA {mesh.n_vertices}", *_data_block(point_data)]
    _atomic_write(path, "\n".join(lines) + "\n", mode="w")


def read_vtk(path):
    """Parse files written by :func:`write_vtk`.

    Returns a dict with ``points``, ``cells``, ``cell_data`` and ``point_data``.
    """
    with open(path) as fh:
        tok = fh.read().split("\n")
    if not tok[0].startswith("# vtk DataFile"):
        raise ValueError(f"{path}: not a legacy VTK file")
    out = {"title": tok[1], "cell_data": {}, "point_data": {}}
    k, target = 4, None
    while k < len(tok):
        words = tok[k].split()
        k += 1
        if not words:
            continue
        key = words[0]
        if key == "POINTS":
            n = int(words[1])
            out["points"] = np.array([[float(x) for x in tok[k + r].split()] for r in range(n)])
            k += n
        elif key == "CELLS":
            n = int(words[1])
            out["cells"] = np.array([[int(x) for x in tok[k + r].split()[1:]] for r in range(n)])
            k += n
        elif key == "CELL_TYPES":
            k += int(words[1])
        elif key in ("CELL_DATA", "POINT_DATA"):
            target = (out["cell_data"] if key == "CELL_DATA" else out["point_data"], int(words[1]))
        elif key == "SCALARS":
            store, n = target
            k += 1  # lookup table line
            store[words[1]] = np.array([float(tok[k + r]) for r in range(n)])
            k += n
        elif key == "VECTORS":
            store, n = target
            store[words[1]] = np.array([[float(x) for x in tok[k + r].split()] for r in range(n)])
            k += n
        else:
            raise ValueError(f"{path}: unexpected section {key!r}")
    return out


def write_mesh_summary(path, mesh):
    _atomic_write(path, mesh.summary() + "\n", mode="w")


# --------------------------------------------------------------------------
# configuration


@dataclass
class OutputConfig:
    directory: str = "out"
    diagnostics_every: int = 36
    dump_every: int = 0
    dump_days: tuple | None = None
    compare_to_initial: bool | None = None
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.diagnostics_every < 1:
            raise ConfigError("diagnostics_every must be >= 1")
        if self.dump_every < 0 or self.checkpoint_every < 0:
            raise ConfigError("dump_every and checkpoint_every must be >= 0")


@dataclass
class RunConfig:
    case: CaseSpec = field(default_factory=CaseSpec)
    level: int = 5
    optimize_mesh: bool = False
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @property
    def days(self):
        return self.case.default_days

    @property
    def n_steps(self):
        return int(round(self.days * 86400.0 / self.integrator.dt))

    @property
    def compare_to_initial(self):
        flag = self.output.compare_to_initial
        return self.case.case in ("lake_at_rest", "geostrophic") if flag is None else flag


_CASE_KEYS = {f.name: f.type for f in fields(CaseSpec)}
_INT_KEYS = {f.name: f.type for f in fields(IntegratorConfig)}
_OUT_KEYS = {f.name: f.type for f in fields(OutputConfig)}


def _convert(section, key, text, typ):
    typ = str(typ)
    try:
        if "bool" in typ:
            return configparser.ConfigParser.BOOLEAN_STATES[text.strip().lower()]
        if "tuple" in typ:
            return tuple(float(x) for x in text.replace(",", " ").split())
        if typ.startswith("int"):
            return int(text)
        if typ.startswith("float"):
            return None if text.strip().lower() == "none" else float(text)
        return text.strip()
    except (KeyError, ValueError):
        raise ConfigError(f"[{section}] {key}: cannot parse {text!r} as {typ}") from None


def parse_config(text, source="<string>"):
    """Build a :class:`RunConfig` from INI text with sections
    ``[case]``, ``[mesh]``, ``[integrator]`` and ``[output]``."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    unknown = set(cp.sections()) - {"case", "mesh", "integrator", "output"}
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}")

    def collect(sec, table, rename=None):
        kw = {}
        if not cp.has_section(sec):
            return kw
        for key, text in cp.items(sec):
            name = (rename or {}).get(key, key)
            if name not in table:
                raise ConfigError(f"[{sec}] unknown key {key!r}")
            kw[name] = _convert(sec, key, text, table[name])
        return kw

    try:
        case = CaseSpec(**collect("case", _CASE_KEYS, {"name": "case"}))
        integ = IntegratorConfig(**collect("integrator", _INT_KEYS))
        out = OutputConfig(**collect("output", _OUT_KEYS))
        mesh = collect("mesh", {"level": "int", "optimize": "bool"})
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(case=case, level=mesh.get("level", 5),
                     optimize_mesh=mesh.get("optimize", False), integrator=integ, output=out)


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read(), source=str(path))
