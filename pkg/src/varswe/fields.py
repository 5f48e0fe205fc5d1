"""Field containers on mesh entities and sampling of analytic data.

Analytic functions receive points on the *unit* sphere, shape ``(n, 3)``;
vector fields return 3-D vectors of the same shape.
"""
from __future__ import annotations

import csv

import numpy as np


class _Field:
    entity = "entity"

    def __init__(self, mesh, values=None):
        n = self._size(mesh)
        if values is None:
            values = np.zeros(n)
        values = np.array(values, dtype=float)
        if values.shape != (n,):
            raise ValueError(f"{type(self).__name__} needs {n} values, got shape {values.shape}")
        self.mesh = mesh
        self.values = values

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self):
        return len(self.values)

    def __repr__(self):
        return f"{type(self).__name__}(n={len(self)})"

    def to_csv(self, path, name="value"):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"{self.entity}_id", name])
            for k, v in enumerate(self.values):
                w.writerow([k, repr(float(v))])


class EdgeField(_Field):
    """One value per undirected edge, stored in the canonical ``i -> j`` orientation."""

    entity = "edge"

    @staticmethod
    def _size(mesh):
        return mesh.n_edges

    def oriented(self, edge, from_cell):
        """Value of ``edge`` read outward from ``from_cell``; reversing negates it."""
        i, j = self.mesh.edge_cells[edge]
        if from_cell == i:
            return self.values[edge]
        if from_cell == j:
            return -self.values[edge]
        raise ValueError(f"cell {from_cell} is not adjacent to edge {edge}")

    def between(self, i, j):
        """Value of the edge shared by cells ``i`` and ``j``, oriented ``i -> j``."""
        k = np.nonzero(self.mesh.cell_neighbors[i] == j)[0]
        if len(k) == 0:
            raise ValueError(f"cells {i} and {j} are not neighbours")
        return self.oriented(self.mesh.cell_edges[i, k[0]], i)


class CellField(_Field):
    """One value per triangle."""

    entity = "cell"

    @staticmethod
    def _size(mesh):
        return mesh.n_cells


class DualField(_Field):
    """One value per vertex (dual cell)."""

    entity = "vertex"

    @staticmethod
    def _size(mesh):
        return mesh.n_vertices


def sample_edge_normal_velocity(mesh, u):
    """Midpoint-rule edge fluxes ``V_ij = u(midpoint) . n_ij``."""
    vec = np.asarray(u(mesh.edge_midpoints), dtype=float)
    return EdgeField(mesh, np.einsum("ij,ij->i", vec, mesh.edge_normals))


def sample_cell_value(mesh, g):
    """Point evaluation of ``g`` at the projected circumcenters."""
    return CellField(mesh, np.asarray(g(mesh.cell_centers), dtype=float))


def sample_dual_value(mesh, g):
    return DualField(mesh, np.asarray(g(mesh.vertices), dtype=float))


def read_field_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([float(r[1]) for r in rows[1:]])
