"""Initial conditions for the four benchmark cases.

Formulas use unit-sphere coordinates (``z = sin(lat)``) and physical
constants from :class:`CaseSpec`.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np

from .dynamics import ModelState, StaticFields
from .fields import sample_cell_value, sample_edge_normal_velocity
from .mesh import lonlat
from .operators import coriolis_setup

CASES = ("lake_at_rest", "geostrophic", "mountain", "rossby_haurwitz")

DAY = 86400.0


@dataclass(frozen=True)
class CaseSpec:
    case: str = "geostrophic"
    radius_m: float = 6.37122e6
    omega: float = 7.292e-5
    g: float = 9.80616
    h0: float | None = None
    u0: float | None = None
    lon_c: float = 1.5 * np.pi
    lat_c: float = np.pi / 6
    rh_K: float = 7.848e-6
    rh_wavenumber: int = 4
    noise_amplitude: float = 0.0
    seed: int = 0
    days: float | None = None
    dt: float = 100.0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.case not in CASES:
            raise ValueError(f"unknown case {self.case!r}; expected one of {CASES}")
        if self.noise_amplitude < 0:
            raise ValueError("noise amplitude must be >= 0")

    def with_overrides(self, **kw):
        names = {f.name for f in fields(self)}
        unknown = set(kw) - names
        if unknown:
            raise ValueError(f"unknown case parameters {sorted(unknown)}")
        return replace(self, **kw)

    @property
    def default_days(self):
        if self.days is not None:
            return self.days
        return {"lake_at_rest": 15.0, "geostrophic": 12.0, "mountain": 15.0,
                "rossby_haurwitz": 14.0}[self.case]

    @property
    def snapshot_days(self):
        return {"mountain": (0, 5, 10, 15), "rossby_haurwitz": (0, 7, 14)}.get(self.case, ())


def east_north(x):
    """Local unit vectors ``(e_lon, e_lat)`` at unit points ``x``."""
    lon, lat = lonlat(x)
    e_lon = np.stack([-np.sin(lon), np.cos(lon), np.zeros_like(lon)], axis=1)
    e_lat = np.stack([-np.sin(lat) * np.cos(lon), -np.sin(lat) * np.sin(lon), np.cos(lat)], axis=1)
    return e_lon, e_lat


def cone_distance(x, lon_c, lat_c):
    """``r = sqrt(min((pi/9)^2, (lon - lon_c)^2 + (lat - lat_c)^2))``."""
    lon, lat = lonlat(x)
    return np.sqrt(np.minimum((np.pi / 9) ** 2, (lon - lon_c) ** 2 + (lat - lat_c) ** 2))


def _zonal(u0):
    def u(x):
        return u0 * np.stack([-x[:, 1], x[:, 0], np.zeros(len(x))], axis=1)
    return u


def _balanced_height(spec, h0, u0):
    def h(x):
        return h0 - (spec.radius_m * spec.omega * u0 + 0.5 * u0**2) * x[:, 2] ** 2 / spec.g
    return h


def _finish(mesh, spec, V, D, B):
    Rbar = coriolis_setup(mesh, spec.omega)
    state = ModelState(np.asarray(V, dtype=float), np.asarray(D, dtype=float))
    state.validate()
    return state, StaticFields(B=np.asarray(B, dtype=float), Rbar=Rbar, g=spec.g)


def _check_radius(mesh, spec):
    if not np.isclose(mesh.radius_m, spec.radius_m, rtol=1e-12):
        raise ValueError(f"mesh radius {mesh.radius_m} does not match case radius {spec.radius_m}")


def init_lake_at_rest(mesh, noise_amplitude=0.0, seed=0, spec=None):
    """Fluid at rest over a smooth mountain, optionally with white-noise topography."""
    spec = spec or CaseSpec("lake_at_rest", noise_amplitude=noise_amplitude, seed=seed)
    _check_radius(mesh, spec)
    surface = 5960.0 if spec.h0 is None else spec.h0
    r = cone_distance(mesh.cell_centers, spec.lon_c, spec.lat_c)
    B = 2000.0 * np.exp(-(2.8 * 9.0 * r / np.pi) ** 2)
    if spec.noise_amplitude > 0:
        rng = np.random.default_rng(spec.seed)
        B = B + rng.uniform(-spec.noise_amplitude, spec.noise_amplitude, size=len(B))
    D = surface - B
    return _finish(mesh, spec, np.zeros(mesh.n_edges), D, B)


def init_geostrophic(mesh, spec=None):
    """Steady zonal flow in geostrophic balance over a flat bottom."""
    spec = spec or CaseSpec("geostrophic")
    _check_radius(mesh, spec)
    u0 = 2 * np.pi * spec.radius_m / (12 * DAY) if spec.u0 is None else spec.u0
    h0 = 2.94e4 / spec.g if spec.h0 is None else spec.h0
    V = sample_edge_normal_velocity(mesh, _zonal(u0)).values
    D = sample_cell_value(mesh, _balanced_height(spec, h0, u0)).values
    return _finish(mesh, spec, V, D, np.zeros(mesh.n_cells))


def init_mountain(mesh, spec=None):
    """Zonal flow impinging on a conical mountain.

    The balanced free-surface height minus the topography gives the depth.
    """
    spec = spec or CaseSpec("mountain")
    _check_radius(mesh, spec)
    u0 = 20.0 if spec.u0 is None else spec.u0
    h0 = 5960.0 if spec.h0 is None else spec.h0
    V = sample_edge_normal_velocity(mesh, _zonal(u0)).values
    surface = sample_cell_value(mesh, _balanced_height(spec, h0, u0)).values
    r = cone_distance(mesh.cell_centers, spec.lon_c, spec.lat_c)
    B = 2000.0 * (1.0 - 9.0 * r / np.pi)
    return _finish(mesh, spec, V, surface - B, B)


def rossby_haurwitz_velocity(spec):
    R, K, k = spec.radius_m, spec.rh_K, spec.rh_wavenumber

    def u(x):
        lon, lat = lonlat(x)
        c, s = np.cos(lat), np.sin(lat)
        zonal = R * K * c + R * K * c ** (k - 1) * (k * s**2 - c**2) * np.cos(k * lon)
        merid = -R * K * k * c ** (k - 1) * s * np.sin(k * lon)
        e_lon, e_lat = east_north(x)
        return zonal[:, None] * e_lon + merid[:, None] * e_lat
    return u


def rossby_haurwitz_depth(spec):
    R, K, k, Om = spec.radius_m, spec.rh_K, spec.rh_wavenumber, spec.omega
    h0 = 8000.0 if spec.h0 is None else spec.h0

    def h(x):
        lon, lat = lonlat(x)
        c = np.cos(lat)
        # cos^(2k) * cos^-2 folded into cos^(2k-2) so the poles stay finite
        A = (0.5 * K * (2 * Om + K) * c**2
             + 0.25 * K**2 * ((k + 1) * c ** (2 * k + 2) + (2 * k**2 - k - 2) * c ** (2 * k)
                              - 2 * k**2 * c ** (2 * k - 2)))
        Bt = (2 * (Om + K) * K / ((k + 1) * (k + 2)) * c**k
              * ((k**2 + 2 * k + 2) - (k + 1) ** 2 * c**2))
        C = 0.25 * K**2 * c ** (2 * k) * ((k + 1) * c**2 - (k + 2))
        return h0 + R**2 * (A + Bt * np.cos(k * lon) + C * np.cos(2 * k * lon)) / spec.g
    return h


def init_rossby_haurwitz(mesh, spec=None):
    """Wavenumber-4 Rossby-Haurwitz wave."""
    spec = spec or CaseSpec("rossby_haurwitz")
    _check_radius(mesh, spec)
    V = sample_edge_normal_velocity(mesh, rossby_haurwitz_velocity(spec)).values
    D = sample_cell_value(mesh, rossby_haurwitz_depth(spec)).values
    return _finish(mesh, spec, V, D, np.zeros(mesh.n_cells))


def initialize(mesh, spec):
    if spec.case == "lake_at_rest":
        return init_lake_at_rest(mesh, spec=spec)
    if spec.case == "geostrophic":
        return init_geostrophic(mesh, spec)
    if spec.case == "mountain":
        return init_mountain(mesh, spec)
    return init_rossby_haurwitz(mesh, spec)
