"""Earth-fixed geometry: sidereal rotation, ground targets, elevation.

The Earth is a rotating sphere of radius R_EARTH; UTC is taken as UT1.
Sidereal angle comes from the 1982 IAU polynomial evaluated at the epoch
plus a linear advance at the constant rotation rate, with an optional
fixed offset (used to randomize ground-track phasing).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

from orbitgrad import autodiff as ad
from orbitgrad.constants import OMEGA_EARTH, R_EARTH

SEC_PER_DAY = 86400.0


def _julian_date(dt: datetime) -> float:
    y, m = dt.year, dt.month
    jd = (
        367 * y
        - (7 * (y + (m + 9) // 12)) // 4
        + (275 * m) // 9
        + dt.day
        + 1721013.5
    )
    frac = (
        dt.hour + dt.minute / 60.0 + (dt.second + dt.microsecond * 1e-6) / 3600.0
    ) / 24.0
    return jd + frac


def gmst(epoch: datetime, dt_s=0.0, offset: float = 0.0):
    """Greenwich mean sidereal angle [rad] at epoch + dt_s seconds."""
    T = (_julian_date(epoch) - 2451545.0) / 36525.0
    sec = (
        67310.54841
        + (876600.0 * 3600.0 + 8454.812866) * T
        + 0.093104 * T * T
        - 6.2e-6 * T * T * T
    )
    theta0 = np.radians((sec % SEC_PER_DAY) / 240.0)
    return theta0 + OMEGA_EARTH * np.asarray(dt_s, dtype=np.float64) + offset


def inertial_to_ecef(x, y, z, theta):
    """Rotate inertial positions into the rotating ground frame.

    Convention: at theta = pi/2 the inertial (1,0,0) maps to (0,-1,0),
    i.e. the frame rotates with the Earth, keeping a co-rotating
    satellite's longitude fixed.
    """
    c, s = np.cos(theta), np.sin(theta)
    xe = c * x + s * y
    ye = c * y - s * x
    return xe, ye, z


@dataclass
class GroundTargetSet:
    """Fixed ground points with quadrature weights (radians internally)."""

    lat: np.ndarray
    lon: np.ndarray
    weight: np.ndarray
    ecef: np.ndarray = field(init=False)
    ghat: np.ndarray = field(init=False)

    def __post_init__(self):
        self.lat = np.asarray(self.lat, dtype=np.float64)
        self.lon = np.asarray(self.lon, dtype=np.float64)
        self.weight = np.asarray(self.weight, dtype=np.float64)
        if not (self.lat.shape == self.lon.shape == self.weight.shape):
            raise ValueError("lat/lon/weight must have matching shapes")
        if np.any(np.abs(self.lat) > np.pi / 2 + 1e-12):
            raise ValueError("latitude out of range [-90, 90] deg")
        if np.any(self.weight <= 0.0):
            raise ValueError("target weights must be positive")
        cl = np.cos(self.lat)
        self.ghat = np.stack(
            [cl * np.cos(self.lon), cl * np.sin(self.lon), np.sin(self.lat)], axis=1
        )
        self.ecef = R_EARTH * self.ghat

    @classmethod
    def from_degrees(cls, lat_deg, lon_deg, weight=None) -> "GroundTargetSet":
        lat_deg = np.asarray(lat_deg, dtype=np.float64)
        if weight is None:
            weight = np.ones_like(lat_deg)
        return cls(np.radians(lat_deg), np.radians(lon_deg), weight)

    @property
    def size(self) -> int:
        return self.lat.size

    @property
    def weight_sum(self) -> float:
        return float(np.sum(self.weight))


def latlon_grid(n_lat: int, n_lon: int, lat_max_deg: float) -> GroundTargetSet:
    """Cell-centered lat/lon lattice within +-lat_max, cos-latitude weighted."""
    dlat = 2.0 * lat_max_deg / n_lat
    dlon = 360.0 / n_lon
    lats = -lat_max_deg + (np.arange(n_lat) + 0.5) * dlat
    lons = -180.0 + (np.arange(n_lon) + 0.5) * dlon
    lat2, lon2 = np.meshgrid(lats, lons, indexing="ij")
    lat_r = np.radians(lat2.ravel())
    return GroundTargetSet(lat_r, np.radians(lon2.ravel()), np.cos(lat_r))


def load_targets(path) -> GroundTargetSet:
    """Read a target CSV with columns lat_deg, lon_deg and optional weight."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        names = reader.fieldnames or []
        missing = [c for c in ("lat_deg", "lon_deg") if c not in names]
        if missing:
            raise ValueError(
                f"target csv {path.name} missing required column(s): "
                + ", ".join(missing)
            )
        has_w = "weight" in names
        lat, lon, w = [], [], []
        for row in reader:
            lat.append(float(row["lat_deg"]))
            lon.append(float(row["lon_deg"]))
            w.append(float(row["weight"]) if has_w else 1.0)
    if not lat:
        raise ValueError(f"target csv {path.name} has no rows")
    return GroundTargetSet.from_degrees(np.array(lat), np.array(lon), np.array(w))


def elevation_series(x, y, z, targets: GroundTargetSet):
    """Elevation [rad] of a satellite above each target's horizon plane.

    x/y/z are ECEF components (scalars or length-K series, plain or Var);
    result has shape (n_targets, K).
    """
    gx = targets.ecef[:, 0:1]
    gy = targets.ecef[:, 1:2]
    gz = targets.ecef[:, 2:3]
    hx = targets.ghat[:, 0:1]
    hy = targets.ghat[:, 1:2]
    hz = targets.ghat[:, 2:3]

    def bc(v):
        # promote scalars / (K,) rows so plain-numpy inputs broadcast like Vars
        if isinstance(v, ad.Var):
            return v
        return np.atleast_1d(np.asarray(v, dtype=np.float64))[None, :]

    xb, yb, zb = bc(x), bc(y), bc(z)
    dx = xb - gx
    dy = yb - gy
    dz = zb - gz
    dot = dx * hx + dy * hy + dz * hz
    dist = ad.sqrt(dx * dx + dy * dy + dz * dz)
    return ad.asin(dot / dist)


@dataclass
class SimWindow:
    """Evaluation window: K samples t_k = k * horizon/K from the epoch."""

    epoch: datetime
    horizon_s: float
    steps: int
    gmst_offset: float = 0.0  # [rad]

    def __post_init__(self):
        if self.steps < 2:
            raise ValueError("window needs at least 2 steps")
        if self.horizon_s <= 0:
            raise ValueError("horizon must be positive")

    @property
    def dt_s(self) -> float:
        return self.horizon_s / self.steps

    @property
    def dt_min(self) -> float:
        return self.dt_s / 60.0

    @property
    def times_s(self) -> np.ndarray:
        return np.arange(self.steps) * self.dt_s

    @property
    def gmst_rad(self) -> np.ndarray:
        return gmst(self.epoch, dt_s=self.times_s, offset=self.gmst_offset)
