"""Walker Delta constellation generator."""

import math

from orbitgrad.constants import R_EARTH
from orbitgrad.orbits import ElementSet


def walker_generate(total, planes, phasing, inc_deg=60.0, alt_km=550.0, raan0_deg=0.0):
    """Circular Walker Delta total/planes/phasing pattern at a common epoch.

    Planes are RAAN-equispaced over 360 deg, each holding total/planes
    satellites equispaced in mean anomaly; plane p's anomalies are offset by
    p * phasing * 360/total deg. Returns one ElementSet per satellite,
    plane-major.
    """
    if total <= 0 or planes <= 0:
        raise ValueError("total and planes must be positive")
    if total % planes != 0:
        raise ValueError(f"planes ({planes}) must divide the total ({total})")
    if not 0 <= phasing < planes:
        raise ValueError(f"phasing must lie in [0, {planes})")
    per_plane = total // planes
    a = R_EARTH + alt_km
    inc = math.radians(inc_deg)
    els = []
    for p in range(planes):
        raan = math.radians((raan0_deg + p * 360.0 / planes) % 360.0)
        base_deg = p * phasing * 360.0 / total
        for s in range(per_plane):
            ma = math.radians((base_deg + s * 360.0 / per_plane) % 360.0)
            els.append(ElementSet(a=a, e=0.0, inc=inc, raan=raan, argp=0.0, ma=ma))
    return els
