"""Two-body orbit propagation in the inertial frame.

Closed-form Keplerian motion: mean anomaly advances linearly, the Kepler
equation is solved by Newton iteration, and the perifocal position is
rotated into the inertial frame through R_z(raan) R_x(inc) R_z(argp).

Every function accepts either plain numbers/ndarrays or autodiff `Var`s;
the Kepler solve exposes its implicit partials dE/dM = 1/(1 - e cos E)
and dE/de = sin E / (1 - e cos E) so gradients flow through the
iteration-free.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from orbitgrad import autodiff as ad
from orbitgrad.autodiff import _unbroadcast
from orbitgrad.constants import MU_EARTH

TWO_PI = 2.0 * np.pi

_SQRT_MU = np.sqrt(MU_EARTH)


class KeplerError(RuntimeError):
    """Newton iteration failed to converge."""


@dataclass
class ElementSet:
    """Osculating elements at the window epoch: km and radians."""

    a: object  # semi-major axis [km]
    e: object  # eccentricity
    inc: object  # inclination [rad]
    raan: object  # right ascension of ascending node [rad]
    argp: object  # argument of perigee [rad]
    ma: object  # mean anomaly at epoch [rad]

    def as_floats(self) -> "ElementSet":
        return ElementSet(*(float(ad.value(getattr(self, f))) for f in
                            ("a", "e", "inc", "raan", "argp", "ma")))


def mean_motion(a):
    """Mean motion n = sqrt(mu/a^3) [rad/s]."""
    if float(np.min(np.asarray(ad.value(a)))) <= 0.0:
        raise ValueError("semi-major axis must be positive")
    return _SQRT_MU * a ** -1.5


def _newton_kepler(M: np.ndarray, e, tol: float = 1e-12, cap: int = 50) -> np.ndarray:
    E = M + e * np.sin(M)
    for _ in range(cap):
        f = E - e * np.sin(E) - M
        fp = 1.0 - e * np.cos(E)
        dE = f / fp
        E = E - dE
        if np.max(np.abs(dE)) < tol:
            return E
    raise KeplerError(f"Kepler solve did not converge within {cap} iterations")


def solve_kepler(M, e):
    """Eccentric anomaly E with E - e sin E = M, elliptic orbits only.

    M may be any real value; full revolutions are split off before the
    Newton solve and added back, so E is a smooth function of M.
    """
    ev = ad.value(e)
    if np.any(np.asarray(ev) < 0.0) or np.any(np.asarray(ev) >= 1.0):
        raise ValueError("eccentricity must lie in [0, 1)")
    Mv = np.asarray(ad.value(M), dtype=np.float64)
    scalar_in = Mv.ndim == 0 and np.ndim(ev) == 0

    k = np.floor((Mv + np.pi) / TWO_PI)
    E = _newton_kepler(Mv - TWO_PI * k, ev) + TWO_PI * k

    if not (isinstance(M, ad.Var) or isinstance(e, ad.Var)):
        return float(E) if scalar_in else E

    denom = 1.0 - ev * np.cos(E)
    sinE = np.sin(E)
    parents = []
    pulls = []
    if isinstance(M, ad.Var):
        parents.append(M)
        pulls.append(lambda adj: _unbroadcast(adj / denom, np.shape(Mv)))
    if isinstance(e, ad.Var):
        parents.append(e)
        pulls.append(lambda adj: _unbroadcast(adj * sinE / denom, np.shape(ev)))
    return ad.custom(E, tuple(parents), lambda adj: tuple(p(adj) for p in pulls),
                     op="kepler")


def propagate(el: ElementSet, t):
    """Inertial position components (x, y, z) [km] at times t [s since epoch]."""
    ev = float(ad.value(el.e))
    if not 0.0 <= ev < 1.0:
        raise ValueError("propagation requires elliptic elements (0 <= e < 1)")
    t = np.asarray(t, dtype=np.float64)

    n = mean_motion(el.a)
    M = el.ma + n * t
    E = solve_kepler(M, el.e)
    cE, sE = ad.cos(E), ad.sin(E)

    x_pf = el.a * (cE - el.e)
    y_pf = (el.a * ad.sqrt(1.0 - el.e * el.e)) * sE

    cO, sO = ad.cos(el.raan), ad.sin(el.raan)
    ci, si = ad.cos(el.inc), ad.sin(el.inc)
    cw, sw = ad.cos(el.argp), ad.sin(el.argp)

    r11 = cO * cw - sO * sw * ci
    r12 = -(cO * sw) - sO * cw * ci
    r21 = sO * cw + cO * sw * ci
    r22 = -(sO * sw) + cO * cw * ci
    r31 = sw * si
    r32 = cw * si

    x = r11 * x_pf + r12 * y_pf
    y = r21 * x_pf + r22 * y_pf
    z = r31 * x_pf + r32 * y_pf
    return x, y, z


def positions_array(elements, t) -> np.ndarray:
    """Plain-value positions stacked as (n_sats, len(t), 3) [km]."""
    out = np.empty((len(elements), len(t), 3))
    for i, el in enumerate(elements):
        x, y, z = propagate(el.as_floats(), t)
        out[i, :, 0] = x
        out[i, :, 1] = y
        out[i, :, 2] = z
    return out
