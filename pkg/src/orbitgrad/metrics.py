"""Coverage and revisit metrics, hard and relaxed.

Hard metrics are the operational quantities: indicator visibility above a
minimum elevation, fraction of covered samples, and the worst per-target
revisit gap.  Each has a smooth counterpart so gradients exist: a sigmoid
over elevation margin, a product-form OR across satellites, a leaky
integrator that accumulates gap time, and a log-sum-exp softened maximum.

Elevations are radians internally; the sigmoid widths tau and the minimum
elevation are configured in degrees, gap times in minutes.

The indicator path is JIT-compiled (numba, serial loops) because the
black-box baselines evaluate it tens of thousands of times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from orbitgrad import autodiff as ad
from orbitgrad.autodiff import _sigmoid_val, _unbroadcast
from orbitgrad.earthgeo import GroundTargetSet

_ASIN_CLAMP = 1.0 - 1e-12


@dataclass
class RelaxConfig:
    """Relaxation knobs: sigmoid widths [deg], gap softness [min], trade-off."""

    tau_cov_deg: float = 2.0
    tau_rev_deg: float = 2.0
    beta_min: float = 10.0
    lam: float = 0.1
    alpha_min_deg: float = 10.0

    def __post_init__(self):
        if self.tau_cov_deg <= 0 or self.tau_rev_deg <= 0:
            raise ValueError("sigmoid widths must be positive")
        if self.beta_min <= 0:
            raise ValueError("beta must be positive")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if not 0.0 < self.alpha_min_deg < 90.0:
            raise ValueError("minimum elevation must lie in (0, 90) deg")


# ---------------------------------------------------------------------------
# relaxed metrics


def soft_visibility(alpha, alpha_min_deg: float, tau_deg: float):
    """Sigmoid visibility: 0.5 at the elevation mask, saturating over ~tau."""
    if tau_deg <= 0:
        raise ValueError("tau must be positive")
    amin = math.radians(alpha_min_deg)
    tau = math.radians(tau_deg)
    return ad.sigmoid((alpha - amin) / tau)


def tanh_visibility(alpha, alpha_min_deg: float, tau_deg: float):
    """Equivalent tanh form of the sigmoid visibility."""
    if tau_deg <= 0:
        raise ValueError("tau must be positive")
    amin = math.radians(alpha_min_deg)
    tau = math.radians(tau_deg)
    return (1.0 + ad.tanh((alpha - amin) / tau * 0.5)) * 0.5


def noisy_or(contributions):
    """Product-form OR: 1 - prod(1 - c_i); exact Boolean OR on 0/1 inputs."""
    q = None
    for c in contributions:
        term = 1.0 - c
        q = term if q is None else q * term
    if q is None:
        raise ValueError("noisy_or needs at least one input")
    return 1.0 - q


def coverage_fraction(C, weight: np.ndarray):
    """Weighted target mean of the per-step coverage, averaged over time."""
    K = np.shape(ad.value(C))[-1]
    return ad.sum_all(C * weight[:, None]) / (K * float(np.sum(weight)))


def weighted_mean(x, weight: np.ndarray):
    return ad.sum_all(x * weight) / float(np.sum(weight))


def _leaky_scan(C: np.ndarray, dt_min: float) -> np.ndarray:
    out = np.zeros_like(C)
    prev = np.zeros(C.shape[:-1])
    for k in range(1, C.shape[-1]):
        prev = (prev + dt_min) * (1.0 - C[..., k])
        out[..., k] = prev
    return out


def leaky_gaps(C, dt_min: float):
    """Accumulated gap time [min] along the last axis.

    gap_0 = 0; gap_k = (gap_{k-1} + dt) * (1 - C_k).  On indicator input
    this equals the elapsed time since the last covered sample (counted
    from the window start while nothing has been seen yet).
    """
    if dt_min <= 0:
        raise ValueError("dt must be positive")
    Cv = np.asarray(ad.value(C), dtype=np.float64)
    if Cv.ndim == 0:
        raise ValueError("need a series, got a scalar")
    gaps = _leaky_scan(Cv, dt_min)
    if not isinstance(C, ad.Var):
        return gaps

    K = Cv.shape[-1]

    def vjp(adj):
        Cb = np.zeros_like(Cv)
        carry = np.zeros(Cv.shape[:-1])
        for k in range(K - 1, 0, -1):
            abar = adj[..., k] + carry
            Cb[..., k] = -abar * (gaps[..., k - 1] + dt_min)
            carry = abar * (1.0 - Cv[..., k])
        return (Cb,)

    return ad.custom(gaps, (C,), vjp, op="leaky_gaps")


def smooth_max(x, beta: float, axis: int = -1):
    """Softened maximum beta * log sum exp(x/beta) along an axis.

    Bounded between max(x) and max(x) + beta*log(K); gradient is the
    softmax of x/beta.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    if axis != -1:
        raise ValueError("only the last axis is supported")
    xv = np.asarray(ad.value(x), dtype=np.float64)
    m = np.max(xv, axis=-1)
    ex = np.exp((xv - m[..., None]) / beta)
    s = np.sum(ex, axis=-1)
    out = m + beta * np.log(s)
    if not isinstance(x, ad.Var):
        return out

    def vjp(adj):
        return (adj[..., None] * (ex / s[..., None]),)

    return ad.custom(out, (x,), vjp, op="smooth_max")


def mellowmax(x, beta: float, axis: int = -1):
    """Mean-normalized softened maximum: beta * log mean exp(x/beta)."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    xv = np.asarray(ad.value(x), dtype=np.float64)
    m = np.max(xv, axis=axis)
    ex = np.exp((xv - np.expand_dims(m, axis)) / beta)
    return m + beta * np.log(np.mean(ex, axis=axis))


# ---------------------------------------------------------------------------
# fused sigmoid-visibility field for satellite position series


def _elevation_parts(xv, yv, zv, ts: GroundTargetSet):
    dx = xv[None, :] - ts.ecef[:, 0:1]
    dy = yv[None, :] - ts.ecef[:, 1:2]
    dz = zv[None, :] - ts.ecef[:, 2:3]
    hx = ts.ghat[:, 0:1]
    hy = ts.ghat[:, 1:2]
    hz = ts.ghat[:, 2:3]
    dot = dx * hx + dy * hy + dz * hz
    dist = np.sqrt(dx * dx + dy * dy + dz * dz)
    u = dot / dist
    return dx, dy, dz, dist, u


def soft_visibility_series(x, y, z, ts: GroundTargetSet,
                           alpha_min_deg: float, tau_deg: float):
    """Sigmoid visibility of one satellite against every target, (J, K).

    Single tape node with a hand-written pullback; equals the generic
    composition elevation -> sigmoid bit for bit, but stores only the
    output, recomputing geometry during the backward sweep.
    """
    if tau_deg <= 0:
        raise ValueError("tau must be positive")
    amin = math.radians(alpha_min_deg)
    tau = math.radians(tau_deg)

    def arr(v):
        return np.atleast_1d(np.asarray(ad.value(v), dtype=np.float64))

    xv, yv, zv = arr(x), arr(y), arr(z)
    dx, dy, dz, dist, u = _elevation_parts(xv, yv, zv, ts)
    alpha = np.arcsin(np.clip(u, -1.0, 1.0))
    c = _sigmoid_val((alpha - amin) / tau)

    if not (isinstance(x, ad.Var) or isinstance(y, ad.Var) or isinstance(z, ad.Var)):
        return c

    def vjp(adj):
        ddx, ddy, ddz, ddist, uu = _elevation_parts(xv, yv, zv, ts)
        uc = np.clip(uu, -_ASIN_CLAMP, _ASIN_CLAMP)
        dalpha = 1.0 / np.sqrt(1.0 - uc * uc)
        factor = adj * (c * (1.0 - c) / tau) * dalpha / ddist
        fx = factor * (ts.ghat[:, 0:1] - uu * ddx / ddist)
        fy = factor * (ts.ghat[:, 1:2] - uu * ddy / ddist)
        fz = factor * (ts.ghat[:, 2:3] - uu * ddz / ddist)
        outs = []
        for comp, f in zip((x, y, z), (fx, fy, fz)):
            if isinstance(comp, ad.Var):
                outs.append(_unbroadcast(f.sum(axis=0), np.shape(comp.value)))
        return tuple(outs)

    parents = tuple(v for v in (x, y, z) if isinstance(v, ad.Var))
    return ad.custom(c, parents, vjp, op="soft_visibility")


# ---------------------------------------------------------------------------
# hard (indicator) metrics


@dataclass
class HardMetrics:
    coverage: float  # weighted fraction of covered target-samples
    revisit_min: float  # weighted mean of per-target worst gaps [min]
    covered_steps: np.ndarray  # (J,) int64
    worst_gap_min: np.ndarray  # (J,)


@njit(cache=True)
def _hard_kernel(pos, ecef, ghat, s2, dt_min):  # pragma: no cover
    N, K, _ = pos.shape
    J = ecef.shape[0]
    counts = np.zeros(J, dtype=np.int64)
    worst = np.zeros(J)
    for j in range(J):
        gx, gy, gz = ecef[j, 0], ecef[j, 1], ecef[j, 2]
        hx, hy, hz = ghat[j, 0], ghat[j, 1], ghat[j, 2]
        last = -1
        wj = 0.0
        cj = 0
        for k in range(K):
            vis = False
            for i in range(N):
                dx = pos[i, k, 0] - gx
                dy = pos[i, k, 1] - gy
                dz = pos[i, k, 2] - gz
                dot = dx * hx + dy * hy + dz * hz
                if dot > 0.0:
                    d2 = dx * dx + dy * dy + dz * dz
                    if dot * dot >= s2 * d2:
                        vis = True
                        break
            if vis:
                cj += 1
                last = k
            else:
                gap = (k - last) * dt_min if last >= 0 else k * dt_min
                if gap > wj:
                    wj = gap
        counts[j] = cj
        worst[j] = wj
    return counts, worst


def hard_metrics(positions: np.ndarray, ts: GroundTargetSet,
                 alpha_min_deg: float, dt_min: float) -> HardMetrics:
    """Indicator coverage and worst revisit gap from ECEF position series.

    positions: (n_sats, K, 3) [km].  A target visible at sample k resets
    its gap clock; the clock starts at the window start, so a target that
    is never seen accrues (K-1)*dt of gap.
    """
    if not 0.0 < alpha_min_deg < 90.0:
        raise ValueError("minimum elevation must lie in (0, 90) deg")
    if dt_min <= 0:
        raise ValueError("dt must be positive")
    pos = np.ascontiguousarray(positions, dtype=np.float64)
    if pos.ndim != 3 or pos.shape[2] != 3:
        raise ValueError("positions must have shape (n_sats, K, 3)")
    s = math.sin(math.radians(alpha_min_deg))
    counts, worst = _hard_kernel(pos, ts.ecef, ts.ghat, s * s, dt_min)
    K = pos.shape[1]
    wsum = ts.weight_sum
    coverage = float(np.sum(ts.weight * (counts / K)) / wsum)
    revisit = float(np.sum(ts.weight * worst) / wsum)
    return HardMetrics(coverage, revisit, counts, worst)
