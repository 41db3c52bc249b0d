"""Decision-vector layout, constraint reparameterizations, and the design loss.

The optimizer works on a flat vector of unconstrained reals. A ParamSpec maps
that vector onto orbital elements: fixed entries consume no slot, periodic
angles pass through untouched (wrapping happens only at reporting time),
bounded scalars go through a sigmoid interval map, and orbital shape can be
driven by a (perigee altitude, excess altitude) slot pair that keeps perigee
inside its bounds and eccentricity nonnegative for every input. Slots may be
shared by several satellites; sharing is what pins plane structure.
"""

import math
from dataclasses import dataclass, field

import numpy as np

import orbitgrad.autodiff as ad
from orbitgrad.constants import R_EARTH
from orbitgrad.earthgeo import GroundTargetSet, SimWindow, inertial_to_ecef
from orbitgrad.metrics import (
    HardMetrics,
    RelaxConfig,
    coverage_fraction,
    hard_metrics,
    leaky_gaps,
    noisy_or,
    smooth_max,
    soft_visibility_series,
    weighted_mean,
)
from orbitgrad.orbits import ElementSet, positions_array, propagate

_SLOT_KINDS = ("periodic", "interval")
_ANGLE_SOURCES = ("fixed", "slot")
_SHAPE_SOURCES = ("fixed_ae", "pair")

# keeps interval outputs strictly inside their bounds even where float64
# sigmoid saturates to exactly 0 or 1 (|theta| beyond ~37)
_UNIT_CLIP = 1e-12


def _unit_sigmoid(theta):
    val = np.clip(ad.value(ad.sigmoid(ad.value(theta))), _UNIT_CLIP, 1.0 - _UNIT_CLIP)
    if not isinstance(theta, ad.Var):
        return val
    return ad.custom(val, (theta,), lambda adj: (adj * val * (1.0 - val),), op="unit_sigmoid")


def apply_interval(theta, lo: float, hi: float):
    """Sigmoid map from an unconstrained real into the open interval (lo, hi)."""
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ValueError(f"bad interval bounds ({lo}, {hi})")
    return lo + (hi - lo) * _unit_sigmoid(theta)


def invert_interval(x: float, lo: float, hi: float) -> float:
    """Logit inverse of apply_interval, for building initial vectors."""
    u = (x - lo) / (hi - lo)
    if not 0.0 < u < 1.0:
        raise ValueError(f"{x} outside open interval ({lo}, {hi})")
    return math.log(u / (1.0 - u))


def _combine_perigee_excess(rp, dr):
    # a = R + r_p + dr/2, e = dr/(2a); then a(1-e) = R + r_p identically
    a = R_EARTH + rp + dr * 0.5
    e = dr / (2.0 * a)
    return a, e


def apply_perigee_excess(theta_rp, theta_dr, rp_bounds_km, excess_max_km: float):
    """Map two unconstrained reals to (a, e) via perigee and excess altitude.

    Perigee altitude is interval-mapped into rp_bounds_km and the excess
    altitude (apogee minus perigee radius) into [0, excess_max_km], so the
    orbit never dips below the perigee floor and never goes hyperbolic.
    """
    rp = apply_interval(theta_rp, rp_bounds_km[0], rp_bounds_km[1])
    if excess_max_km < 0:
        raise ValueError("excess_max_km must be nonnegative")
    dr = apply_interval(theta_dr, 0.0, excess_max_km) if excess_max_km > 0 else 0.0
    return _combine_perigee_excess(rp, dr)


@dataclass(frozen=True)
class Slot:
    """One entry of the decision vector."""

    name: str
    kind: str  # periodic | interval
    lo: float = 0.0  # interval bounds, in the element's internal unit
    hi: float = 0.0


@dataclass(frozen=True)
class SatRecipe:
    """How one satellite's elements are read from the decision vector.

    Angle sources are ("fixed", value) or ("slot", index[, offset]); offsets
    are added after the slot transform (radians). The shape source is either
    ("fixed_ae", a_km, e) or ("pair", rp_slot, excess_slot).
    """

    shape: tuple
    inc: tuple
    raan: tuple
    argp: tuple
    ma: tuple


@dataclass
class ParamSpec:
    """Slot list plus per-satellite recipes; the search-space definition."""

    slots: list
    sats: list
    _use_counts: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        counts = np.zeros(len(self.slots), dtype=np.int64)
        for slot in self.slots:
            if slot.kind not in _SLOT_KINDS:
                raise ValueError(f"unknown slot kind {slot.kind!r}")
            if slot.kind == "interval" and not (
                math.isfinite(slot.lo) and math.isfinite(slot.hi) and slot.lo < slot.hi
            ):
                raise ValueError(f"slot {slot.name!r} has bad bounds")
        for rec in self.sats:
            kind = rec.shape[0]
            if kind not in _SHAPE_SOURCES:
                raise ValueError(f"unknown shape source {kind!r}")
            if kind == "pair":
                for idx in rec.shape[1:3]:
                    self._check_slot(idx, "interval")
                    counts[idx] += 1
            for src in (rec.inc, rec.raan, rec.argp, rec.ma):
                if src[0] not in _ANGLE_SOURCES:
                    raise ValueError(f"unknown angle source {src[0]!r}")
                if src[0] == "slot":
                    self._check_slot(src[1], None)
                    counts[src[1]] += 1
        if len(self.slots) and not counts.all():
            unused = [self.slots[i].name for i in np.flatnonzero(counts == 0)]
            raise ValueError(f"slots never referenced: {unused}")
        self._use_counts = counts

    def _check_slot(self, idx, need_kind):
        if not 0 <= idx < len(self.slots):
            raise ValueError(f"slot index {idx} out of range")
        if need_kind is not None and self.slots[idx].kind != need_kind:
            raise ValueError(f"slot {self.slots[idx].name!r} must be {need_kind}")

    @property
    def n_slots(self) -> int:
        return len(self.slots)

    @property
    def slot_names(self) -> list:
        return [s.name for s in self.slots]

    @property
    def slot_use_counts(self) -> np.ndarray:
        return self._use_counts.copy()

    def transform(self, theta):
        """Slot-wise constraint maps; periodic slots pass through untouched."""
        if len(theta) != len(self.slots):
            raise ValueError(f"expected {len(self.slots)} slot values, got {len(theta)}")
        out = []
        for slot, t in zip(self.slots, theta):
            out.append(t if slot.kind == "periodic" else apply_interval(t, slot.lo, slot.hi))
        return out

    def _angle(self, src, phys):
        if src[0] == "fixed":
            return src[1]
        val = phys[src[1]]
        return val + src[2] if len(src) > 2 else val

    def unpack(self, theta):
        """Resolve the decision vector into one ElementSet per satellite."""
        phys = self.transform(theta)
        els = []
        for rec in self.sats:
            if rec.shape[0] == "fixed_ae":
                a, e = rec.shape[1], rec.shape[2]
            else:
                a, e = _combine_perigee_excess(phys[rec.shape[1]], phys[rec.shape[2]])
            els.append(
                ElementSet(
                    a=a,
                    e=e,
                    inc=self._angle(rec.inc, phys),
                    raan=self._angle(rec.raan, phys),
                    argp=self._angle(rec.argp, phys),
                    ma=self._angle(rec.ma, phys),
                )
            )
        return els


# ---------------------------------------------------------------------------
# stock search-space layouts


def phase_pair_spec(alt_km: float = 550.0, inc_deg: float = 60.0, raan_deg: float = 0.0) -> ParamSpec:
    """Two satellites in one circular plane with only their phases free."""
    fixed = dict(
        shape=("fixed_ae", R_EARTH + alt_km, 0.0),
        inc=("fixed", math.radians(inc_deg)),
        raan=("fixed", math.radians(raan_deg)),
        argp=("fixed", 0.0),
    )
    return ParamSpec(
        slots=[Slot("ma_sat0", "periodic"), Slot("ma_sat1", "periodic")],
        sats=[SatRecipe(ma=("slot", 0), **fixed), SatRecipe(ma=("slot", 1), **fixed)],
    )


def walker_share_spec(
    planes: int = 6, per_plane: int = 4, alt_km: float = 550.0, inc_deg: float = 60.0
) -> ParamSpec:
    """Circular constellation with one shared RAAN per plane and free phases.

    Slot order: the plane RAANs first, then one mean anomaly per satellite.
    """
    slots = [Slot(f"raan_plane{p}", "periodic") for p in range(planes)]
    slots += [Slot(f"ma_sat{i:02d}", "periodic") for i in range(planes * per_plane)]
    sats = []
    for i in range(planes * per_plane):
        p = i // per_plane
        sats.append(
            SatRecipe(
                shape=("fixed_ae", R_EARTH + alt_km, 0.0),
                inc=("fixed", math.radians(inc_deg)),
                raan=("slot", p),
                argp=("fixed", 0.0),
                ma=("slot", planes + i),
            )
        )
    return ParamSpec(slots=slots, sats=sats)


def two_plane_shape_spec(
    per_plane: int = 2,
    inc_bounds_deg: tuple = (30.0, 90.0),
    rp_bounds_km: tuple = (400.0, 600.0),
    excess_max_km: float = 1500.0,
    phase_offsets_deg: tuple | None = None,
) -> ParamSpec:
    """Two planes with shared geometry and shape, phases offset inside a plane.

    Per plane, in slot order: inclination (interval), RAAN, argument of
    perigee, perigee altitude (interval, km), excess altitude (interval, km),
    and the plane's phase base. Members of a plane sit at fixed equispaced
    phase offsets from the base, so each plane contributes six slots.
    """
    if phase_offsets_deg is None:
        phase_offsets_deg = tuple(360.0 * s / per_plane for s in range(per_plane))
    slots = []
    sats = []
    for p in range(2):
        base = len(slots)
        slots += [
            Slot(f"inc_plane{p}", "interval", math.radians(inc_bounds_deg[0]), math.radians(inc_bounds_deg[1])),
            Slot(f"raan_plane{p}", "periodic"),
            Slot(f"argp_plane{p}", "periodic"),
            Slot(f"perigee_plane{p}", "interval", rp_bounds_km[0], rp_bounds_km[1]),
            Slot(f"excess_plane{p}", "interval", 0.0, excess_max_km),
            Slot(f"ma_base_plane{p}", "periodic"),
        ]
        for s in range(per_plane):
            sats.append(
                SatRecipe(
                    shape=("pair", base + 3, base + 4),
                    inc=("slot", base),
                    raan=("slot", base + 1),
                    argp=("slot", base + 2),
                    ma=("slot", base + 5, math.radians(phase_offsets_deg[s])),
                )
            )
    return ParamSpec(slots=slots, sats=sats)


# ---------------------------------------------------------------------------
# the assembled loss


@dataclass
class LossAux:
    """Float-valued byproducts of one loss evaluation."""

    soft_coverage: float
    soft_revisit_min: float
    positions_ecef: np.ndarray  # (N, K, 3) [km]


def relaxed_loss(theta, spec: ParamSpec, targets: GroundTargetSet, window: SimWindow, relax: RelaxConfig,
                 cov_weight: float = 1.0):
    """Full forward pass: elements -> orbits -> visibility -> combined loss.

    theta entries may be tape leaves or plain floats; the same expressions
    evaluate either way. Returns (loss, aux). The coverage and revisit
    branches get their own visibility temperatures; the tensor is shared when
    the temperatures agree. cov_weight scales the coverage term (0 drops it
    entirely, giving a revisit-only loss).
    """
    if cov_weight < 0:
        raise ValueError("cov_weight must be non-negative")
    if cov_weight == 0.0 and relax.lam == 0.0:
        raise ValueError("loss needs at least one active term")
    els = spec.unpack(list(theta))
    t = window.times_s
    gm = window.gmst_rad
    shared_tau = relax.tau_cov_deg == relax.tau_rev_deg

    vis_cov = []
    vis_rev = []
    pos = np.empty((len(els), window.steps, 3))
    for i, el in enumerate(els):
        x, y, z = propagate(el, t)
        xe, ye, ze = inertial_to_ecef(x, y, z, gm)
        pos[i, :, 0] = ad.value(xe)
        pos[i, :, 1] = ad.value(ye)
        pos[i, :, 2] = ad.value(ze)
        vis_cov.append(soft_visibility_series(xe, ye, ze, targets, relax.alpha_min_deg, relax.tau_cov_deg))
        if not shared_tau:
            vis_rev.append(soft_visibility_series(xe, ye, ze, targets, relax.alpha_min_deg, relax.tau_rev_deg))

    C_cov = noisy_or(vis_cov)
    cov = coverage_fraction(C_cov, targets.weight)
    C_rev = C_cov if shared_tau else noisy_or(vis_rev)
    gaps = leaky_gaps(C_rev, window.dt_min)
    worst = smooth_max(gaps, relax.beta_min, axis=-1)
    rev = weighted_mean(worst, targets.weight)

    if relax.lam == 0.0:
        loss = -cov if cov_weight == 1.0 else cov_weight * -cov
    elif cov_weight == 0.0:
        loss = relax.lam * rev
    else:
        base = -cov if cov_weight == 1.0 else cov_weight * -cov
        loss = base + relax.lam * rev
    aux = LossAux(float(ad.value(cov)), float(ad.value(rev)), pos)
    return loss, aux


def plane_average_grads(grads: np.ndarray, spec: ParamSpec) -> np.ndarray:
    """Turn tape-summed shared-slot gradients into per-member means."""
    counts = spec.slot_use_counts
    if len(grads) != len(counts):
        raise ValueError("gradient length does not match slot count")
    return np.asarray(grads, dtype=np.float64) / counts


def loss_and_grad(theta, spec: ParamSpec, targets: GroundTargetSet, window: SimWindow, relax: RelaxConfig,
                  cov_weight: float = 1.0):
    """Loss, plane-averaged gradient, and aux metrics at a parameter vector."""
    leaves = ad.seed_params([float(v) for v in theta])
    loss, aux = relaxed_loss(leaves, spec, targets, window, relax, cov_weight)
    grads = plane_average_grads(np.asarray(ad.gradient(loss, leaves)), spec)
    return float(ad.value(loss)), grads, aux


def hard_fitness(theta, spec: ParamSpec, targets: GroundTargetSet, window: SimWindow, relax: RelaxConfig):
    """Derivative-free fitness -C + lam * revisit on the exact metrics.

    This is the objective the black-box baselines see; it never touches the
    tape and runs on the compiled visibility kernel.
    """
    els = spec.unpack([float(v) for v in theta])
    pos = positions_array(els, window.times_s)
    pe = np.empty_like(pos)
    pe[:, :, 0], pe[:, :, 1], pe[:, :, 2] = inertial_to_ecef(
        pos[:, :, 0], pos[:, :, 1], pos[:, :, 2], window.gmst_rad
    )
    hm = hard_metrics(pe, targets, relax.alpha_min_deg, window.dt_min)
    return -hm.coverage + relax.lam * hm.revisit_min, hm


@dataclass
class DesignProblem:
    """Targets, time window, and relaxation bundled as one optimization target."""

    targets: GroundTargetSet
    window: SimWindow
    relax: RelaxConfig
    cov_weight: float = 1.0

    def loss_and_grad(self, theta, spec: ParamSpec):
        return loss_and_grad(theta, spec, self.targets, self.window, self.relax, self.cov_weight)

    def relaxed_loss(self, theta, spec: ParamSpec):
        return relaxed_loss(theta, spec, self.targets, self.window, self.relax, self.cov_weight)

    def hard_fitness(self, theta, spec: ParamSpec):
        return hard_fitness(theta, spec, self.targets, self.window, self.relax)

    def hard_eval(self, positions_ecef: np.ndarray) -> HardMetrics:
        return hard_metrics(
            positions_ecef, self.targets, self.relax.alpha_min_deg, self.window.dt_min
        )
