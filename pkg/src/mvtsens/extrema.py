"""Extrema of the shifted SIPW estimator over one treatment arm.

For arm a with outcomes Y_i and GPS logits g_i, the shifted estimate is

    m(z) = sum_i Y_i (1 + z_i exp(-g_i)) / sum_i (1 + z_i exp(-g_i)),

a linear fractional function of z on the box [1/Lambda, Lambda]^n_a.
Its extrema sit at vertices with a threshold structure in Y: the
maximum puts z_i = Lambda on outcomes above a cut and 1/Lambda below
(reversed for the minimum), so a sort plus a prefix-sum sweep over the
n_a + 1 cut positions is exact in O(n_a log n_a). A Charnes-Cooper LP
route solves the same program independently, for cross-checking.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .data import ObservationalDataset
from .errors import EmptyArm, InputError, LpInfeasible

logger = logging.getLogger(__name__)

# exp(-logit) factors are clamped here; firing signals overlap failure
WEIGHT_CLAMP = (1e-12, 1e12)


@dataclass(frozen=True)
class SensitivityParams:
    """Sensitivity magnitude lam >= 0 on the log-odds scale; Lambda = e^lam."""

    lam: float
    Lambda: float = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.lam < 0 or not math.isfinite(self.lam):
            raise InputError("sensitivity parameter lambda must be finite and >= 0")
        if self.Lambda is None:
            object.__setattr__(self, "Lambda", math.exp(self.lam))
        elif abs(self.lam - math.log(self.Lambda)) > 1e-15 * max(1.0, self.lam):
            raise InputError("Lambda must equal exp(lambda)")

    @classmethod
    def from_Lambda(cls, Lambda: float) -> "SensitivityParams":
        if Lambda < 1:
            raise InputError("Lambda must be >= 1")
        return cls(lam=math.log(Lambda), Lambda=Lambda)


@dataclass(frozen=True, eq=False)
class ZAssignment:
    """Per-unit multipliers z_i = exp(h_a(X_i, Y_i)) for one arm."""

    z: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.float64)
        if z.ndim != 1:
            raise InputError("z must be a 1-d vector")
        z = z.copy()
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    def validate(self, params: SensitivityParams) -> None:
        lo, hi = 1.0 / params.Lambda, params.Lambda
        if self.z.size and (self.z.min() < lo * (1 - 1e-12) or self.z.max() > hi * (1 + 1e-12)):
            raise InputError(
                f"z assignment leaves the box [{lo:.6g}, {hi:.6g}]"
            )


@dataclass(frozen=True)
class ArmExtrema:
    """Extrema of the shifted SIPW estimate for one arm at one lam.

    A one-sided computation leaves the unneeded side None.
    """

    arm: int
    lam: float
    m_min: Optional[float]
    m_max: Optional[float]
    argmin_z: Optional[ZAssignment] = None
    argmax_z: Optional[ZAssignment] = None

    def __post_init__(self):
        if self.m_min is not None and self.m_max is not None:
            if self.m_min > self.m_max + 1e-12:
                raise InputError(f"m_min {self.m_min} exceeds m_max {self.m_max}")


def _weight_factors(logits: np.ndarray) -> np.ndarray:
    """exp(-g_i), clamped to WEIGHT_CLAMP with a logged warning."""
    g = np.asarray(logits, dtype=np.float64)
    with np.errstate(over="ignore", under="ignore"):
        u = np.exp(-g)
    clamped = np.clip(u, *WEIGHT_CLAMP)
    n_hit = int(np.count_nonzero(clamped != u))
    if n_hit:
        logger.warning(
            "clamped inverse-GPS weight factors for %d unit(s); "
            "extreme propensity scores indicate poor overlap", n_hit,
        )
    return clamped


def shifted_gps(logits: np.ndarray, z) -> np.ndarray:
    """GPS implied by multiplier z: r = 1 / (1 + z * exp(-g))."""
    zv = z.z if isinstance(z, ZAssignment) else np.asarray(z, dtype=np.float64)
    return 1.0 / (1.0 + zv * _weight_factors(logits))


def sipw_estimate(outcomes: np.ndarray, logits: np.ndarray, z=None) -> float:
    """Normalized inverse-probability-weighted mean of one arm's outcomes.

    z = None means the unshifted estimate (all multipliers 1).
    """
    y = np.asarray(outcomes, dtype=np.float64)
    if y.size == 0:
        raise EmptyArm()
    g = np.asarray(logits, dtype=np.float64)
    if g.shape != y.shape:
        raise InputError("outcomes and logits must have equal length")
    if z is None:
        zv = np.ones_like(y)
    else:
        zv = z.z if isinstance(z, ZAssignment) else np.asarray(z, dtype=np.float64)
    w = 1.0 + zv * _weight_factors(g)
    return float((y * w).sum() / w.sum())


def _sweep(ys, us, s_y, lo_mult, hi_mult, sense):
    """Best ratio over cut positions: multiplier lo_mult below the cut,
    hi_mult at and above it, on outcome-sorted arrays. sense=+1 max, -1 min."""
    cum_yu = np.concatenate([[0.0], np.cumsum(ys * us)])
    cum_u = np.concatenate([[0.0], np.cumsum(us)])
    tot_yu, tot_u = cum_yu[-1], cum_u[-1]
    num = s_y + lo_mult * cum_yu + hi_mult * (tot_yu - cum_yu)
    den = ys.size + lo_mult * cum_u + hi_mult * (tot_u - cum_u)
    ratios = num / den
    cut = int(np.argmax(sense * ratios))
    return ratios[cut], cut


def arm_extrema_threshold(
    outcomes: np.ndarray,
    logits: np.ndarray,
    params: SensitivityParams,
    direction: str = "both",
    arm: int = 0,
) -> ArmExtrema:
    """Exact extrema by the sort-and-sweep vertex algorithm."""
    if direction not in ("min", "max", "both"):
        raise InputError(f"direction must be min, max or both, not {direction!r}")
    y = np.asarray(outcomes, dtype=np.float64)
    if y.size == 0:
        raise EmptyArm(arm if arm else None)
    g = np.asarray(logits, dtype=np.float64)
    if g.shape != y.shape:
        raise InputError("outcomes and logits must have equal length")

    if params.Lambda == 1.0:
        m = sipw_estimate(y, g)
        ones = ZAssignment(np.ones_like(y))
        return ArmExtrema(arm=arm, lam=params.lam, m_min=m, m_max=m,
                          argmin_z=ones, argmax_z=ones)

    u = _weight_factors(g)
    order = np.argsort(y, kind="stable")
    ys, us = y[order], u[order]
    s_y = ys.sum()
    big, small = params.Lambda, 1.0 / params.Lambda

    m_min = m_max = None
    argmin_z = argmax_z = None
    if direction in ("max", "both"):
        m, cut = _sweep(ys, us, s_y, small, big, +1.0)
        z_sorted = np.where(np.arange(y.size) < cut, small, big)
        z = np.empty_like(z_sorted)
        z[order] = z_sorted
        m_max, argmax_z = float(m), ZAssignment(z)
    if direction in ("min", "both"):
        m, cut = _sweep(ys, us, s_y, big, small, -1.0)
        z_sorted = np.where(np.arange(y.size) < cut, big, small)
        z = np.empty_like(z_sorted)
        z[order] = z_sorted
        m_min, argmin_z = float(m), ZAssignment(z)

    return ArmExtrema(arm=arm, lam=params.lam, m_min=m_min, m_max=m_max,
                      argmin_z=argmin_z, argmax_z=argmax_z)


def arm_extrema_lp(
    outcomes: np.ndarray,
    logits: np.ndarray,
    params: SensitivityParams,
    arm: int = 0,
) -> ArmExtrema:
    """Same extrema through the Charnes-Cooper linear program.

    Variables (t, w) with w_i = t * z_i; the fractional objective becomes
    linear under the normalization sum_i (t + w_i exp(-g_i)) = 1, and the
    box on z becomes the ray constraints t/Lambda <= w_i <= t*Lambda.
    Exists as an independent cross-check of the threshold algorithm.
    """
    y = np.asarray(outcomes, dtype=np.float64)
    if y.size == 0:
        raise EmptyArm(arm if arm else None)
    g = np.asarray(logits, dtype=np.float64)
    u = _weight_factors(g)
    n = y.size
    big, small = params.Lambda, 1.0 / params.Lambda

    # objective coefficients on (t, w_1..w_n)
    obj = np.concatenate([[y.sum()], y * u])
    a_eq = np.concatenate([[n], u])[None, :]
    # w_i - big*t <= 0 and small*t - w_i <= 0
    a_ub = np.zeros((2 * n, n + 1))
    a_ub[:n, 0] = -big
    a_ub[:n, 1:] = np.eye(n)
    a_ub[n:, 0] = small
    a_ub[n:, 1:] = -np.eye(n)
    bounds = [(0.0, None)] * (n + 1)

    results = {}
    for sense, sign in (("max", -1.0), ("min", 1.0)):
        res = linprog(
            sign * obj, A_ub=a_ub, b_ub=np.zeros(2 * n),
            A_eq=a_eq, b_eq=[1.0], bounds=bounds, method="highs",
        )
        if not res.success:
            raise LpInfeasible(f"status {res.status}: {res.message}")
        t = res.x[0]
        results[sense] = (float(obj @ res.x), ZAssignment(res.x[1:] / t))

    return ArmExtrema(
        arm=arm, lam=params.lam,
        m_min=results["min"][0], m_max=results["max"][0],
        argmin_z=results["min"][1], argmax_z=results["max"][1],
    )


def all_arm_extrema(
    data: ObservationalDataset,
    gps,
    params: SensitivityParams,
) -> list[ArmExtrema]:
    """Threshold-algorithm extrema for every arm 1..J."""
    out = []
    for a in range(1, data.num_levels + 1):
        mask = data.arm_mask(a)
        if not mask.any():
            raise EmptyArm(a)
        out.append(
            arm_extrema_threshold(
                data.outcomes[mask], gps.logits[mask, a - 1], params, arm=a
            )
        )
    return out


# ---------------------------------------------------------------------------
# batch path used by bootstrap/simulation: sort each arm once, then reuse
# the prefix sums across many lambda values


@dataclass(frozen=True)
class _ArmPrefix:
    s_y: float
    n: int
    cum_yu: np.ndarray
    cum_u: np.ndarray
    sipw: float


def _arm_prefix(outcomes: np.ndarray, logits: np.ndarray) -> _ArmPrefix:
    y = np.asarray(outcomes, dtype=np.float64)
    if y.size == 0:
        raise EmptyArm()
    u = _weight_factors(np.asarray(logits, dtype=np.float64))
    order = np.argsort(y, kind="stable")
    ys, us = y[order], u[order]
    w = 1.0 + u
    return _ArmPrefix(
        s_y=float(ys.sum()),
        n=y.size,
        cum_yu=np.concatenate([[0.0], np.cumsum(ys * us)]),
        cum_u=np.concatenate([[0.0], np.cumsum(us)]),
        sipw=float((y * w).sum() / w.sum()),
    )


def _extrema_from_prefix(pre: _ArmPrefix, Lambda: float) -> tuple[float, float]:
    """(m_min, m_max) at one Lambda from precomputed prefix sums."""
    if Lambda == 1.0:
        return pre.sipw, pre.sipw
    big, small = Lambda, 1.0 / Lambda
    tot_yu, tot_u = pre.cum_yu[-1], pre.cum_u[-1]

    num = pre.s_y + small * pre.cum_yu + big * (tot_yu - pre.cum_yu)
    den = pre.n + small * pre.cum_u + big * (tot_u - pre.cum_u)
    m_max = float(np.max(num / den))

    num = pre.s_y + big * pre.cum_yu + small * (tot_yu - pre.cum_yu)
    den = pre.n + big * pre.cum_u + small * (tot_u - pre.cum_u)
    m_min = float(np.min(num / den))
    return m_min, m_max
