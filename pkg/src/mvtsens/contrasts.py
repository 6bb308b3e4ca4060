"""Partially identified intervals for additive causal estimands.

An estimand tau(c) = sum_a c_a m(a) inherits an interval from the
per-arm extrema: the multipliers vary independently across arms, so the
range of the sum is the interval-arithmetic sum of c_a * [m_min, m_max].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import ContrastVector, ObservationalDataset, all_pairwise_contrasts
from .errors import InputError, LengthMismatch
from .extrema import ArmExtrema, SensitivityParams, all_arm_extrema


@dataclass(frozen=True)
class ContrastResult:
    """Bounds for one contrast at one lam. point_estimate is the lam=0
    value when known (always equal to the bounds at lam=0)."""

    contrast: ContrastVector
    lam: float
    interval_lo: float
    interval_hi: float
    point_estimate: Optional[float] = None

    def __post_init__(self):
        if self.interval_lo > self.interval_hi + 1e-12:
            raise InputError(
                f"interval_lo {self.interval_lo} exceeds interval_hi {self.interval_hi}"
            )


def contrast_interval(
    extrema: list[ArmExtrema],
    c: ContrastVector,
    point_estimate: Optional[float] = None,
) -> ContrastResult:
    """Combine per-arm extrema into the interval for tau(c)."""
    if len(extrema) != len(c):
        raise LengthMismatch(
            f"LengthMismatch: {len(extrema)} arm extrema for a contrast of length {len(c)}"
        )
    lams = {e.lam for e in extrema}
    if len(lams) != 1:
        raise InputError(f"arm extrema mix different lambda values: {sorted(lams)}")
    lam = extrema[0].lam

    lo = hi = 0.0
    for coef, ext in zip(c.c, extrema):
        if coef == 0.0:
            continue
        if ext.m_min is None or ext.m_max is None:
            raise InputError(f"arm {ext.arm}: both extrema are required")
        if coef > 0.0:
            lo += coef * ext.m_min
            hi += coef * ext.m_max
        else:
            lo += coef * ext.m_max
            hi += coef * ext.m_min
    if point_estimate is None and lam == 0.0:
        point_estimate = lo
    return ContrastResult(
        contrast=c, lam=lam, interval_lo=lo, interval_hi=hi,
        point_estimate=point_estimate,
    )


def pairwise_ate_table(
    data: ObservationalDataset,
    gps,
    params_list: list[SensitivityParams],
    contrasts: Optional[list[ContrastVector]] = None,
) -> list[ContrastResult]:
    """ContrastResult for every (contrast, lam) pair.

    Defaults to all J(J-1)/2 pairwise ATEs. Arm extrema are computed once
    per lam and shared across contrasts; rows come out contrast-major with
    lam ascending within each contrast.
    """
    if contrasts is None:
        contrasts = all_pairwise_contrasts(data.num_levels)
    for c in contrasts:
        if len(c) != data.num_levels:
            raise LengthMismatch(
                f"LengthMismatch: contrast {c.label} has length {len(c)}, "
                f"dataset has {data.num_levels} levels"
            )
    ordered = sorted(params_list, key=lambda p: p.lam)
    extrema_by_lam = {p.lam: all_arm_extrema(data, gps, p) for p in ordered}

    zero = extrema_by_lam.get(0.0)
    if zero is None:
        zero = all_arm_extrema(data, gps, SensitivityParams(0.0))
    points = np.array([e.m_min for e in zero])

    out = []
    for c in contrasts:
        point = float(c.c @ points)
        for p in ordered:
            out.append(contrast_interval(extrema_by_lam[p.lam], c, point_estimate=point))
    return out
