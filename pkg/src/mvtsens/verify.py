"""Self-check suite: solver cross-validation and core invariants.

Each check runs many randomized instances and returns a CheckResult
with a counterexample list (inputs plus both answers) on failure. The
suite is what `mvtsens verify` runs; tests also call the checks
directly. All randomness is seeded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .contrasts import contrast_interval
from .data import ObservationalDataset, all_pairwise_contrasts
from .extrema import (
    SensitivityParams,
    all_arm_extrema,
    arm_extrema_lp,
    arm_extrema_threshold,
    shifted_gps,
    sipw_estimate,
)
from .gps import GpsSpec, predict_gps


@dataclass
class CheckResult:
    name: str
    total: int
    passed: int
    counterexamples: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.passed == self.total

    def summary(self) -> str:
        verdict = "pass" if self.ok else "FAIL"
        return f"{self.name}: {self.passed}/{self.total} {verdict}"


def brute_force_extrema(outcomes, logits, params: SensitivityParams):
    """Exhaustive extrema over all 2^n vertex assignments of the box.

    Deliberately independent of the production algorithms: evaluates the
    ratio directly at every vertex.
    """
    y = np.asarray(outcomes, dtype=np.float64)
    g = np.asarray(logits, dtype=np.float64)
    n = y.size
    if n > 20:
        raise ValueError("brute force is limited to n <= 20")
    u = np.exp(-g)
    big, small = params.Lambda, 1.0 / params.Lambda
    bits = (np.arange(2 ** n)[:, None] >> np.arange(n)[None, :]) & 1
    z = np.where(bits == 1, big, small)
    num = y.sum() + z @ (y * u)
    den = n + z @ u
    ratios = num / den
    return float(ratios.min()), float(ratios.max())


def _random_arm(rng, n: int):
    """Outcomes (often with ties) and moderate logits for one arm."""
    if rng.random() < 0.5:
        y = np.round(rng.normal(0.0, 1.0, n), 1)  # coarse grid forces ties
    else:
        y = rng.normal(0.0, 1.0, n)
    g = rng.normal(0.0, 1.5, n)
    return y, g


def check_threshold_vs_bruteforce(
    seed: int = 0, cases: int = 100, max_n: int = 12,
    lambdas=(0.1, 0.5, 1.0, 2.0), tol: float = 1e-9,
) -> CheckResult:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    result = CheckResult("threshold==bruteforce", cases, 0)
    for _ in range(cases):
        n = int(rng.integers(1, max_n + 1))
        y, g = _random_arm(rng, n)
        params = SensitivityParams(float(rng.choice(lambdas)))
        ext = arm_extrema_threshold(y, g, params)
        bf_min, bf_max = brute_force_extrema(y, g, params)
        if abs(ext.m_min - bf_min) <= tol and abs(ext.m_max - bf_max) <= tol:
            result.passed += 1
        else:
            result.counterexamples.append({
                "y": y.tolist(), "g": g.tolist(), "lam": params.lam,
                "threshold": (ext.m_min, ext.m_max),
                "bruteforce": (bf_min, bf_max),
            })
    return result


def check_threshold_vs_lp(
    seed: int = 0, cases: int = 1000, max_n: int = 200, tol: float = 1e-7,
) -> CheckResult:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    result = CheckResult("threshold==lp", cases, 0)
    for _ in range(cases):
        n = int(rng.integers(1, max_n + 1))
        y, g = _random_arm(rng, n)
        params = SensitivityParams(float(rng.choice([0.1, 0.5, 1.0, 2.0])))
        thr = arm_extrema_threshold(y, g, params)
        lp = arm_extrema_lp(y, g, params)
        if abs(thr.m_min - lp.m_min) <= tol and abs(thr.m_max - lp.m_max) <= tol:
            result.passed += 1
        else:
            result.counterexamples.append({
                "n": n, "lam": params.lam,
                "threshold": (thr.m_min, thr.m_max),
                "lp": (lp.m_min, lp.m_max),
            })
    return result


def _random_dataset(rng, n: int, num_levels: int) -> ObservationalDataset:
    """Synthetic multiclass dataset drawn from a random softmax model."""
    d = int(rng.integers(1, 4))
    x = rng.normal(0.0, 1.0, (n, d))
    coef = rng.normal(0.0, 0.7, (num_levels, d + 1))
    eta = np.column_stack([np.ones(n), x]) @ coef.T
    eta -= eta.max(axis=1, keepdims=True)
    p = np.exp(eta)
    p /= p.sum(axis=1, keepdims=True)
    u = rng.random(n)
    treatments = 1 + (u[:, None] > np.cumsum(p, axis=1)).sum(axis=1)
    if rng.random() < 0.5:
        outcomes = (rng.random(n) < 0.5).astype(np.float64)
    else:
        outcomes = rng.normal(0.0, 1.0, n)
    if not np.isin(np.arange(1, num_levels + 1), treatments).all():
        # guarantee every level; overwrite the first few units
        treatments[: num_levels] = np.arange(1, num_levels + 1)
    return ObservationalDataset(
        treatments=treatments.astype(np.int64),
        covariates=x,
        outcomes=outcomes,
        num_levels=num_levels,
        covariate_names=tuple(f"x{j+1}" for j in range(d)),
    )


def _fitted_random_dataset(rng, n_lo: int, n_hi: int):
    """Random dataset plus fitted GPS; redraws the (rare) dataset whose
    unpenalized fit separates, since these checks target the extrema
    algebra rather than the fitter."""
    from .errors import NumericalError

    for _ in range(10):
        n = int(rng.integers(n_lo, n_hi))
        num_levels = int(rng.choice([2, 3, 4]))
        data = _random_dataset(rng, n, num_levels)
        try:
            gps = predict_gps(GpsSpec().fit(data), data)
        except NumericalError:
            continue
        return data, gps, n, num_levels
    raise RuntimeError("could not fit a random dataset in 10 attempts")


def check_collapse(seed: int = 0, datasets: int = 50, tol: float = 1e-12) -> CheckResult:
    """lam=0: every arm and contrast interval has width <= tol and equals
    the plain SIPW estimate, on fitted GPS models."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
    result = CheckResult("lambda0-collapse", datasets, 0)
    params = SensitivityParams(0.0)
    for _ in range(datasets):
        data, gps, n, num_levels = _fitted_random_dataset(rng, 30, 501)
        extrema = all_arm_extrema(data, gps, params)
        bad = []
        for ext in extrema:
            mask = data.arm_mask(ext.arm)
            plain = sipw_estimate(data.outcomes[mask], gps.logits[mask, ext.arm - 1])
            if abs(ext.m_max - ext.m_min) > tol or abs(ext.m_min - plain) > tol:
                bad.append((ext.arm, ext.m_min, ext.m_max, plain))
        for c in all_pairwise_contrasts(num_levels):
            res = contrast_interval(extrema, c)
            if abs(res.interval_hi - res.interval_lo) > tol:
                bad.append((c.label, res.interval_lo, res.interval_hi))
        if bad:
            result.counterexamples.append({"n": n, "J": num_levels, "bad": bad})
        else:
            result.passed += 1
    return result


def check_nesting(
    seed: int = 0, datasets: int = 20,
    lambdas=(0.0, 0.1, 0.5, 1.0, 2.0), tol: float = 1e-12,
) -> CheckResult:
    """Intervals are nested increasing in lambda, per arm and per contrast."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 4]))
    result = CheckResult("lambda-nesting", datasets, 0)
    grid = sorted(lambdas)
    for _ in range(datasets):
        data, gps, n, num_levels = _fitted_random_dataset(rng, 30, 301)
        per_lam = [all_arm_extrema(data, gps, SensitivityParams(l)) for l in grid]
        contrasts = all_pairwise_contrasts(num_levels)
        bad = []
        for prev, cur, l0, l1 in zip(per_lam, per_lam[1:], grid, grid[1:]):
            for e0, e1 in zip(prev, cur):
                if e1.m_min > e0.m_min + tol or e1.m_max < e0.m_max - tol:
                    bad.append(("arm", e0.arm, l0, l1))
            for c in contrasts:
                r0 = contrast_interval(prev, c)
                r1 = contrast_interval(cur, c)
                if (r1.interval_lo > r0.interval_lo + tol
                        or r1.interval_hi < r0.interval_hi - tol):
                    bad.append(("contrast", c.label, l0, l1))
        if bad:
            result.counterexamples.append({"n": n, "J": num_levels, "bad": bad})
        else:
            result.passed += 1
    return result


def check_shifted_gps_identity(
    seed: int = 0, cases: int = 200, tol: float = 1e-12,
) -> CheckResult:
    """1 / shifted GPS reproduces the weight factor 1 + z*exp(-g)."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 5]))
    result = CheckResult("shifted-gps-identity", cases, 0)
    for _ in range(cases):
        n = int(rng.integers(1, 50))
        g = rng.normal(0.0, 2.0, n)
        lam = float(rng.uniform(0.0, 2.0))
        z = np.exp(rng.uniform(-lam, lam, n))
        direct = 1.0 + z * np.exp(-g)
        via_gps = 1.0 / shifted_gps(g, z)
        rel = np.abs(via_gps - direct) / np.maximum(1.0, np.abs(direct))
        if rel.max() <= tol:
            result.passed += 1
        else:
            result.counterexamples.append({"g": g.tolist(), "z": z.tolist(),
                                            "max_rel_err": float(rel.max())})
    return result


def run_all(
    seed: int = 0,
    bruteforce_cases: int = 100,
    lp_cases: int = 1000,
    collapse_datasets: int = 50,
    nesting_datasets: int = 20,
) -> list:
    return [
        check_threshold_vs_bruteforce(seed, cases=bruteforce_cases),
        check_threshold_vs_lp(seed, cases=lp_cases),
        check_collapse(seed, datasets=collapse_datasets),
        check_nesting(seed, datasets=nesting_datasets),
        check_shifted_gps_identity(seed),
    ]
