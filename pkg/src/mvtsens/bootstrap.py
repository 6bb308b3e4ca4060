"""Percentile-bootstrap confidence intervals for partially identified bounds.

Each replicate resamples n units with replacement, refits the GPS model
(warm-started from the full-data fit), recomputes the per-arm extrema,
and records the contrast bounds [L*_b, U*_b] for every requested
(contrast, lambda) cell. The CI is [quantile(L*, alpha/2),
quantile(U*, 1 - alpha/2)].

Replicate b draws from its own substream SeedSequence([seed, b]), so
results are bit-identical for a fixed seed no matter how replicates are
scheduled across workers. A resample missing a treatment level is
redrawn from the same substream; sharing one set of resamples across
all lambdas makes the CIs nest monotonically in lambda by construction.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .data import ContrastVector, ObservationalDataset
from .errors import EmptyInput, InputError, ResampleDegenerate
from .extrema import SensitivityParams, _arm_prefix, _extrema_from_prefix
from .gps import (
    _PROB_CEIL,
    _PROB_FLOOR,
    GpsSpec,
    _cr_fit_arrays,
    _cr_probs,
    _mlogit_fit_arrays,
    _mlogit_probs,
    predict_gps,
)

RNG_FAMILY = "numpy PCG64, substream SeedSequence([seed, replicate])"


@dataclass(frozen=True)
class BootstrapConfig:
    B: int = 1000
    alpha: float = 0.10
    seed: int = 0
    refit_gps: bool = True
    max_redraws: int = 100

    def __post_init__(self):
        if self.B < 2:
            raise InputError("bootstrap needs B >= 2 replicates")
        if not 0.0 < self.alpha < 1.0:
            raise InputError("alpha must be in (0, 1)")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise InputError("seed must be a non-negative 64-bit integer")
        if self.max_redraws < 0:
            raise InputError("max_redraws must be >= 0")


@dataclass(frozen=True)
class ConfidenceInterval:
    lo: float
    hi: float
    alpha: float
    B_effective: int

    def __post_init__(self):
        if self.lo > self.hi + 1e-12:
            raise InputError(f"interval endpoints out of order: {self.lo} > {self.hi}")


def quantile(values, q: float) -> float:
    """Linear-interpolation quantile at order-statistic position 1+(len-1)q."""
    arr = np.sort(np.asarray(values, dtype=np.float64))
    if arr.size == 0:
        raise EmptyInput("EmptyInput: quantile of an empty list")
    if not 0.0 <= q <= 1.0:
        raise InputError(f"quantile level must be in [0, 1], not {q}")
    pos = (arr.size - 1) * q
    lo = math.floor(pos)
    hi = math.ceil(pos)
    return float(arr[lo] + (pos - lo) * (arr[hi] - arr[lo]))


def _contrast_split(contrasts: list[ContrastVector]):
    cmat = np.stack([c.c for c in contrasts])
    return np.maximum(cmat, 0.0), np.minimum(cmat, 0.0)


def _logits_from_probs(probs: np.ndarray) -> np.ndarray:
    p = np.clip(probs, _PROB_FLOOR, _PROB_CEIL)
    return np.log(p) - np.log1p(-p)


def _replicate_block(payload):
    """Compute bounds for replicates b_lo..b_hi-1. Runs in a worker."""
    (treatments, covariates, outcomes, num_levels, spec, warm, full_logits,
     c_pos, c_neg, lambdas, seed, b_lo, b_hi, max_redraws) = payload
    n = treatments.shape[0]
    num_l = len(lambdas)
    bounds = np.empty((b_hi - b_lo, c_pos.shape[0], num_l, 2))
    redraws = np.zeros(b_hi - b_lo, dtype=np.int64)
    fit_cfg = replace(spec.config, init=warm) if warm is not None else spec.config
    levels = np.arange(1, num_levels + 1)

    for b in range(b_lo, b_hi):
        rng = np.random.default_rng(np.random.SeedSequence([seed, b]))
        idx = None
        for attempt in range(max_redraws + 1):
            cand = rng.integers(0, n, size=n)
            if np.isin(levels, treatments[cand]).all():
                idx = cand
                redraws[b - b_lo] = attempt
                break
        if idx is None:
            raise ResampleDegenerate(b, max_redraws)

        t_b = treatments[idx]
        y_b = outcomes[idx]
        if full_logits is not None:
            logits = full_logits[idx]
        else:
            x_b = covariates[idx]
            if spec.model_type == "multinomial_logit":
                coef, _ = _mlogit_fit_arrays(t_b, x_b, num_levels, fit_cfg)
                probs = _mlogit_probs(coef, x_b, num_levels)
            else:
                thr, slo, _ = _cr_fit_arrays(t_b, x_b, num_levels, fit_cfg)
                probs = _cr_probs(thr, slo, x_b)
            logits = _logits_from_probs(probs)

        arm_min = np.empty((num_levels, num_l))
        arm_max = np.empty((num_levels, num_l))
        for a in range(1, num_levels + 1):
            members = t_b == a
            pre = _arm_prefix(y_b[members], logits[members, a - 1])
            for j, lam in enumerate(lambdas):
                arm_min[a - 1, j], arm_max[a - 1, j] = _extrema_from_prefix(
                    pre, math.exp(lam)
                )
        block = b - b_lo
        bounds[block, :, :, 0] = c_pos @ arm_min + c_neg @ arm_max
        bounds[block, :, :, 1] = c_pos @ arm_max + c_neg @ arm_min
    return b_lo, bounds, redraws


def bootstrap_bounds(
    data: ObservationalDataset,
    model_spec: GpsSpec,
    contrasts: list[ContrastVector],
    params_list: list[SensitivityParams],
    config: BootstrapConfig,
    n_jobs: int = 1,
):
    """Replicate bounds for every (contrast, lambda) cell.

    Returns (bounds, diagnostics): bounds has shape
    (B, len(contrasts), len(params_list), 2) with [..., 0] = L* and
    [..., 1] = U*, replicate-ordered; diagnostics is a JSON-ready dict.
    """
    for c in contrasts:
        if len(c) != data.num_levels:
            raise InputError(
                f"contrast {c.label} has length {len(c)}, dataset has "
                f"{data.num_levels} levels"
            )
    if n_jobs < 1:
        raise InputError("n_jobs must be >= 1")

    # full-data fit provides the warm start (refit mode) or the fixed
    # weights (non-inferential fast mode)
    model = model_spec.fit(data)
    if config.refit_gps:
        warm = (
            model.coef
            if model_spec.model_type == "multinomial_logit"
            else (model.thresholds, model.slopes)
        )
        full_logits = None
    else:
        warm = None
        full_logits = predict_gps(model, data).logits

    c_pos, c_neg = _contrast_split(contrasts)
    lambdas = [p.lam for p in params_list]
    seed = int(config.seed)

    def payload(b_lo, b_hi):
        return (
            data.treatments, data.covariates, data.outcomes, data.num_levels,
            model_spec, warm, full_logits, c_pos, c_neg, lambdas, seed,
            b_lo, b_hi, config.max_redraws,
        )

    bounds = np.empty((config.B, len(contrasts), len(lambdas), 2))
    total_redraws = 0
    if n_jobs == 1:
        _, block, redraws = _replicate_block(payload(0, config.B))
        bounds[:] = block
        total_redraws = int(redraws.sum())
    else:
        workers = min(n_jobs, config.B)
        edges = np.linspace(0, config.B, workers + 1).astype(int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_replicate_block, payload(lo, hi))
                for lo, hi in zip(edges[:-1], edges[1:])
                if hi > lo
            ]
            for fut in futures:
                b_lo, block, redraws = fut.result()
                bounds[b_lo:b_lo + block.shape[0]] = block
                total_redraws += int(redraws.sum())

    diagnostics = {
        "B": config.B,
        "B_effective": config.B,
        "redraws": total_redraws,
        "seed": seed,
        "alpha": config.alpha,
        "refit_gps": config.refit_gps,
        "rng_family": RNG_FAMILY,
    }
    return bounds, diagnostics


def ci_from_bounds(bounds_cell: np.ndarray, alpha: float) -> ConfidenceInterval:
    """Percentile CI from one cell's (B, 2) replicate bounds."""
    return ConfidenceInterval(
        lo=quantile(bounds_cell[:, 0], alpha / 2.0),
        hi=quantile(bounds_cell[:, 1], 1.0 - alpha / 2.0),
        alpha=alpha,
        B_effective=bounds_cell.shape[0],
    )


def bootstrap_ci_table(
    data: ObservationalDataset,
    model_spec: GpsSpec,
    contrasts: list[ContrastVector],
    params_list: list[SensitivityParams],
    config: BootstrapConfig,
    n_jobs: int = 1,
):
    """CIs for every (contrast, lambda) cell from one shared resample set.

    Returns (cis, bounds, diagnostics) where cis[i][j] matches
    contrasts[i] and params_list[j].
    """
    bounds, diagnostics = bootstrap_bounds(
        data, model_spec, contrasts, params_list, config, n_jobs=n_jobs
    )
    cis = [
        [ci_from_bounds(bounds[:, i, j, :], config.alpha)
         for j in range(len(params_list))]
        for i in range(len(contrasts))
    ]
    return cis, bounds, diagnostics


def percentile_bootstrap_ci(
    data: ObservationalDataset,
    model_spec: GpsSpec,
    c: ContrastVector,
    params: SensitivityParams,
    config: BootstrapConfig,
    n_jobs: int = 1,
) -> ConfidenceInterval:
    """CI for a single contrast at a single lambda."""
    cis, _, _ = bootstrap_ci_table(
        data, model_spec, [c], [params], config, n_jobs=n_jobs
    )
    return cis[0][0]
