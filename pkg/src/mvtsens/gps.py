"""Generalized propensity score models.

Two parametric families estimate r_a(x) = P(A = a | X = x): a
multinomial logit with reference level 1, and a forward continuation
ratio model (ordinal stages, shared slopes). Both are fit by full
Newton-Raphson with step-halving; covariates are standardized
internally and coefficients reported on the original scale.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logsumexp

from .data import ObservationalDataset
from .errors import (
    DidNotConverge,
    DimensionMismatch,
    InputError,
    SeparationDetected,
)

logger = logging.getLogger(__name__)

MODEL_TYPES = ("multinomial_logit", "continuation_ratio")

# any fitted probability below this during an unpenalized fit is treated
# as (quasi-)separation
SEPARATION_PROB = 1e-10

# keep predicted probabilities strictly inside (0,1) so logits stay finite
_PROB_FLOOR = 1e-300
_PROB_CEIL = 1.0 - 1e-16


@dataclass(frozen=True)
class FitConfig:
    """Newton-Raphson settings. ``init`` is an optional warm start on the
    original covariate scale (same layout as the fitted coefficients)."""

    max_iter: int = 100
    grad_tol: float = 1e-8
    ridge: float = 0.0
    init: np.ndarray | None = None

    def __post_init__(self):
        if self.max_iter < 1:
            raise InputError("max_iter must be >= 1")
        if self.grad_tol <= 0:
            raise InputError("grad_tol must be positive")
        if self.ridge < 0:
            raise InputError("ridge must be >= 0")


@dataclass(frozen=True)
class FitDiagnostics:
    loglik: float
    iterations: int
    grad_norm: float


@dataclass(frozen=True)
class MultinomialLogitModel:
    """coef has shape (J-1) x (d+1): one row per non-reference level,
    columns (intercept, covariates). Level 1 is the reference."""

    coef: np.ndarray
    num_levels: int
    covariate_names: tuple[str, ...]
    diagnostics: FitDiagnostics
    level_labels: tuple[str, ...] = field(default=())
    reference_level: int = 1

    model_type = "multinomial_logit"

    @property
    def num_covariates(self) -> int:
        return self.coef.shape[1] - 1

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return _mlogit_probs(self.coef, np.atleast_2d(x), self.num_levels)


@dataclass(frozen=True)
class ContinuationRatioModel:
    """Forward continuation-ratio model: stage hazards
    P(A = s | A >= s, x) = sigmoid(thresholds[s-1] + x @ slopes) for
    s = 1..J-1; level probabilities reconstructed by telescoping."""

    thresholds: np.ndarray
    slopes: np.ndarray
    num_levels: int
    covariate_names: tuple[str, ...]
    diagnostics: FitDiagnostics
    level_labels: tuple[str, ...] = field(default=())

    model_type = "continuation_ratio"

    @property
    def num_covariates(self) -> int:
        return self.slopes.shape[0]

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return _cr_probs(self.thresholds, self.slopes, np.atleast_2d(x))


@dataclass(frozen=True, eq=False)
class GpsMatrix:
    """Fitted GPS values for a dataset: ``probs`` is n x J row-stochastic,
    ``logits[i, a-1] = logit(probs[i, a-1])`` by construction."""

    probs: np.ndarray
    logits: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 2:
            raise InputError("probs must be 2-d")
        if p.min() <= 0.0 or p.max() >= 1.0:
            raise InputError("GPS probabilities must lie strictly in (0,1)")
        rowsum = p.sum(axis=1)
        err = np.abs(rowsum - 1.0).max()
        if err > 1e-10:
            raise InputError(f"GPS rows must sum to 1 (max deviation {err:.3e})")
        for name, arr in (("probs", p), ("logits", np.asarray(self.logits))):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_probs(cls, probs: np.ndarray) -> "GpsMatrix":
        p = np.clip(probs, _PROB_FLOOR, _PROB_CEIL)
        return cls(probs=p, logits=np.log(p) - np.log1p(-p))

    @property
    def n(self) -> int:
        return self.probs.shape[0]

    @property
    def num_levels(self) -> int:
        return self.probs.shape[1]

    def observed(self, treatments: np.ndarray) -> np.ndarray:
        """r_{A_i}(X_i) for each unit."""
        return self.probs[np.arange(self.n), np.asarray(treatments) - 1]


# ---------------------------------------------------------------------------
# core Newton solver on an explicit design matrix


def _softmax_ref(eta_nonref: np.ndarray) -> np.ndarray:
    # class 0 is the reference with linear predictor 0
    n = eta_nonref.shape[0]
    eta = np.concatenate([np.zeros((n, 1)), eta_nonref], axis=1)
    eta -= eta.max(axis=1, keepdims=True)
    p = np.exp(eta)
    p /= p.sum(axis=1, keepdims=True)
    return p


def _newton_multilogit(
    design: np.ndarray,
    classes: np.ndarray,
    num_classes: int,
    *,
    ridge: float,
    max_iter: int,
    grad_tol: float,
    init: np.ndarray | None = None,
    trace: list | None = None,
):
    """Maximize the (optionally ridge-penalized) multinomial log-likelihood
    over coefficients of shape (num_classes-1) x p, reference class 0.

    ``classes`` holds 0-based labels. Returns (coef, FitDiagnostics).
    """
    n, p = design.shape
    k = num_classes - 1
    beta = np.zeros((k, p)) if init is None else np.array(init, dtype=np.float64)
    if beta.shape != (k, p):
        raise DimensionMismatch(f"DimensionMismatch: init shape {beta.shape} != {(k, p)}")
    onehot = (classes[:, None] == np.arange(1, num_classes)[None, :]).astype(np.float64)
    rows = np.arange(n)

    def penalized_loglik(b):
        eta = np.concatenate([np.zeros((n, 1)), design @ b.T], axis=1)
        ll = float(np.sum(eta[rows, classes] - logsumexp(eta, axis=1)))
        return ll - 0.5 * ridge * float(np.sum(b * b))

    ll = penalized_loglik(beta)
    if trace is not None:
        trace.append(ll)
    grad_norm = np.inf
    for iteration in range(max_iter + 1):
        probs = _softmax_ref(design @ beta.T)
        if ridge == 0.0 and probs.min() < SEPARATION_PROB:
            raise SeparationDetected(float(probs.min()))
        resid = onehot - probs[:, 1:]
        grad = resid.T @ design - ridge * beta
        grad_norm = float(np.abs(grad).max())
        if grad_norm <= grad_tol:
            return beta, FitDiagnostics(
                loglik=penalized_loglik(beta) + 0.5 * ridge * float(np.sum(beta * beta)),
                iterations=iteration,
                grad_norm=grad_norm,
            )
        if iteration == max_iter:
            break
        # negative Hessian, assembled from p x p blocks
        neg_hess = np.empty((k * p, k * p))
        for a in range(k):
            pa = probs[:, a + 1]
            for b in range(a, k):
                w = pa * ((1.0 if a == b else 0.0) - probs[:, b + 1])
                blk = (design * w[:, None]).T @ design
                if a == b:
                    blk = blk + ridge * np.eye(p)
                neg_hess[a * p:(a + 1) * p, b * p:(b + 1) * p] = blk
                if b != a:
                    neg_hess[b * p:(b + 1) * p, a * p:(a + 1) * p] = blk.T
        try:
            step = np.linalg.solve(neg_hess, grad.reshape(-1))
        except np.linalg.LinAlgError:
            step = np.linalg.solve(
                neg_hess + 1e-6 * np.eye(k * p), grad.reshape(-1)
            )
        step = step.reshape(k, p)
        # accept within float-resolution slack of the current value: near
        # the optimum the true gain underflows the loglik's ulp while the
        # gradient still has room to shrink
        slack = 1e-10 * (1.0 + abs(ll))
        scale = 1.0
        accepted = False
        for _ in range(30):
            cand = beta + scale * step
            cand_ll = penalized_loglik(cand)
            if cand_ll >= ll - slack:
                beta, ll = cand, cand_ll
                accepted = True
                if trace is not None:
                    trace.append(cand_ll)
                break
            scale *= 0.5
        if not accepted:
            break
    raise DidNotConverge(min(iteration + 1, max_iter), grad_norm)


# ---------------------------------------------------------------------------
# covariate standardization (binary columns untouched)


def _standardize(x: np.ndarray):
    mu = np.zeros(x.shape[1])
    sigma = np.ones(x.shape[1])
    for j in range(x.shape[1]):
        col = x[:, j]
        if np.all((col == 0.0) | (col == 1.0)):
            continue
        mu[j] = col.mean()
        s = col.std()
        sigma[j] = s if s > 1e-12 else 1.0
    return (x - mu) / sigma, mu, sigma


# ---------------------------------------------------------------------------
# multinomial logit wrappers


def _mlogit_fit_arrays(
    treatments: np.ndarray,
    covariates: np.ndarray,
    num_levels: int,
    config: FitConfig,
    trace: list | None = None,
):
    x_std, mu, sigma = _standardize(covariates)
    design = np.column_stack([np.ones(covariates.shape[0]), x_std])
    init = None
    if config.init is not None:
        init = np.array(config.init, dtype=np.float64)
        # original scale -> standardized scale
        init[:, 1:] = init[:, 1:] * sigma
        init[:, 0] = init[:, 0] + init[:, 1:] @ (mu / sigma)
    coef_std, diag = _newton_multilogit(
        design,
        np.asarray(treatments) - 1,
        num_levels,
        ridge=config.ridge,
        max_iter=config.max_iter,
        grad_tol=config.grad_tol,
        init=init,
        trace=trace,
    )
    coef = coef_std.copy()
    coef[:, 1:] = coef_std[:, 1:] / sigma
    coef[:, 0] = coef_std[:, 0] - coef_std[:, 1:] @ (mu / sigma)
    return coef, diag


def _mlogit_probs(coef: np.ndarray, x: np.ndarray, num_levels: int) -> np.ndarray:
    design = np.column_stack([np.ones(x.shape[0]), x])
    return _softmax_ref(design @ coef.T)


def fit_multinomial_logit(
    data: ObservationalDataset, config: FitConfig = FitConfig()
) -> MultinomialLogitModel:
    """Fit r_a(x) by multinomial logistic regression, reference level 1."""
    n, d, num_levels = data.n, data.num_covariates, data.num_levels
    if n <= num_levels * (d + 1):
        logger.warning(
            "small sample for GPS fit: n=%d with %d parameters",
            n, (num_levels - 1) * (d + 1),
        )
    coef, diag = _mlogit_fit_arrays(data.treatments, data.covariates, num_levels, config)
    return MultinomialLogitModel(
        coef=coef,
        num_levels=num_levels,
        covariate_names=data.covariate_names,
        diagnostics=diag,
        level_labels=data.level_labels,
    )


# ---------------------------------------------------------------------------
# continuation ratio wrappers

# The continuation-ratio likelihood factorizes into independent Bernoulli
# terms over (unit, stage) pairs with A_i >= stage, so one binary logistic
# fit on the expanded design (stage indicators + shared covariates) is the
# exact MLE, and its log-likelihood equals the model log-likelihood.


def _cr_expand(treatments: np.ndarray, x: np.ndarray, num_levels: int):
    stages = np.arange(1, num_levels)
    at_risk = treatments[:, None] >= stages[None, :]
    unit_idx, stage_idx = np.nonzero(at_risk)
    response = (treatments[unit_idx] == stages[stage_idx]).astype(np.int64)
    design = np.zeros((unit_idx.shape[0], (num_levels - 1) + x.shape[1]))
    design[np.arange(unit_idx.shape[0]), stage_idx] = 1.0
    design[:, num_levels - 1:] = x[unit_idx]
    return design, response


def _cr_fit_arrays(
    treatments: np.ndarray,
    covariates: np.ndarray,
    num_levels: int,
    config: FitConfig,
    trace: list | None = None,
):
    x_std, mu, sigma = _standardize(covariates)
    design, response = _cr_expand(np.asarray(treatments), x_std, num_levels)
    init = None
    if config.init is not None:
        thr0, slo0 = config.init
        slo_std = np.asarray(slo0, dtype=np.float64) * sigma
        thr_std = np.asarray(thr0, dtype=np.float64) + slo_std @ (mu / sigma)
        init = np.concatenate([thr_std, slo_std])[None, :]
    coef_std, diag = _newton_multilogit(
        design,
        response,
        2,
        ridge=config.ridge,
        max_iter=config.max_iter,
        grad_tol=config.grad_tol,
        init=init,
        trace=trace,
    )
    row = coef_std[0]
    thr_std, slo_std = row[: num_levels - 1], row[num_levels - 1:]
    slopes = slo_std / sigma
    thresholds = thr_std - slo_std @ (mu / sigma)
    return thresholds, slopes, diag


def _cr_probs(thresholds: np.ndarray, slopes: np.ndarray, x: np.ndarray) -> np.ndarray:
    num_levels = thresholds.shape[0] + 1
    eta = thresholds[None, :] + (x @ slopes)[:, None]
    hazard = expit(eta)
    survive = np.cumprod(expit(-eta), axis=1)
    probs = np.empty((x.shape[0], num_levels))
    probs[:, 0] = hazard[:, 0]
    for s in range(1, num_levels - 1):
        probs[:, s] = hazard[:, s] * survive[:, s - 1]
    probs[:, num_levels - 1] = survive[:, num_levels - 2]
    return probs


def fit_continuation_ratio(
    data: ObservationalDataset, config: FitConfig = FitConfig()
) -> ContinuationRatioModel:
    """Fit r_a(x) by a forward continuation-ratio (ordinal) model.

    Levels 1..J must carry a meaningful order; the caller asserts this.
    """
    n, d, num_levels = data.n, data.num_covariates, data.num_levels
    if n <= num_levels * (d + 1):
        logger.warning(
            "small sample for GPS fit: n=%d with %d parameters",
            n, (num_levels - 1) + d,
        )
    thresholds, slopes, diag = _cr_fit_arrays(
        data.treatments, data.covariates, num_levels, config
    )
    return ContinuationRatioModel(
        thresholds=thresholds,
        slopes=slopes,
        num_levels=num_levels,
        covariate_names=data.covariate_names,
        diagnostics=diag,
        level_labels=data.level_labels,
    )


# ---------------------------------------------------------------------------
# prediction + serialization


def predict_gps(model, data) -> GpsMatrix:
    """Evaluate a fitted model on a dataset (or raw covariate matrix)."""
    x = data.covariates if isinstance(data, ObservationalDataset) else np.atleast_2d(data)
    if x.shape[1] != model.num_covariates:
        raise DimensionMismatch(
            f"DimensionMismatch: model expects {model.num_covariates} covariates, "
            f"data has {x.shape[1]}"
        )
    return GpsMatrix.from_probs(model.predict_proba(x))


@dataclass(frozen=True)
class GpsSpec:
    """Declarative choice of GPS model family plus fit settings; the unit
    of work handed to bootstrap/CLI so they can refit on resamples."""

    model_type: str = "multinomial_logit"
    config: FitConfig = FitConfig()

    def __post_init__(self):
        if self.model_type not in MODEL_TYPES:
            raise InputError(
                f"unknown gps model {self.model_type!r}; expected one of {MODEL_TYPES}"
            )

    def fit(self, data: ObservationalDataset):
        if self.model_type == "multinomial_logit":
            return fit_multinomial_logit(data, self.config)
        return fit_continuation_ratio(data, self.config)


def save_model(model, path) -> None:
    if model.model_type == "multinomial_logit":
        coef = np.asarray(model.coef)
    else:
        coef = np.concatenate([model.thresholds, model.slopes])[None, :]
    payload = {
        "model_type": model.model_type,
        "levels": list(model.level_labels)
        or [str(i) for i in range(1, model.num_levels + 1)],
        "covariate_names": list(model.covariate_names),
        "coef": [float(v) for v in coef.reshape(-1)],
        "fit_diagnostics": {
            "loglik": model.diagnostics.loglik,
            "iterations": model.diagnostics.iterations,
            "grad_norm": model.diagnostics.grad_norm,
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    model_type = payload["model_type"]
    levels = tuple(str(v) for v in payload["levels"])
    names = tuple(payload["covariate_names"])
    num_levels, d = len(levels), len(names)
    flat = np.asarray(payload["coef"], dtype=np.float64)
    diag = FitDiagnostics(**payload["fit_diagnostics"])
    if model_type == "multinomial_logit":
        return MultinomialLogitModel(
            coef=flat.reshape(num_levels - 1, d + 1),
            num_levels=num_levels,
            covariate_names=names,
            diagnostics=diag,
            level_labels=levels,
        )
    if model_type == "continuation_ratio":
        return ContinuationRatioModel(
            thresholds=flat[: num_levels - 1],
            slopes=flat[num_levels - 1:],
            num_levels=num_levels,
            covariate_names=names,
            diagnostics=diag,
            level_labels=levels,
        )
    raise InputError(f"unknown model_type {model_type!r} in {path}")
