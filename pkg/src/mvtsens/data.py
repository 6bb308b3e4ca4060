"""Dataset representation, CSV ingestion, and validation.

A dataset is n units of (treatment label in 1..J, covariate vector,
real outcome). Treatment labels in files may be arbitrary strings; an
explicit level ordering fixes the 1..J mapping. Datasets are immutable
after construction and safe to share across threads.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyTreatmentLevel,
    InputError,
    InvalidLevelPair,
    MissingColumn,
    NonFiniteValue,
    ParseError,
)


@dataclass(frozen=True)
class Unit:
    """One observation: treatment label, covariate vector, outcome."""

    treatment: int
    covariates: np.ndarray
    outcome: float


@dataclass(frozen=True, eq=False)
class ObservationalDataset:
    """Immutable column-store of n units with J treatment levels.

    ``treatments`` holds integer labels in 1..J, ``covariates`` is the
    n x d matrix (no intercept column; models add their own), and
    ``level_labels`` preserves the original file labels in declared
    order, for round-tripping.
    """

    treatments: np.ndarray
    covariates: np.ndarray
    outcomes: np.ndarray
    num_levels: int
    covariate_names: tuple[str, ...]
    level_labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        t = np.asarray(self.treatments, dtype=np.int64)
        x = np.asarray(self.covariates, dtype=np.float64)
        y = np.asarray(self.outcomes, dtype=np.float64)
        if x.ndim != 2:
            raise InputError("covariates must be a 2-d array")
        n = t.shape[0]
        if x.shape[0] != n or y.shape[0] != n:
            raise InputError("treatments, covariates, outcomes must share length")
        if n == 0:
            raise InputError("dataset has no rows")
        if self.num_levels < 2:
            raise InputError("num_levels must be at least 2")
        if len(self.covariate_names) != x.shape[1]:
            raise InputError("covariate_names length must equal covariate dimension")
        if t.min() < 1 or t.max() > self.num_levels:
            bad = int(np.argmax((t < 1) | (t > self.num_levels)))
            raise InputError(
                f"treatment label {t[bad]} at row {bad + 1} outside 1..{self.num_levels}"
            )
        if not np.all(np.isfinite(x)):
            i, j = np.argwhere(~np.isfinite(x))[0]
            raise NonFiniteValue(int(i) + 1, self.covariate_names[j])
        if not np.all(np.isfinite(y)):
            i = int(np.argmax(~np.isfinite(y)))
            raise NonFiniteValue(i + 1, "outcome")
        counts = np.bincount(t, minlength=self.num_levels + 1)[1:]
        if counts.min() == 0:
            raise EmptyTreatmentLevel(int(np.argmin(counts)) + 1)
        if self.level_labels and len(self.level_labels) != self.num_levels:
            raise InputError("level_labels length must equal num_levels")
        for name, arr in (("treatments", t), ("covariates", x), ("outcomes", y)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))
        object.__setattr__(self, "level_labels", tuple(self.level_labels))

    @property
    def n(self) -> int:
        return self.treatments.shape[0]

    @property
    def num_covariates(self) -> int:
        return self.covariates.shape[1]

    @property
    def units(self) -> list[Unit]:
        """Row-wise view; built on demand, intended for small datasets."""
        return [
            Unit(int(a), x, float(y))
            for a, x, y in zip(self.treatments, self.covariates, self.outcomes)
        ]

    def arm_sizes(self) -> np.ndarray:
        return np.bincount(self.treatments, minlength=self.num_levels + 1)[1:]

    def arm_mask(self, level: int) -> np.ndarray:
        return self.treatments == level

    def label_for(self, level: int) -> str:
        if self.level_labels:
            return self.level_labels[level - 1]
        return str(level)


@dataclass(frozen=True, eq=False)
class ContrastVector:
    """Coefficients c defining the additive estimand sum_a c_a * m(a)."""

    c: np.ndarray
    label: str = ""

    def __post_init__(self):
        c = np.asarray(self.c, dtype=np.float64)
        if c.ndim != 1:
            raise InputError("contrast must be a 1-d vector")
        if not np.any(c != 0.0):
            raise InputError("contrast must have at least one nonzero entry")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "c", c)
        if not self.label:
            object.__setattr__(
                self, "label", "c[" + ",".join(_fmt_coef(v) for v in c) + "]"
            )

    def __len__(self) -> int:
        return self.c.shape[0]


def _fmt_coef(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def pairwise_contrast(k: int, l: int, num_levels: int) -> ContrastVector:
    """Contrast with +1 at level k and -1 at level l (the ATE of k vs l)."""
    if not (1 <= k < l <= num_levels):
        raise InvalidLevelPair(k, l, num_levels)
    c = np.zeros(num_levels)
    c[k - 1] = 1.0
    c[l - 1] = -1.0
    return ContrastVector(c, label=f"ate_{k}_{l}")


def all_pairwise_contrasts(num_levels: int) -> list[ContrastVector]:
    return [
        pairwise_contrast(k, l, num_levels)
        for k in range(1, num_levels)
        for l in range(k + 1, num_levels + 1)
    ]


def _parse_float(value: str, row: int, col: str) -> float:
    try:
        out = float(value)
    except ValueError:
        raise ParseError(row, col, value) from None
    if not math.isfinite(out):
        raise NonFiniteValue(row, col)
    return out


def load_csv(
    path,
    treatment_col: str,
    outcome_col: str,
    covariate_cols: list[str],
    levels: list[str] | None = None,
) -> ObservationalDataset:
    """Read and validate an observational dataset from a CSV file.

    ``levels`` declares the treatment labels in order; label i maps to
    level i+1. When omitted, the treatment column must contain integers
    1..J with every level observed. Row numbers in errors are 1-based
    data rows (the header is row 0).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        col_index: dict[str, int] = {}
        for i, h in enumerate(header):
            col_index.setdefault(h, i)
        for name in [treatment_col, outcome_col, *covariate_cols]:
            if name not in col_index:
                raise MissingColumn(name)
        t_idx = col_index[treatment_col]
        y_idx = col_index[outcome_col]
        x_idx = [col_index[c] for c in covariate_cols]

        raw_treat: list[str] = []
        outcomes: list[float] = []
        covs: list[list[float]] = []
        for row_no, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise ParseError(row_no, treatment_col, f"{len(row)} fields, expected {len(header)}")
            raw_treat.append(row[t_idx].strip())
            outcomes.append(_parse_float(row[y_idx].strip(), row_no, outcome_col))
            covs.append(
                [
                    _parse_float(row[j].strip(), row_no, covariate_cols[i])
                    for i, j in enumerate(x_idx)
                ]
            )

    if not raw_treat:
        raise InputError(f"{path}: no data rows")

    if levels is not None:
        labels = [str(v) for v in levels]
        if len(labels) != len(set(labels)):
            raise InputError("duplicate labels in declared treatment levels")
        lookup = {lab: i + 1 for i, lab in enumerate(labels)}
        treatments = np.empty(len(raw_treat), dtype=np.int64)
        for i, vraw in enumerate(raw_treat):
            if vraw not in lookup:
                raise ParseError(i + 1, treatment_col, vraw)
            treatments[i] = lookup[vraw]
        num_levels = len(labels)
    else:
        treatments = np.empty(len(raw_treat), dtype=np.int64)
        for i, vraw in enumerate(raw_treat):
            try:
                treatments[i] = int(vraw)
            except ValueError:
                raise ParseError(i + 1, treatment_col, vraw) from None
        if treatments.min() < 1:
            raise InputError(
                f"treatment labels must be positive integers when no level ordering "
                f"is declared; found {treatments.min()} (declare labels explicitly)"
            )
        num_levels = int(treatments.max())
        labels = [str(i) for i in range(1, num_levels + 1)]

    counts = np.bincount(treatments, minlength=num_levels + 1)[1:]
    if num_levels < 2:
        raise InputError("fewer than 2 treatment levels observed")
    if counts.min() == 0:
        raise EmptyTreatmentLevel(int(np.argmin(counts)) + 1)

    return ObservationalDataset(
        treatments=treatments,
        covariates=np.asarray(covs, dtype=np.float64),
        outcomes=np.asarray(outcomes, dtype=np.float64),
        num_levels=num_levels,
        covariate_names=tuple(covariate_cols),
        level_labels=tuple(labels),
    )


def write_csv(
    dataset: ObservationalDataset,
    path,
    treatment_col: str = "treatment",
    outcome_col: str = "outcome",
) -> None:
    """Write a dataset back to CSV with 17-significant-digit decimals.

    ``load_csv(write_csv(ds))`` reproduces ds bit-exactly, including the
    original treatment labels.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([treatment_col, *dataset.covariate_names, outcome_col])
        for a, x, y in zip(dataset.treatments, dataset.covariates, dataset.outcomes):
            writer.writerow(
                [dataset.label_for(int(a)), *(f"{v:.17g}" for v in x), f"{y:.17g}"]
            )
