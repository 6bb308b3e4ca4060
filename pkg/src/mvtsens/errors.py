"""Exception hierarchy shared across the package.

Two bases matter for the CLI: ``InputError`` maps to exit code 2
(validation), ``NumericalError`` to exit code 3 (a numerical procedure
failed). Everything else is a programming error and propagates raw.
"""


class InputError(ValueError):
    """Invalid user input: files, columns, labels, parameter combinations."""


class NumericalError(RuntimeError):
    """A numerical procedure failed to produce a usable result."""


# Subclasses with structured attributes define __reduce__ so they survive
# pickling across process boundaries (worker pools re-raise them).


class MissingColumn(InputError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"MissingColumn: column {column!r} not found in header")

    def __reduce__(self):
        return (MissingColumn, (self.column,))


class ParseError(InputError):
    def __init__(self, row: int, col: str, value: str = ""):
        self.row = row
        self.col = col
        self.value = value
        super().__init__(
            f"ParseError: row {row}, column {col!r}: cannot parse {value!r}"
        )

    def __reduce__(self):
        return (ParseError, (self.row, self.col, self.value))


class NonFiniteValue(InputError):
    def __init__(self, row: int, col: str):
        self.row = row
        self.col = col
        super().__init__(f"NonFiniteValue: row {row}, column {col!r} is NaN or infinite")

    def __reduce__(self):
        return (NonFiniteValue, (self.row, self.col))


class EmptyTreatmentLevel(InputError):
    def __init__(self, level: int):
        self.level = level
        super().__init__(f"EmptyTreatmentLevel: no unit observed at treatment level {level}")

    def __reduce__(self):
        return (EmptyTreatmentLevel, (self.level,))


class InvalidLevelPair(InputError):
    def __init__(self, k: int, l: int, num_levels: int):
        self.k = k
        self.l = l
        self.num_levels = num_levels
        super().__init__(
            f"InvalidLevelPair: ({k}, {l}) is not an ordered pair within 1..{num_levels}"
        )

    def __reduce__(self):
        return (InvalidLevelPair, (self.k, self.l, self.num_levels))


class DimensionMismatch(InputError):
    pass


class LengthMismatch(InputError):
    pass


class EmptyArm(InputError):
    def __init__(self, arm: int | None = None):
        self.arm = arm
        msg = "EmptyArm" if arm is None else f"EmptyArm: treatment level {arm} has no units"
        super().__init__(msg)

    def __reduce__(self):
        return (EmptyArm, (self.arm,))


class EmptyInput(InputError):
    pass


class DidNotConverge(NumericalError):
    def __init__(self, iterations: int, grad_norm: float):
        self.iterations = iterations
        self.grad_norm = grad_norm
        super().__init__(
            f"DidNotConverge: {iterations} iterations, gradient max-norm {grad_norm:.3e}"
        )

    def __reduce__(self):
        return (DidNotConverge, (self.iterations, self.grad_norm))


class SeparationDetected(NumericalError):
    def __init__(self, min_prob: float):
        self.min_prob = min_prob
        super().__init__(
            "SeparationDetected: fitted probabilities collapsed below 1e-10 "
            f"(min {min_prob:.3e}); the data are (quasi-)separable. "
            "Refit with ridge > 0."
        )

    def __reduce__(self):
        return (SeparationDetected, (self.min_prob,))


class LpInfeasible(NumericalError):
    def __init__(self, detail: str = ""):
        self.detail = detail
        super().__init__(
            "LpInfeasible: the transformed linear program reported no solution; "
            "this indicates an implementation bug, the feasible set is never empty. "
            + detail
        )

    def __reduce__(self):
        return (LpInfeasible, (self.detail,))


class ResampleDegenerate(NumericalError):
    def __init__(self, replicate: int, attempts: int):
        self.replicate = replicate
        self.attempts = attempts
        super().__init__(
            f"ResampleDegenerate: bootstrap replicate {replicate} failed to produce a "
            f"resample containing every treatment level after {attempts} consecutive "
            "redraws; a treatment arm is too small for resampling."
        )

    def __reduce__(self):
        return (ResampleDegenerate, (self.replicate, self.attempts))
