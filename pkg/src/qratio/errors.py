"""Exception hierarchy shared by every module in the package."""


class QuantileRatioError(ValueError):
    """Base class for all errors raised by :mod:`qratio`."""


class InputError(QuantileRatioError):
    """Malformed input data (CLI exit code 2)."""


class InferenceError(QuantileRatioError):
    """Valid input on which inference cannot proceed (CLI exit code 3)."""


class EmptyInput(InputError):
    pass


class NonFiniteValue(InputError):
    def __init__(self, index, value):
        self.index = index
        self.value = value
        super().__init__(f"non-finite value {value!r} at index {index}")


class InvalidProbability(InputError):
    pass


class EqualProbabilities(InferenceError):
    """Interval construction requested for p == q (the ratio is identically 1)."""


class NonPositiveQRatio(InferenceError):
    pass


class DegenerateDensity(InferenceError):
    def __init__(self, p, value):
        self.p = p
        self.value = value
        super().__init__(f"quantile density estimate at p={p} is {value!r} (must be > 0)")


class NonPositiveDenominator(InferenceError):
    def __init__(self, q, value):
        self.q = q
        self.value = value
        super().__init__(f"denominator quantile at q={q} is {value!r} (must be > 0)")


class NonPositiveRatio(InferenceError):
    pass


class DiscriminantViolation(InferenceError):
    def __init__(self, a0, a1, a2):
        self.coefficients = (a0, a1, a2)
        super().__init__(
            f"plug-in variance quadratic has non-negative discriminant: "
            f"a1^2 - 4 a0 a2 = {a1 * a1 - 4 * a0 * a2!r}"
        )


class DegenerateSample(InferenceError):
    pass


class TableError(InputError):
    def __init__(self, row, message):
        self.row = row
        super().__init__(f"row {row}: {message}")


class OverlappingBins(TableError):
    pass


class NegativeCount(TableError):
    pass


class UnorderedBins(TableError):
    pass


class ConfigError(InputError):
    pass
