"""Exception types raised across the package."""


class QIFError(ValueError):
    """Base class for every error raised by qifcausal."""


class InvalidSamples(QIFError):
    pass


class ConstantColumn(InvalidSamples):
    """A numeric column has zero variance, so no kernel bandwidth exists."""


class InvalidDistribution(QIFError):
    pass


class InvalidJoint(QIFError):
    pass


class InvalidChannel(QIFError):
    pass


class DimensionMismatch(QIFError):
    pass


class DegenerateLeakage(QIFError):
    """A multiplicative leakage has a zero denominator."""


class InvalidLabels(QIFError):
    pass


class InvalidFeatures(QIFError):
    pass


class InvalidConfig(QIFError):
    pass


class DatasetError(QIFError):
    pass
