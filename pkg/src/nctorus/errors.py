"""Exception hierarchy shared by every module of the package."""


class NCTorusError(Exception):
    """Base class for all errors raised by :mod:`nctorus`."""


# numbertheory
class RationalInput(NCTorusError):
    pass


class PrecisionExhausted(NCTorusError):
    pass


class InsufficientQuotients(NCTorusError):
    pass


class AssignmentFailure(NCTorusError):
    pass


# smoothtorus
class ThetaMismatch(NCTorusError):
    pass


class NotUnitModulus(NCTorusError):
    pass


class WindowTooSmall(NCTorusError):
    pass


# bumps
class CaseMismatch(NCTorusError):
    pass


class QuadratureStall(NCTorusError):
    pass


# projections
class CertificationFailed(NCTorusError):
    pass


class DegenerateCorner(NCTorusError):
    pass


# atalgebra
class LevelMismatch(NCTorusError):
    pass


class RankDeficientSamples(NCTorusError):
    pass


# cyclic
class DegreeUnderflow(NCTorusError):
    pass


class ShapeMismatch(NCTorusError):
    pass


class MissingSeminorm(NCTorusError):
    pass


class BudgetExceeded(NCTorusError):
    pass


class NotIdempotent(NCTorusError):
    pass
