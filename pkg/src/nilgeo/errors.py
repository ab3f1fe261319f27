"""Exception types raised across the package."""


class NilgeoError(Exception):
    """Base class for all package errors."""


# algebra
class ZeroQuaternion(NilgeoError):
    pass


class IndexOutOfRange(NilgeoError):
    pass


class ContextMismatch(NilgeoError):
    pass


class BasisClosureFailure(NilgeoError):
    pass


class InvolutionInvalid(NilgeoError):
    pass


class DegenerateSplit(NilgeoError):
    pass


class NotReal(NilgeoError):
    pass


class NotHermitian(NilgeoError):
    pass


class FixtureInvalid(NilgeoError):
    pass


# nahm
class NotInCkappa(NilgeoError):
    pass


class GridUnderflow(NilgeoError):
    pass


class TailDivergence(NilgeoError):
    pass


class NoConvergence(NilgeoError):
    pass


class TargetNotNilpotent(NilgeoError):
    pass


class TargetNotReal(NilgeoError):
    pass


# orbitgeom
class RankDeficiency(NilgeoError):
    pass


class StepUnderflow(NilgeoError):
    pass


class JUnavailable(NilgeoError):
    pass


class SigmaSingular(NilgeoError):
    pass


class OriginExcluded(NilgeoError):
    pass


# vergne
class WrongChamber(NilgeoError):
    pass


class MomentMismatch(NilgeoError):
    pass


class JNotSquareMinusOne(NilgeoError):
    pass


# cli
class UnknownFixture(NilgeoError):
    pass


class UnknownSuite(NilgeoError):
    pass


class ConfigInvalid(NilgeoError):
    pass


class SuiteMismatch(NilgeoError):
    pass
