"""Exception types shared across the package."""


class RandMatchError(Exception):
    """Base class for every error raised by this package."""


# density
class ZeroMass(RandMatchError, ValueError):
    pass


class NotPositive(RandMatchError, ValueError):
    pass


class NotNormalized(RandMatchError, ValueError):
    pass


class EmptyCell(RandMatchError, ValueError):
    pass


class OutOfDomain(RandMatchError, ValueError):
    pass


class DegenerateKind(RandMatchError, ValueError):
    """A positive-density operation was asked to handle an atomic or disconnected model."""


# transport
class SizeMismatch(RandMatchError, ValueError):
    pass


class TooLarge(RandMatchError, ValueError):
    pass


class MassImbalance(RandMatchError, ValueError):
    pass


class ProblemTooLarge(RandMatchError, ValueError):
    pass


# field
class NotPositiveWeight(RandMatchError, ValueError):
    pass


class SolverDiverged(RandMatchError, RuntimeError):
    pass


class RegressionIllConditioned(RandMatchError, ValueError):
    pass


# experiments / cli
class DegenerateDesign(RandMatchError, ValueError):
    pass


class ConfigInvalid(RandMatchError, ValueError):
    pass
