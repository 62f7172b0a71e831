"""Exception hierarchy.

Two families: ``InputError`` for malformed or out-of-domain arguments and
``GuardViolation`` for requests that exceed a configured size guard.  The
CLI maps them onto distinct exit codes.
"""


class ChaosError(Exception):
    pass


class InputError(ChaosError, ValueError):
    pass


class GuardViolation(ChaosError):
    pass


# diagram partitions
class ShapeTooLarge(GuardViolation):
    pass


class NotRowCompatible(InputError):
    pass


class IncompatibleShapes(InputError):
    pass


class KNotEven(InputError):
    pass


# discrete measure
class ShapeMismatch(InputError):
    pass


class IndexOutOfRange(InputError):
    pass


class OrderMismatch(InputError):
    pass


# chaos calculus
class DegenerateVariance(InputError):
    pass


class NotNormalized(InputError):
    pass


# charlier
class OutOfRange(InputError):
    pass


# sampling
class TooManyPoints(GuardViolation):
    pass


class TooFewSamples(InputError):
    pass


# applications
class HorizonTooShort(InputError):
    pass


class NonSymmetricNuWithoutCompensator(InputError):
    pass
