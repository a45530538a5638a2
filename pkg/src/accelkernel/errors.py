"""Exception hierarchy shared by all modules."""


class AccelKernelError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(AccelKernelError, ValueError):
    pass


class SingularMidBlock(AccelKernelError, ArithmeticError):
    """The block being integrated out of a Gaussian composition is (near) singular."""


class NotNormalizable(AccelKernelError, ValueError):
    pass


class CriticalFrequency(AccelKernelError, ValueError):
    """omega1 == omega2: the Q similarity transform does not exist."""


class ComplexBranch(AccelKernelError, ValueError):
    """Operation needs real frequencies but the couplings sit on the complex branch."""


class ZeroTau(AccelKernelError, ValueError):
    pass


class DegenerateBvp(AccelKernelError, ArithmeticError):
    pass


class GridTooSmall(AccelKernelError, ValueError):
    pass


class QuadratureFailure(AccelKernelError, ArithmeticError):
    pass


class BadDiscretization(AccelKernelError, ValueError):
    pass


class NonConvergent(AccelKernelError, ArithmeticError):
    pass


class NotOrthogonal(AccelKernelError, ValueError):
    pass


class CriticalMode(AccelKernelError, ValueError):
    pass
