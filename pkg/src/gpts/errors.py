"""Exception hierarchy shared by all gpts modules."""


class GPTSError(Exception):
    """Base class for every error raised by gpts."""

    exit_code = 1


class ParameterError(GPTSError, ValueError):
    """An argument is outside its documented domain."""

    exit_code = 2


class InputError(GPTSError, ValueError):
    """Observed data is unusable (non-finite rewards, non-PSD matrices)."""

    exit_code = 2


class RegimeError(ParameterError):
    """Gaussian-kernel width outside the s > 1/sqrt(log B) regime."""

    exit_code = 3


class UnsupportedKernelError(GPTSError):
    exit_code = 2


class SizeError(GPTSError):
    """Dense oracle requested for a tree larger than the configured cap."""

    exit_code = 4


class DegenerateUpdateError(GPTSError):
    """Covariance factorization broke down (noise-free duplicate arm)."""

    exit_code = 1


class ExhaustedTreeError(GPTSError):
    """No selectable leaf or dummy node is left."""

    exit_code = 1


class MDPError(GPTSError):
    """Invalid MDP description or invalid action sequence."""

    exit_code = 5
