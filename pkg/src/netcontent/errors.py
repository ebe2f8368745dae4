"""Exception hierarchy.

Each error class carries the process exit status the command line uses for
that failure class: I/O problems exit 2, invalid input exits 3 and
numerical failures exit 4.
"""


class NetContentError(Exception):
    exit_code = 1


class DataIOError(NetContentError):
    exit_code = 2


class ValidationError(NetContentError, ValueError):
    exit_code = 3


class DuplicateTweetError(ValidationError):
    def __init__(self, tweet_id, line=None):
        self.tweet_id = tweet_id
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"duplicate tweet id {tweet_id!r}{where}")


class NumericalError(NetContentError, ArithmeticError):
    exit_code = 4


class ConvergenceError(NumericalError):
    def __init__(self, message, residual):
        self.residual = residual
        super().__init__(f"{message} (final residual {residual:.3e})")


class NotErgodicError(NumericalError):
    pass


class SingularSystemError(NumericalError):
    pass
