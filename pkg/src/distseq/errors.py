class InvalidArgument(ValueError):
    pass


class TruncationTooShort(InvalidArgument):
    """The requested signal has no nonzero coefficient below the truncation level."""


class BarycenterError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual
