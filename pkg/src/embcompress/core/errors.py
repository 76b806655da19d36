class InvalidArgument(ValueError):
    pass


class IdOutOfRange(InvalidArgument, IndexError):
    def __init__(self, value: int, position: int, n: int):
        super().__init__(f"id {value} at position {position} outside [0, {n})")
        self.value = value
        self.position = position


class StateError(RuntimeError):
    pass


class CapacityError(RuntimeError):
    pass


class FeasibilityError(ValueError):
    """Requested budget cannot be met; ``nearest_bytes`` is the closest achievable size."""

    def __init__(self, message: str, nearest_bytes: int | None = None):
        super().__init__(message)
        self.nearest_bytes = nearest_bytes


class UndefinedMetric(ValueError):
    pass


class ConfigError(ValueError):
    pass


def check_ids(ids, n: int):
    import numpy as np

    ids = np.asarray(ids)
    if ids.dtype.kind not in "iu":
        if ids.size and not np.all(np.equal(np.mod(ids, 1), 0)):
            raise InvalidArgument("feature ids must be integers")
    ids = ids.astype(np.int64, copy=False)
    if ids.size:
        bad = (ids < 0) | (ids >= n)
        if bad.any():
            pos = int(np.flatnonzero(bad.ravel())[0])
            raise IdOutOfRange(int(ids.ravel()[pos]), pos, n)
    return ids


class ParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line
