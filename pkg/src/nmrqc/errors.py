"""Exception hierarchy. Each family maps onto one CLI exit code."""


class NMRQCError(Exception):
    exit_code = 1


class ParseError(NMRQCError, ValueError):
    """Malformed molecule, circuit or sequence file."""

    exit_code = 2

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += str(source)
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class CompileError(NMRQCError):
    exit_code = 3


class NotDirectlyCoupledError(CompileError):
    """The two spins share no usable coupling; route through SWAPs instead."""


class RoutingError(CompileError):
    """No coupling path connects the two spins."""


class ScheduleError(CompileError):
    """No refocusing sign matrix below the size cap."""


class PhysicsError(NMRQCError):
    exit_code = 4


class StructureError(PhysicsError):
    """A state failed a pseudo-pure structure check."""

    def __init__(self, message, deviation):
        self.deviation = deviation
        super().__init__(f"{message} (worst deviation {deviation:.3e})")


class UnsupportedSystemError(PhysicsError):
    pass


class CapExceededError(PhysicsError):
    pass
