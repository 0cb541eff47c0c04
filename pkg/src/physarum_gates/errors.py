"""Exception hierarchy shared by all modules."""


class PhysarumError(Exception):
    """Base class for every error raised by this package."""


class UnknownStimulus(PhysarumError, ValueError):
    pass


class UnknownStimulusSet(PhysarumError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown stimulus set"


class UnsupportedFamily(PhysarumError, ValueError):
    pass


class ModelFormatError(PhysarumError, ValueError):
    pass


class InvalidChange(PhysarumError, ValueError):
    pass


class InvalidProtocol(PhysarumError, ValueError):
    pass


class InvalidParams(PhysarumError, ValueError):
    pass


class InvalidWindow(PhysarumError, ValueError):
    pass


class BandEmpty(PhysarumError, ValueError):
    pass


class DegenerateSignal(PhysarumError, ValueError):
    pass


class MissingStimulationTime(PhysarumError, ValueError):
    pass


class ArityMismatch(PhysarumError, ValueError):
    pass


class EmptyOutcomes(PhysarumError, ValueError):
    pass


class NetlistError(PhysarumError, ValueError):
    pass


class CyclicNetlist(NetlistError):
    pass


class UnassignedInput(NetlistError):
    pass


class TraceError(PhysarumError, ValueError):
    pass


class ParseError(TraceError):
    def __init__(self, message: str, row: int | None = None, column: int | None = None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.row = row
        self.column = column


class NonUniformSampling(ParseError):
    pass


class OutOfRange(ParseError):
    pass
