"""Exception hierarchy shared across the debugger."""


class FredError(Exception):
    """Base class for everything this package raises on purpose."""


class FrSyntaxError(FredError):
    """Syntax error in a .fr source file."""

    def __init__(self, message, line, col):
        super().__init__("syntax error at %d:%d: %s" % (line, col, message))
        self.line = line
        self.col = col


class CompileError(FredError):
    """Semantic error found while lowering to bytecode."""

    def __init__(self, message, line=0):
        super().__init__("compile error at line %d: %s" % (line, message))
        self.line = line


class EvalError(FredError):
    """Watched-expression evaluation failed (unmapped address, bad name, ...)."""

    def __init__(self, reason, detail=""):
        super().__init__("%s%s" % (reason, ": " + detail if detail else ""))
        self.reason = reason
        self.detail = detail


class LogError(FredError):
    """Event-log contract violation or corrupt log file."""


class BadMagic(LogError):
    pass


class VersionMismatch(LogError):
    pass


class TruncatedEntry(LogError):
    def __init__(self, last_intact_seqno):
        super().__init__("log truncated after seqno %d" % last_intact_seqno)
        self.last_intact_seqno = last_intact_seqno


class FillOfForeignSlot(LogError):
    pass


class DoubleFill(LogError):
    pass


class ReplayDivergence(FredError):
    """The next action does not match the event at the replay cursor."""

    def __init__(self, expected, attempted):
        super().__init__("replay divergence: expected %s, attempted %s" % (expected, attempted))
        self.expected = expected
        self.attempted = attempted


class CheckpointError(FredError):
    pass


class MissingImage(CheckpointError):
    pass


class CorruptImage(CheckpointError):
    pass


class StoreFull(CheckpointError):
    pass


class CommandError(FredError):
    """Bad or rejected debugger command."""


class NoSuchBreakpointLocation(CommandError):
    pass


class CommandInterruptedUnsupported(CommandError):
    """Interrupting a running command mid-flight is rejected, not undefined."""


class AtSessionStart(CommandError):
    pass


class TargetBeyondHistory(CommandError):
    pass


class SearchError(FredError):
    """Base for reverse-watch stage failures; carries the stage name."""

    def __init__(self, message, stage=""):
        super().__init__("[%s] %s" % (stage, message) if stage else message)
        self.stage = stage


class PreconditionNotBad(SearchError):
    pass


class NoGoodAnchor(SearchError):
    pass


class StabilityViolation(SearchError):
    pass


class EmptyEventRange(SearchError):
    pass


class DeadlockBudgetExhausted(SearchError):
    pass


class NoCulpritFound(SearchError):
    pass


class ServerError(FredError):
    pass


class EndpointInUse(ServerError):
    pass


class ProtocolError(ServerError):
    pass


class Busy(ServerError):
    pass
