"""fred: a reversible debugger for the .fr mini-language.

The package provides a small imperative language with green threads and
mutexes, deterministic record/replay through a global event log,
whole-session checkpoints, a GDB-flavored command layer, and the
reverse expression watchpoint search (`fred-reverse-watch`).
"""

from .errors import (
    FredError,
    FrSyntaxError,
    CompileError,
    ReplayDivergence,
    SearchError,
    NoGoodAnchor,
    NoCulpritFound,
    PreconditionNotBad,
    StabilityViolation,
)
from .bytecode import Program, SourceLoc
from .lang import parse_source
from .compiler import compile_program
from .vm import VM, StepOutcome, HEAP_BASE
from .events import Event, EventLog, EventKind
from .checkpoint import CheckpointStore, CheckpointImage, TimePosition
from .session import DebugSession
from .search import reverse_watch, TransitionReport, SearchStats

__all__ = [
    "FredError",
    "FrSyntaxError",
    "CompileError",
    "ReplayDivergence",
    "SearchError",
    "NoGoodAnchor",
    "NoCulpritFound",
    "PreconditionNotBad",
    "StabilityViolation",
    "Program",
    "SourceLoc",
    "parse_source",
    "compile_program",
    "VM",
    "StepOutcome",
    "HEAP_BASE",
    "Event",
    "EventLog",
    "EventKind",
    "CheckpointStore",
    "CheckpointImage",
    "TimePosition",
    "DebugSession",
    "reverse_watch",
    "TransitionReport",
    "SearchStats",
]
