"""Bytecode representation: opcodes, compiled functions, and the Program.

Every instruction carries a (line, stmt_id) pair in a side table so the
debugger can map any instruction index back to its source statement.
Statement ids are dense, 0..S-1, assigned in compilation order.
"""

from dataclasses import dataclass

# Opcodes.  Small ints; the VM dispatches on these in a long if/elif chain,
# ordered roughly by execution frequency.
STMT = 0       # statement boundary; arg = stmt_id
CONST = 1      # push constant; arg = value
LOADL = 2      # push local slot; arg = slot
STOREL = 3     # pop into local slot; arg = slot
LOADG = 4      # push global; arg = name
STOREG = 5     # pop into global; arg = name
ADD = 6
SUB = 7
MUL = 8
DIV = 9
MOD = 10
EQ = 11
NE = 12
LT = 13
LE = 14
GT = 15
GE = 16
NOT = 17
NEG = 18
JMP = 19       # arg = target index
JF = 20        # pop; jump if false; arg = target index
CALL = 21      # arg = (func_index, nargs)
RET = 22       # return; pushes value to caller stack
POP = 23
SPAWN = 24     # arg = (func_index, nargs); pushes child tid; logs ThreadCreate
JOINT = 25     # pop tid; block until it exits; logs Join
LOCK = 26      # pop lock id; acquire or block; logs LockAcquire
UNLOCK = 27    # pop lock id; release; logs LockRelease
NEWMUTEX = 28  # push fresh lock id
ALLOCH = 29    # pop size; push address; logs Alloc
FREEH = 30     # pop address; logs Free
DEREF = 31     # pop address; push word at address
STOREMEM = 32  # pop value, pop address; store word
FLDLOAD = 33   # pop ref; push field; arg = field name
FLDSTORE = 34  # pop value, pop ref; arg = field name
FLDADDR = 35   # pop ref; push address of field slot; arg = field name
NEWSTRUCT = 36 # arg = struct type name; push address
LISTNEW = 37   # push address of a fresh empty list cell
LISTGET = 38   # pop index, pop list addr; push element
LISTSET = 39   # pop value, pop index, pop list addr
APPENDV = 40   # pop value, pop list addr
LENV = 41      # pop list/string; push length
INPUTV = 42    # push next input chunk (string); logs InputRead
CLOCKV = 43    # push clock value; logs ClockRead
RANDV = 44     # push random 64-bit int; logs RandRead
PRINTN = 45    # arg = nargs; pop args, append formatted line to output

OP_NAMES = {
    v: k
    for k, v in list(globals().items())
    if isinstance(v, int) and k.isupper() and not k.startswith("_")
}

# Opcodes whose execution appends (record) or consumes (replay) a log event.
LOGGED_OPS = frozenset([SPAWN, JOINT, LOCK, UNLOCK, ALLOCH, FREEH, INPUTV, CLOCKV, RANDV])


@dataclass(frozen=True)
class SourceLoc:
    file: str
    line: int
    stmt_id: int

    def __str__(self):
        return "%s:%d (stmt %d)" % (self.file, self.line, self.stmt_id)


class Function:
    """A compiled function: linear bytecode plus local-variable metadata."""

    __slots__ = ("name", "index", "nparams", "nlocals", "local_names",
                 "ops", "args", "lines", "stmt_ids")

    def __init__(self, name, index, nparams):
        self.name = name
        self.index = index
        self.nparams = nparams
        self.nlocals = nparams
        self.local_names = []
        self.ops = []       # list[int]
        self.args = []      # parallel list of operands (or None)
        self.lines = []     # parallel list of source lines
        self.stmt_ids = []  # parallel list of statement ids

    def emit(self, op, arg, line, stmt_id):
        self.ops.append(op)
        self.args.append(arg)
        self.lines.append(line)
        self.stmt_ids.append(stmt_id)
        return len(self.ops) - 1

    def patch(self, idx, arg):
        self.args[idx] = arg


class Program:
    """A compiled .fr program: function table, struct layouts, source map."""

    def __init__(self, source, filename):
        self.source = source
        self.filename = filename
        self.functions = []          # list[Function]
        self.func_index = {}         # name -> index
        self.structs = {}            # type name -> list of field names
        self.globals = {}            # name -> initial constant value
        self.global_order = []       # declaration order, for stable layout
        self.stmt_locs = []          # stmt_id -> SourceLoc

    @property
    def entry(self):
        return self.func_index["main"]

    def new_stmt(self, line):
        sid = len(self.stmt_locs)
        self.stmt_locs.append(SourceLoc(self.filename, line, sid))
        return sid

    def loc_for(self, func, ip):
        """SourceLoc for instruction `ip` of `func` (a Function)."""
        return self.stmt_locs[func.stmt_ids[ip]]

    def stmt_at_line(self, line):
        """First statement id on the given source line, or None."""
        for loc in self.stmt_locs:
            if loc.line == line:
                return loc.stmt_id
        return None

    def fingerprint(self):
        import hashlib

        return hashlib.sha256(self.source.encode()).hexdigest()

    def disassemble(self):
        """Textual disassembly, one instruction per line:
        `idx  opcode  operands  ; file:line`."""
        out = []
        for fn in self.functions:
            out.append("fn %s (params=%d locals=%d)" % (fn.name, fn.nparams, fn.nlocals))
            for i, op in enumerate(fn.ops):
                arg = fn.args[i]
                argtxt = "" if arg is None else repr(arg)
                out.append("%4d  %-9s %-18s ; %s:%d" % (
                    i, OP_NAMES.get(op, str(op)), argtxt, self.filename, fn.lines[i]))
        return "\n".join(out) + "\n"
