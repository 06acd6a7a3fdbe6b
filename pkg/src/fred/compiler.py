"""AST -> bytecode lowering.

Two constraints worth knowing about:

* Operations that go through the event log (alloc, spawn, input, clock,
  rand; lock/unlock/join/free are already statement forms) may only appear
  as the entire right-hand side of an assignment or as a bare expression
  statement, and the rest of that statement must be side-effect free.
  This keeps the pre-event portion of a statement abortable, which is what
  lets the replay scheduler deschedule a thread whose event is not yet at
  the head of the log.

* Statement ids are dense and assigned in emission order, so they form the
  substrate that the reverse-watch search counts over.
"""

from . import bytecode as bc
from .bytecode import Function, Program
from .errors import CompileError
from .lang import parse_source

BIN_OPS = {
    "+": bc.ADD, "-": bc.SUB, "*": bc.MUL, "/": bc.DIV, "%": bc.MOD,
    "==": bc.EQ, "!=": bc.NE, "<": bc.LT, "<=": bc.LE, ">": bc.GT, ">=": bc.GE,
}

# new/mutex/list do not all hit the log, but they mutate allocator or lock
# counters, so they get the same top-of-RHS placement restriction: aborting
# a half-executed statement must leave no state changes behind.
LOGGED_EXPRS = ("alloc", "input", "clock", "rand", "spawn", "new", "mutex", "list")


def _has_effects(node):
    """True if evaluating `node` may call a function or touch the log."""
    kind = node[0]
    if kind in ("call",) + LOGGED_EXPRS:
        return True
    for sub in node[2:]:
        if isinstance(sub, tuple) and sub and isinstance(sub[0], str):
            if _has_effects(sub):
                return True
        elif isinstance(sub, list):
            if any(_has_effects(s) for s in sub if isinstance(s, tuple)):
                return True
    return False


class FnCompiler:
    def __init__(self, program, fn, fn_asts):
        self.program = program
        self.fn = fn
        self.fn_asts = fn_asts
        self.locals = {}
        for i, p in enumerate(fn.local_names):
            self.locals[p] = i

    def slot(self, name, create):
        if name in self.locals:
            return self.locals[name]
        if not create:
            return None
        idx = len(self.fn.local_names)
        self.fn.local_names.append(name)
        self.fn.nlocals += 1
        self.locals[name] = idx
        return idx

    def emit(self, op, arg, line):
        return self.fn.emit(op, arg, line, self.cur_stmt)

    # -- statements ----------------------------------------------------
    def compile_body(self, body, fn_line):
        for st in body:
            self.compile_stmt(st)
        # Implicit return so every function ends at a statement boundary.
        sid = self.program.new_stmt(fn_line)
        self.cur_stmt = sid
        self.fn.emit(bc.STMT, sid, fn_line, sid)
        self.fn.emit(bc.CONST, None, fn_line, sid)
        self.fn.emit(bc.RET, None, fn_line, sid)

    def begin_stmt(self, line):
        sid = self.program.new_stmt(line)
        self.cur_stmt = sid
        self.fn.emit(bc.STMT, sid, line, sid)
        return sid

    def compile_stmt(self, st):
        kind = st[0]
        line = st[1]
        if kind == "let":
            _, _, name, e = st
            self.begin_stmt(line)
            self.compile_rhs(e, line)
            self.emit(bc.STOREL, self.slot(name, create=True), line)
        elif kind == "assign":
            _, _, lv, e = st
            self.begin_stmt(line)
            self.compile_assign(lv, e, line)
        elif kind == "exprstmt":
            _, _, e = st
            self.begin_stmt(line)
            self.compile_rhs(e, line)
            self.emit(bc.POP, None, line)
        elif kind == "if":
            _, _, cond, then, els = st
            self.begin_stmt(line)
            self.compile_expr(cond)
            jf = self.emit(bc.JF, None, line)
            for s in then:
                self.compile_stmt(s)
            if els is not None:
                jend = self.emit(bc.JMP, None, line)
                self.fn.patch(jf, len(self.fn.ops))
                for s in els:
                    self.compile_stmt(s)
                self.fn.patch(jend, len(self.fn.ops))
            else:
                self.fn.patch(jf, len(self.fn.ops))
        elif kind == "while":
            _, _, cond, body = st
            top = len(self.fn.ops)
            self.begin_stmt(line)
            self.compile_expr(cond)
            jf = self.emit(bc.JF, None, line)
            for s in body:
                self.compile_stmt(s)
            self.emit(bc.JMP, top, line)
            self.fn.patch(jf, len(self.fn.ops))
        elif kind == "return":
            _, _, e = st
            self.begin_stmt(line)
            if e is None:
                self.emit(bc.CONST, None, line)
            else:
                self.compile_expr(e)
            self.emit(bc.RET, None, line)
        elif kind == "print":
            _, _, args = st
            self.begin_stmt(line)
            for a in args:
                self.compile_expr(a)
            self.emit(bc.PRINTN, len(args), line)
        elif kind in ("lock", "unlock", "join", "free"):
            _, _, e = st
            self.begin_stmt(line)
            if _has_effects(e):
                raise CompileError("%s() operand must be side-effect free" % kind, line)
            self.compile_expr(e)
            op = {"lock": bc.LOCK, "unlock": bc.UNLOCK,
                  "join": bc.JOINT, "free": bc.FREEH}[kind]
            self.emit(op, None, line)
        elif kind == "append":
            _, _, lst, val = st
            self.begin_stmt(line)
            self.compile_expr(lst)
            self.compile_expr(val)
            self.emit(bc.APPENDV, None, line)
        else:
            raise CompileError("unknown statement kind %r" % kind, line)

    def compile_assign(self, lv, rhs, line):
        kind = lv[0]
        if kind == "name":
            name = lv[2]
            self.compile_rhs(rhs, line)
            slot = self.slot(name, create=False)
            if slot is not None:
                self.emit(bc.STOREL, slot, line)
            elif name in self.program.globals:
                self.emit(bc.STOREG, name, line)
            else:
                raise CompileError("assignment to undeclared name %r" % name, line)
            return
        # Address computation first (must be pure), then the RHS.
        if kind == "field":
            _, _, base, fname = lv
            self._require_pure(base, line)
            self.compile_expr(base)
            self.compile_rhs(rhs, line)
            self.emit(bc.FLDSTORE, fname, line)
        elif kind == "index":
            _, _, base, idx = lv
            self._require_pure(base, line)
            self._require_pure(idx, line)
            self.compile_expr(base)
            self.compile_expr(idx)
            self.compile_rhs(rhs, line)
            self.emit(bc.LISTSET, None, line)
        elif kind == "deref":
            _, _, addr = lv
            self._require_pure(addr, line)
            self.compile_expr(addr)
            self.compile_rhs(rhs, line)
            self.emit(bc.STOREMEM, None, line)
        else:
            raise CompileError("invalid assignment target", line)

    def _require_pure(self, e, line):
        if _has_effects(e):
            raise CompileError("assignment target expression must be side-effect free", line)

    def compile_rhs(self, e, line):
        """RHS position: logged operations are allowed here, at top level."""
        if e[0] in LOGGED_EXPRS:
            self.compile_logged(e)
        else:
            self.compile_expr(e)

    def compile_logged(self, e):
        kind = e[0]
        line = e[1]
        if kind == "alloc":
            if _has_effects(e[2]):
                raise CompileError("alloc() size must be side-effect free", line)
            self.compile_expr(e[2])
            self.emit(bc.ALLOCH, None, line)
        elif kind == "spawn":
            _, _, name, args = e
            if name not in self.program.func_index:
                raise CompileError("spawn of unknown function %r" % name, line)
            for a in args:
                if _has_effects(a):
                    raise CompileError("spawn arguments must be side-effect free", line)
                self.compile_expr(a)
            self.emit(bc.SPAWN, (self.program.func_index[name], len(args)), line)
        elif kind == "input":
            self.emit(bc.INPUTV, None, line)
        elif kind == "clock":
            self.emit(bc.CLOCKV, None, line)
        elif kind == "rand":
            self.emit(bc.RANDV, None, line)
        elif kind == "new":
            tname = e[2]
            if tname not in self.program.structs:
                raise CompileError("unknown struct %r" % tname, line)
            self.emit(bc.NEWSTRUCT, tname, line)
        elif kind == "mutex":
            self.emit(bc.NEWMUTEX, None, line)
        elif kind == "list":
            self.emit(bc.LISTNEW, None, line)

    # -- expressions ---------------------------------------------------
    def compile_expr(self, e):
        kind = e[0]
        line = e[1]
        if kind == "int" or kind == "str":
            self.emit(bc.CONST, e[2], line)
        elif kind == "bool":
            self.emit(bc.CONST, e[2], line)
        elif kind == "nil":
            self.emit(bc.CONST, None, line)
        elif kind == "name":
            name = e[2]
            slot = self.slot(name, create=False)
            if slot is not None:
                self.emit(bc.LOADL, slot, line)
            elif name in self.program.globals:
                self.emit(bc.LOADG, name, line)
            else:
                raise CompileError("unknown name %r" % name, line)
        elif kind == "bin":
            op = e[2]
            if op == "&&":
                self.compile_expr(e[3])
                jf = self.emit(bc.JF, None, line)
                self.compile_expr(e[4])
                jend = self.emit(bc.JMP, None, line)
                self.fn.patch(jf, len(self.fn.ops))
                self.emit(bc.CONST, False, line)
                self.fn.patch(jend, len(self.fn.ops))
            elif op == "||":
                self.compile_expr(e[3])
                self.emit(bc.NOT, None, line)
                jf = self.emit(bc.JF, None, line)  # orig was true
                self.compile_expr(e[4])
                jend = self.emit(bc.JMP, None, line)
                self.fn.patch(jf, len(self.fn.ops))
                self.emit(bc.CONST, True, line)
                self.fn.patch(jend, len(self.fn.ops))
            else:
                self.compile_expr(e[3])
                self.compile_expr(e[4])
                self.emit(BIN_OPS[op], None, line)
        elif kind == "not":
            self.compile_expr(e[2])
            self.emit(bc.NOT, None, line)
        elif kind == "neg":
            self.compile_expr(e[2])
            self.emit(bc.NEG, None, line)
        elif kind == "call":
            _, _, name, args = e
            if name not in self.program.func_index:
                raise CompileError("call of unknown function %r" % name, line)
            fidx = self.program.func_index[name]
            callee = self.program.functions[fidx]
            if len(args) != callee.nparams:
                raise CompileError("%s() takes %d args, got %d"
                                   % (name, callee.nparams, len(args)), line)
            for a in args:
                self.compile_expr(a)
            self.emit(bc.CALL, (fidx, len(args)), line)
        elif kind == "deref":
            self.compile_expr(e[2])
            self.emit(bc.DEREF, None, line)
        elif kind == "addr":
            path = e[2]
            if path[0] == "field":
                self.compile_expr(path[2])
                self.emit(bc.FLDADDR, path[3], line)
            elif path[0] == "deref":
                self.compile_expr(path[2])
            else:
                raise CompileError("list elements have no address", line)
        elif kind == "field":
            self.compile_expr(e[2])
            self.emit(bc.FLDLOAD, e[3], line)
        elif kind == "index":
            self.compile_expr(e[2])
            self.compile_expr(e[3])
            self.emit(bc.LISTGET, None, line)
        elif kind == "len":
            self.compile_expr(e[2])
            self.emit(bc.LENV, None, line)
        elif kind in LOGGED_EXPRS:
            raise CompileError(
                "%s() may only appear alone on the right-hand side of an "
                "assignment or as a bare statement" % kind, line)
        else:
            raise CompileError("unknown expression kind %r" % kind, line)


def compile_program(source, filename="<string>"):
    """Parse and compile .fr source text into a Program."""
    structs, globals_, fn_asts = parse_source(source)
    prog = Program(source, filename)
    for name, fields, line in structs:
        if name in prog.structs:
            raise CompileError("duplicate struct %r" % name, line)
        prog.structs[name] = list(fields)
    for name, val, line in globals_:
        if name in prog.globals:
            raise CompileError("duplicate global %r" % name, line)
        prog.globals[name] = val
        prog.global_order.append(name)
    # Pass 1: register function headers so calls/spawns can resolve forward.
    for name, params, _body, line in fn_asts:
        if name in prog.func_index:
            raise CompileError("duplicate function %r" % name, line)
        fn = Function(name, len(prog.functions), len(params))
        fn.local_names = list(params)
        prog.func_index[name] = fn.index
        prog.functions.append(fn)
    if "main" not in prog.func_index:
        raise CompileError("no 'main' function")
    # Pass 2: compile bodies.
    for name, params, body, line in fn_asts:
        fn = prog.functions[prog.func_index[name]]
        FnCompiler(prog, fn, fn_asts).compile_body(body, line)
    return prog
