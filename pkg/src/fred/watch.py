"""Watch-expression evaluation against a stopped VM.

Watch expressions use the target-language expression grammar, minus
anything effectful: no calls, no allocation, no input/clock/rand.  They
are evaluated directly off the AST against the current VM state, so
evaluating one never perturbs execution, the log, or the schedule.

Memory reads go through the VM's non-faulting read path: dereferencing a
freed or unmapped address yields an eval error rather than a VM fault.
The search layer decides how to classify eval errors (bad by default).
"""

from .errors import EvalError
from .lang import parse_expression

_BANNED = frozenset(["call", "spawn", "alloc", "input", "clock", "rand",
                     "new", "mutex", "list"])


class EvalResult:
    __slots__ = ("ok", "value", "reason")

    def __init__(self, ok, value=None, reason=None):
        self.ok = ok
        self.value = value
        self.reason = reason  # 'freed' | 'unmapped' | 'type' | ...

    def truthy(self):
        """C-style truth of the value; only meaningful when ok."""
        v = self.value
        return not (v is False or v is None or v == 0)

    def __repr__(self):
        if self.ok:
            return "EvalResult(ok, %r)" % (self.value,)
        return "EvalResult(error, %s)" % self.reason


def compile_watch(text):
    """Parse and validate a watch expression; returns its AST."""
    ast = parse_expression(text)
    _check_pure(ast, text)
    return ast


def _check_pure(node, text):
    if not isinstance(node, tuple):
        return
    if node[0] in _BANNED:
        raise EvalError("impure", "%s() not allowed in a watch expression: %r"
                        % (node[0], text))
    for sub in node[2:]:
        if isinstance(sub, tuple):
            _check_pure(sub, text)
        elif isinstance(sub, list):
            for s in sub:
                _check_pure(s, text)


class _EvalErr(Exception):
    def __init__(self, reason, detail=""):
        self.reason = reason
        self.detail = detail


def evaluate(vm, ast, tid=0):
    """Evaluate a watch AST against `vm`, resolving names first in the
    locals of thread `tid`'s innermost frame, then in globals."""
    th = vm.threads[tid] if 0 <= tid < len(vm.threads) else None
    frame = th.frames[-1] if th is not None and th.frames else None
    try:
        return EvalResult(True, _ev(vm, frame, ast))
    except _EvalErr as e:
        reason = e.reason if not e.detail else "%s: %s" % (e.reason, e.detail)
        return EvalResult(False, None, reason)


def _ev(vm, frame, e):
    kind = e[0]
    if kind in ("int", "str", "bool"):
        return e[2]
    if kind == "nil":
        return None
    if kind == "name":
        name = e[2]
        if frame is not None:
            fn = frame[0]
            if name in fn.local_names:
                return frame[2][fn.local_names.index(name)]
        if name in vm.globals:
            return vm.globals[name]
        raise _EvalErr("unknown-name", name)
    if kind == "bin":
        op = e[2]
        if op == "&&":
            a = _ev(vm, frame, e[3])
            if a is False or a is None or a == 0:
                return False
            b = _ev(vm, frame, e[4])
            return not (b is False or b is None or b == 0)
        if op == "||":
            a = _ev(vm, frame, e[3])
            if not (a is False or a is None or a == 0):
                return True
            b = _ev(vm, frame, e[4])
            return not (b is False or b is None or b == 0)
        a = _ev(vm, frame, e[3])
        b = _ev(vm, frame, e[4])
        try:
            if op == "+":
                return a + b
            if op == "-":
                return a - b
            if op == "*":
                return a * b
            if op == "/":
                if b == 0:
                    raise _EvalErr("div-zero")
                return a // b
            if op == "%":
                if b == 0:
                    raise _EvalErr("div-zero")
                return a % b
            if op == "==":
                return vm._eq(a, b)
            if op == "!=":
                return not vm._eq(a, b)
            if op == "<":
                return a < b
            if op == "<=":
                return a <= b
            if op == ">":
                return a > b
            if op == ">=":
                return a >= b
        except TypeError as te:
            raise _EvalErr("type", str(te))
        raise _EvalErr("type", "operator %r" % op)
    if kind == "not":
        v = _ev(vm, frame, e[2])
        return v is False or v is None or v == 0
    if kind == "neg":
        v = _ev(vm, frame, e[2])
        if not isinstance(v, int) or isinstance(v, bool):
            raise _EvalErr("type", "unary minus on %r" % (v,))
        return -v
    if kind == "deref":
        addr = _ev(vm, frame, e[2])
        status, val = vm.read_mem(addr)
        if status != "ok":
            raise _EvalErr(status, "*(%r)" % (addr,))
        return val
    if kind == "addr":
        path = e[2]
        if path[0] == "field":
            ref = _ev(vm, frame, path[2])
            cell = vm.heap.get(ref) if isinstance(ref, int) else None
            if cell is None:
                raise _EvalErr("unmapped", "&(...).%s" % path[3])
            if cell.freed:
                raise _EvalErr("freed", "&(...).%s" % path[3])
            if cell.kind != "struct" or path[3] not in cell.fields:
                raise _EvalErr("type", "no field %s" % path[3])
            return cell.base + 8 * cell.fields[path[3]]
        if path[0] == "deref":
            return _ev(vm, frame, path[2])
        raise _EvalErr("type", "cannot take that address")
    if kind == "field":
        ref = _ev(vm, frame, e[2])
        cell = vm.heap.get(ref) if isinstance(ref, int) else None
        if cell is None:
            raise _EvalErr("unmapped" if ref else "nil-deref", ".%s" % e[3])
        if cell.freed:
            raise _EvalErr("freed", ".%s" % e[3])
        if cell.kind != "struct" or e[3] not in cell.fields:
            raise _EvalErr("type", "no field %s" % e[3])
        return cell.words[cell.fields[e[3]]]
    if kind == "index":
        ref = _ev(vm, frame, e[2])
        idx = _ev(vm, frame, e[3])
        cell = vm.heap.get(ref) if isinstance(ref, int) else None
        if cell is None or cell.kind != "list":
            raise _EvalErr("type", "index of non-list")
        if cell.freed:
            raise _EvalErr("freed", "[%r]" % idx)
        if not isinstance(idx, int) or not 0 <= idx < len(cell.items):
            raise _EvalErr("index-range", "[%r]" % idx)
        return cell.items[idx]
    if kind == "len":
        v = _ev(vm, frame, e[2])
        if isinstance(v, str):
            return len(v)
        cell = vm.heap.get(v) if isinstance(v, int) else None
        if cell is None or cell.kind != "list" or cell.freed:
            raise _EvalErr("type", "len of non-list")
        return len(cell.items)
    raise _EvalErr("type", "unsupported expression kind %r" % kind)
