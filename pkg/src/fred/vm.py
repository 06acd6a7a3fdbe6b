"""The target-language virtual machine.

Green threads interleaved at statement granularity by the VM's own
scheduler.  One call to step() completes exactly one source statement of
exactly one thread (or reports that the thread blocked or faulted).

Modes:
  record    scheduler draws uniformly from a splittable 64-bit PRNG at
            every statement boundary; nondeterminism sources append events.
  replay    same PRNG schedule (the PRNG state is part of the serialized
            VM state, so replay from any checkpoint reproduces the recorded
            schedule exactly); every logged action must match the event at
            the log cursor or the thread is descheduled until the cursor
            advances.
  detached  off-script execution past the recorded timeline (used by the
            scheduler-locking endgame): no log interaction at all.

Heap addresses come from a deterministic bump allocator whose state is part
of the VM state, so the k-th allocation returns the same address in record
and in every replay.  Freed addresses are never reused within a session.
"""

import bisect as _bisect
import hashlib
import json
import time

from . import bytecode as bc
from .errors import FredError, ReplayDivergence
from .events import EventKind

HEAP_BASE = 0x100000
HEAP_CAP = 2 ** 32
WORD = 8

_MASK = (1 << 64) - 1


def splitmix64(state):
    """One step of SplitMix64; returns (new_state, value)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


class _Fault(Exception):
    def __init__(self, kind, detail=""):
        self.kind = kind
        self.detail = detail


class Cell:
    __slots__ = ("base", "size", "kind", "fields", "words", "items", "freed")

    def __init__(self, base, size, kind, fields=None, items=None):
        self.base = base
        self.size = size          # aligned byte size
        self.kind = kind          # 'raw' | 'struct' | 'list'
        self.fields = fields      # struct: field name -> word index
        self.words = [0] * (size // WORD) if kind != "list" else None
        self.items = items if items is not None else ([] if kind == "list" else None)
        self.freed = False


class Thread:
    __slots__ = ("tid", "frames", "status", "wait_kind", "wait_target", "log_blocked")

    def __init__(self, tid):
        self.tid = tid
        self.frames = []          # each frame: [func, ip, locals, stack]
        self.status = "runnable"  # 'runnable' | 'blocked' | 'exited' | 'faulted'
        self.wait_kind = None     # 'lock' | 'join'
        self.wait_target = None
        self.log_blocked = False


class StepOutcome:
    __slots__ = ("tid", "loc", "events", "reason", "detail", "depth_before", "depth_after")

    def __init__(self, tid, loc, events, reason, detail="", depth_before=0, depth_after=0):
        self.tid = tid
        self.loc = loc            # SourceLoc of the completed statement
        self.events = events      # events emitted/consumed during this step
        self.reason = reason      # 'completed' | 'blocked' | 'fault' | 'program-exit'
        self.detail = detail
        self.depth_before = depth_before
        self.depth_after = depth_after

    def __repr__(self):
        return "StepOutcome(tid=%r, %s, %s)" % (self.tid, self.reason, self.loc)


class VM:
    def __init__(self, program, seed):
        self.program = program
        self.seed = seed
        self.mode = "record"
        self.locked_tid = None
        self.log = None           # attached EventLog
        self.threads = []
        self.heap = {}
        self.heap_bases = []
        self.globals = dict(program.globals)
        self.locks = {}           # lock id -> owner tid or None
        self.next_lock_id = 1
        self.next_addr = HEAP_BASE
        self.total_alloc = 0
        self.sched_state = seed & _MASK
        self.rand_state = (seed ^ 0xDEADBEEFCAFEF00D) & _MASK
        self.gstep = 0            # statements completed
        self.tick = 0
        self.input_queue = []
        self.output = []
        self._spawn_thread(program.entry, [])

    # -- construction helpers -------------------------------------------
    def _spawn_thread(self, func_index, argvals):
        th = Thread(len(self.threads))
        fn = self.program.functions[func_index]
        lcls = list(argvals) + [None] * (fn.nlocals - len(argvals))
        th.frames.append([fn, 0, lcls, []])
        self.threads.append(th)
        return th

    # -- heap -------------------------------------------------------------
    def _alloc_cell(self, size, kind, fields=None):
        nwords = max(1, (size + WORD - 1) // WORD)
        aligned = nwords * WORD
        if self.total_alloc + aligned > HEAP_CAP:
            raise _Fault("resource-exhausted", "heap cap exceeded")
        base = self.next_addr
        self.next_addr += aligned
        self.total_alloc += aligned
        cell = Cell(base, aligned, kind, fields=fields)
        self.heap[base] = cell
        self.heap_bases.append(base)
        return cell

    def cell_at(self, addr):
        """Cell containing `addr`, or None."""
        cell = self.heap.get(addr)
        if cell is not None:
            return cell
        i = _bisect.bisect_right(self.heap_bases, addr) - 1
        if i < 0:
            return None
        cell = self.heap[self.heap_bases[i]]
        if addr < cell.base + cell.size:
            return cell
        return None

    def read_mem(self, addr):
        """Non-faulting word read: ('ok', value) | ('freed', None) | ('unmapped', None)."""
        if not isinstance(addr, int):
            return ("unmapped", None)
        cell = self.cell_at(addr)
        if cell is None:
            return ("unmapped", None)
        if cell.freed:
            return ("freed", None)
        if cell.kind == "list":
            return ("unmapped", None)
        return ("ok", cell.words[(addr - cell.base) // WORD])

    # -- events -----------------------------------------------------------
    def _emit(self, tid, kind, payload, events):
        """Record-side append via the two-phase reserve/fill API."""
        slot = self.log.reserve(tid, kind)
        ev = self.log.fill(slot, payload)
        events.append(ev)
        return ev

    def _gate(self, tid, kind, key=None):
        """Replay-side gate; None means the caller must deschedule."""
        return self.log.gate(tid, kind, key)

    # -- scheduling -------------------------------------------------------
    def _pick(self, gated):
        if self.locked_tid is not None:
            th = self.threads[self.locked_tid]
            if th.status in ("exited", "faulted"):
                raise FredError("locked thread %d is %s" % (th.tid, th.status))
            return th
        cands = [t for t in self.threads
                 if t.status == "runnable" and not t.log_blocked and t.tid not in gated]
        if not cands:
            return None
        if len(cands) == 1:
            return cands[0]
        self.sched_state, draw = splitmix64(self.sched_state)
        return cands[draw % len(cands)]

    def _idle_outcome(self, gated):
        if all(t.status == "exited" for t in self.threads):
            return StepOutcome(None, None, [], "program-exit")
        if any(t.status == "faulted" for t in self.threads):
            return StepOutcome(None, None, [], "fault", "thread faulted earlier")
        blocked_by_log = [t for t in self.threads
                         if t.status == "runnable" and (t.log_blocked or t.tid in gated)]
        if blocked_by_log:
            head = self.log.head() if self.log is not None else None
            raise ReplayDivergence(head, "gated threads %s cannot progress"
                                   % [t.tid for t in blocked_by_log])
        return StepOutcome(None, None, [], "fault", "deadlock: all threads blocked")

    def _clear_log_blocks(self):
        for t in self.threads:
            t.log_blocked = False

    # -- main step --------------------------------------------------------
    def step(self):
        """Run exactly one source statement of one thread."""
        gated = set()
        while True:
            th = self._pick(gated)
            if th is None:
                return self._idle_outcome(gated)
            if th.status == "blocked":
                # Only reachable in locked mode.
                return StepOutcome(th.tid, None, [], "blocked",
                                   "%s %r" % (th.wait_kind, th.wait_target))
            out = self._run_thread(th)
            if out == "gated":
                gated.add(th.tid)
                continue
            if out.reason == "completed":
                self.gstep += 1
                if self.log is not None and self.mode == "replay":
                    self._clear_log_blocks()
            return out

    def _run_thread(self, th):
        tid = th.tid
        mode = self.mode
        frames = th.frames
        frame = frames[-1]
        func, ip, lcls, stack = frame
        ops = func.ops
        fargs = func.args
        depth_before = len(frames)
        events = []
        started = False
        start_loc = None
        stmt_start_ip = ip
        push = stack.append
        pop = stack.pop
        try:
            while True:
                op = ops[ip]
                a = fargs[ip]
                if op == 0:  # STMT
                    if started:
                        frame[1] = ip
                        return StepOutcome(tid, start_loc, events, "completed", "",
                                           depth_before, len(frames))
                    started = True
                    start_loc = self.program.stmt_locs[a]
                    stmt_start_ip = ip
                    ip += 1
                elif op == 1:  # CONST
                    push(a)
                    ip += 1
                elif op == 2:  # LOADL
                    push(lcls[a])
                    ip += 1
                elif op == 3:  # STOREL
                    lcls[a] = pop()
                    ip += 1
                elif op == 19:  # JMP
                    ip = a
                elif op == 20:  # JF
                    v = pop()
                    if v is False or v is None or v == 0:
                        ip = a
                    else:
                        ip += 1
                elif 6 <= op <= 16:  # binary arithmetic / comparison
                    b = pop()
                    x = pop()
                    if op == 6:
                        push(x + b)
                    elif op == 7:
                        push(x - b)
                    elif op == 8:
                        push(x * b)
                    elif op == 9:
                        if b == 0:
                            raise _Fault("div-zero", str(start_loc))
                        push(x // b)
                    elif op == 10:
                        if b == 0:
                            raise _Fault("div-zero", str(start_loc))
                        push(x % b)
                    elif op == 11:
                        push(self._eq(x, b))
                    elif op == 12:
                        push(not self._eq(x, b))
                    elif op == 13:
                        push(x < b)
                    elif op == 14:
                        push(x <= b)
                    elif op == 15:
                        push(x > b)
                    else:
                        push(x >= b)
                    ip += 1
                elif op == 4:  # LOADG
                    push(self.globals[a])
                    ip += 1
                elif op == 5:  # STOREG
                    self.globals[a] = pop()
                    ip += 1
                elif op == 17:  # NOT
                    v = pop()
                    push(v is False or v is None or v == 0)
                    ip += 1
                elif op == 18:  # NEG
                    push(-pop())
                    ip += 1
                elif op == 21:  # CALL
                    fidx, nargs = a
                    callee = self.program.functions[fidx]
                    argv = stack[len(stack) - nargs:]
                    del stack[len(stack) - nargs:]
                    frame[1] = ip + 1
                    frame = [callee, 0, argv + [None] * (callee.nlocals - nargs), []]
                    frames.append(frame)
                    func, ip, lcls, stack = frame
                    ops = func.ops
                    fargs = func.args
                    push = stack.append
                    pop = stack.pop
                elif op == 22:  # RET
                    retval = pop()
                    frames.pop()
                    if not frames:
                        th.status = "exited"
                        if mode == "record":
                            self._emit(tid, EventKind.THREAD_EXIT, (), events)
                        elif mode == "replay":
                            permit = self._gate(tid, EventKind.THREAD_EXIT)
                            if permit is None:
                                # Exit order is logged; cannot re-enter the
                                # frame, so a mismatch here is divergence.
                                raise ReplayDivergence(self.log.head(),
                                                       "(tid %d ThreadExit)" % tid)
                            events.append(self.log.consume(permit))
                        self._wake_joiners(tid)
                        return StepOutcome(tid, start_loc, events, "completed", "",
                                           depth_before, 0)
                    frame = frames[-1]
                    func, ip, lcls, stack = frame
                    ops = func.ops
                    fargs = func.args
                    push = stack.append
                    pop = stack.pop
                    push(retval)
                elif op == 23:  # POP
                    pop()
                    ip += 1
                elif op == 24:  # SPAWN
                    fidx, nargs = a
                    child_tid = len(self.threads)
                    if mode == "replay":
                        permit = self._gate(tid, EventKind.THREAD_CREATE, child_tid)
                        if permit is None:
                            return self._desched(th, frame, stmt_start_ip, stack)
                        self.log.consume(permit)
                        events.append(permit)
                    argv = stack[len(stack) - nargs:]
                    del stack[len(stack) - nargs:]
                    self._spawn_thread(fidx, argv)
                    if mode == "record":
                        self._emit(tid, EventKind.THREAD_CREATE, (child_tid,), events)
                    push(child_tid)
                    ip += 1
                elif op == 25:  # JOIN
                    target = pop()
                    if not isinstance(target, int) or not 0 <= target < len(self.threads):
                        raise _Fault("bad-join", "no thread %r" % (target,))
                    if self.threads[target].status not in ("exited", "faulted"):
                        th.status = "blocked"
                        th.wait_kind = "join"
                        th.wait_target = target
                        return self._abort(th, frame, stmt_start_ip, stack, tid)
                    if mode == "replay":
                        permit = self._gate(tid, EventKind.JOIN, target)
                        if permit is None:
                            return self._desched(th, frame, stmt_start_ip, stack)
                        self.log.consume(permit)
                        events.append(permit)
                    elif mode == "record":
                        self._emit(tid, EventKind.JOIN, (target,), events)
                    ip += 1
                elif op == 26:  # LOCK
                    lid = pop()
                    owner = self.locks.get(lid, "missing")
                    if owner == "missing":
                        raise _Fault("bad-mutex", "lock(%r) at %s" % (lid, start_loc))
                    if owner is not None:
                        if owner == tid:
                            raise _Fault("recursive-lock", "lock %d" % lid)
                        th.status = "blocked"
                        th.wait_kind = "lock"
                        th.wait_target = lid
                        return self._abort(th, frame, stmt_start_ip, stack, tid)
                    if mode == "replay":
                        permit = self._gate(tid, EventKind.LOCK_ACQUIRE, lid)
                        if permit is None:
                            return self._desched(th, frame, stmt_start_ip, stack)
                        self.log.consume(permit)
                        events.append(permit)
                    elif mode == "record":
                        self._emit(tid, EventKind.LOCK_ACQUIRE, (lid,), events)
                    self.locks[lid] = tid
                    ip += 1
                elif op == 27:  # UNLOCK
                    lid = pop()
                    if self.locks.get(lid, "missing") != tid:
                        raise _Fault("unlock-not-owner", "lock %r at %s" % (lid, start_loc))
                    if mode == "replay":
                        permit = self._gate(tid, EventKind.LOCK_RELEASE, lid)
                        if permit is None:
                            return self._desched(th, frame, stmt_start_ip, stack)
                        self.log.consume(permit)
                        events.append(permit)
                    elif mode == "record":
                        self._emit(tid, EventKind.LOCK_RELEASE, (lid,), events)
                    self.locks[lid] = None
                    self._wake_lock_waiters(lid)
                    ip += 1
                elif op == 28:  # NEWMUTEX
                    lid = self.next_lock_id
                    self.next_lock_id += 1
                    self.locks[lid] = None
                    push(lid)
                    ip += 1
                elif op == 29:  # ALLOC
                    size = pop()
                    if not isinstance(size, int) or size <= 0:
                        raise _Fault("bad-alloc", "alloc(%r)" % (size,))
                    addr = self._logged_alloc(th, tid, size, "raw", None, events)
                    if addr is None:
                        return self._desched(th, frame, stmt_start_ip, stack)
                    push(addr)
                    ip += 1
                elif op == 30:  # FREE
                    addr = pop()
                    cell = self.heap.get(addr)
                    if cell is None:
                        raise _Fault("bad-free", "free(%r)" % (addr,))
                    if cell.freed:
                        raise _Fault("double-free", "free(0x%x)" % addr)
                    if mode == "replay":
                        permit = self._gate(tid, EventKind.FREE, addr)
                        if permit is None:
                            return self._desched(th, frame, stmt_start_ip, stack)
                        self.log.consume(permit)
                        events.append(permit)
                    elif mode == "record":
                        self._emit(tid, EventKind.FREE, (addr,), events)
                    cell.freed = True
                    ip += 1
                elif op == 31:  # DEREF
                    addr = pop()
                    status, val = self.read_mem(addr)
                    if status != "ok":
                        raise _Fault(status, "*(%r) at %s" % (addr, start_loc))
                    push(val)
                    ip += 1
                elif op == 32:  # STOREMEM
                    val = pop()
                    addr = pop()
                    cell = self.cell_at(addr) if isinstance(addr, int) else None
                    if cell is None or cell.kind == "list":
                        raise _Fault("unmapped", "*(%r) = ... at %s" % (addr, start_loc))
                    if cell.freed:
                        raise _Fault("freed", "*(0x%x) = ..." % addr)
                    cell.words[(addr - cell.base) // WORD] = val
                    ip += 1
                elif op == 33:  # FLDLOAD
                    ref = pop()
                    cell = self._struct_cell(ref, a)
                    push(cell.words[cell.fields[a]])
                    ip += 1
                elif op == 34:  # FLDSTORE
                    val = pop()
                    ref = pop()
                    cell = self._struct_cell(ref, a)
                    cell.words[cell.fields[a]] = val
                    ip += 1
                elif op == 35:  # FLDADDR
                    ref = pop()
                    cell = self._struct_cell(ref, a)
                    push(cell.base + WORD * cell.fields[a])
                    ip += 1
                elif op == 36:  # NEWSTRUCT
                    fields = self.program.structs[a]
                    addr = self._logged_alloc(th, tid, WORD * max(1, len(fields)), "struct",
                                              {f: i for i, f in enumerate(fields)}, events)
                    if addr is None:
                        return self._desched(th, frame, stmt_start_ip, stack)
                    push(addr)
                    ip += 1
                elif op == 37:  # LISTNEW
                    addr = self._logged_alloc(th, tid, WORD, "list", None, events)
                    if addr is None:
                        return self._desched(th, frame, stmt_start_ip, stack)
                    push(addr)
                    ip += 1
                elif op == 38:  # LISTGET
                    idx = pop()
                    ref = pop()
                    items = self._list_items(ref)
                    if not isinstance(idx, int) or not 0 <= idx < len(items):
                        raise _Fault("index-range", "[%r] of list len %d" % (idx, len(items)))
                    push(items[idx])
                    ip += 1
                elif op == 39:  # LISTSET
                    val = pop()
                    idx = pop()
                    ref = pop()
                    items = self._list_items(ref)
                    if not isinstance(idx, int) or not 0 <= idx < len(items):
                        raise _Fault("index-range", "[%r] of list len %d" % (idx, len(items)))
                    items[idx] = val
                    ip += 1
                elif op == 40:  # APPEND
                    val = pop()
                    ref = pop()
                    self._list_items(ref).append(val)
                    ip += 1
                elif op == 41:  # LEN
                    v = pop()
                    if isinstance(v, str):
                        push(len(v))
                    else:
                        push(len(self._list_items(v)))
                    ip += 1
                elif op == 42:  # INPUT
                    if mode == "replay":
                        permit = self._gate(tid, EventKind.INPUT_READ)
                        if permit is None:
                            return self._desched(th, frame, stmt_start_ip, stack)
                        self.log.consume(permit)
                        events.append(permit)
                        val = permit.payload.decode("utf-8")
                        if self.input_queue:
                            self.input_queue.pop(0)
                    else:
                        val = self.input_queue.pop(0) if self.input_queue else ""
                        if mode == "record":
                            self._emit(tid, EventKind.INPUT_READ, val.encode("utf-8"), events)
                    push(val)
                    ip += 1
                elif op == 43:  # CLOCK
                    if mode == "replay":
                        permit = self._gate(tid, EventKind.CLOCK_READ)
                        if permit is None:
                            return self._desched(th, frame, stmt_start_ip, stack)
                        self.log.consume(permit)
                        events.append(permit)
                        val = permit.payload[0]
                    else:
                        val = time.time_ns() & _MASK
                        if mode == "record":
                            self._emit(tid, EventKind.CLOCK_READ, (val,), events)
                    push(val)
                    ip += 1
                elif op == 44:  # RAND
                    self.rand_state, val = splitmix64(self.rand_state)
                    if mode == "replay":
                        permit = self._gate(tid, EventKind.RAND_READ)
                        if permit is None:
                            # Roll the draw back; the statement will re-run.
                            self.rand_state = self._unsplit(self.rand_state)
                            return self._desched(th, frame, stmt_start_ip, stack)
                        self.log.consume(permit)
                        events.append(permit)
                        val = permit.payload[0]
                    elif mode == "record":
                        self._emit(tid, EventKind.RAND_READ, (val,), events)
                    push(val)
                    ip += 1
                elif op == 45:  # PRINT
                    n = a
                    vals = stack[len(stack) - n:]
                    del stack[len(stack) - n:]
                    self.output.append(" ".join(self._fmt(v) for v in vals))
                    ip += 1
                else:
                    raise FredError("bad opcode %d" % op)
        except _Fault as f:
            th.status = "faulted"
            frame[1] = ip
            return StepOutcome(tid, start_loc, events, "fault",
                               "%s: %s" % (f.kind, f.detail), depth_before, len(frames))
        except (TypeError, AttributeError) as e:
            th.status = "faulted"
            frame[1] = ip
            return StepOutcome(tid, start_loc, events, "fault",
                               "type: %s" % e, depth_before, len(frames))

    # -- helpers used by the step loop -----------------------------------
    def _unsplit(self, state):
        return (state - 0x9E3779B97F4A7C15) & _MASK

    def _abort(self, th, frame, stmt_start_ip, stack, tid):
        """Thread blocked mid-statement: rewind to the statement start."""
        frame[1] = stmt_start_ip
        stack.clear()
        return StepOutcome(tid, None, [], "blocked",
                           "%s %r" % (th.wait_kind, th.wait_target))

    def _desched(self, th, frame, stmt_start_ip, stack):
        """Replay gate denied: rewind the statement and let another run."""
        frame[1] = stmt_start_ip
        stack.clear()
        th.log_blocked = True
        return "gated"

    def _logged_alloc(self, th, tid, size, kind, fields, events):
        """Allocation with Alloc event handling; None means descheduled."""
        if self.mode == "replay":
            permit = self._gate(tid, EventKind.ALLOC)
            if permit is None:
                return None
            cell = self._alloc_cell(size, kind, fields)
            lsize, laddr = permit.payload
            if laddr != cell.base:
                raise ReplayDivergence(permit, "alloc returned 0x%x" % cell.base)
            self.log.consume(permit)
            events.append(permit)
            return cell.base
        cell = self._alloc_cell(size, kind, fields)
        if self.mode == "record":
            self._emit(tid, EventKind.ALLOC, (size, cell.base), events)
        return cell.base

    def _struct_cell(self, ref, fname):
        cell = self.heap.get(ref) if isinstance(ref, int) else None
        if cell is None:
            raise _Fault("unmapped" if ref else "nil-deref", ".%s of %r" % (fname, ref))
        if cell.freed:
            raise _Fault("freed", ".%s of 0x%x" % (fname, ref))
        if cell.kind != "struct" or fname not in cell.fields:
            raise _Fault("bad-field", ".%s of 0x%x" % (fname, ref))
        return cell

    def _list_items(self, ref):
        cell = self.heap.get(ref) if isinstance(ref, int) else None
        if cell is None:
            raise _Fault("unmapped" if ref else "nil-deref", "list %r" % (ref,))
        if cell.freed:
            raise _Fault("freed", "list 0x%x" % ref)
        if cell.kind != "list":
            raise _Fault("not-a-list", "0x%x" % ref)
        return cell.items

    @staticmethod
    def _eq(a, b):
        # nil compares equal to 0, C-style, so address expressions like
        # `p == 0` behave the way the corpus programs expect.
        if a is None:
            return b is None or b == 0
        if b is None:
            return a == 0
        return a == b

    @staticmethod
    def _fmt(v):
        if v is None:
            return "nil"
        if v is True:
            return "true"
        if v is False:
            return "false"
        return str(v)

    def _wake_lock_waiters(self, lid):
        for t in self.threads:
            if t.status == "blocked" and t.wait_kind == "lock" and t.wait_target == lid:
                t.status = "runnable"
                t.wait_kind = None
                t.wait_target = None

    def _wake_joiners(self, tid):
        for t in self.threads:
            if t.status == "blocked" and t.wait_kind == "join" and t.wait_target == tid:
                t.status = "runnable"
                t.wait_kind = None
                t.wait_target = None

    # -- introspection ----------------------------------------------------
    def thread_loc(self, tid):
        """SourceLoc of the statement the thread is stopped at, or None."""
        th = self.threads[tid]
        if not th.frames:
            return None
        func, ip = th.frames[-1][0], th.frames[-1][1]
        if ip < len(func.ops) and func.ops[ip] == bc.STMT:
            return self.program.stmt_locs[func.args[ip]]
        return self.program.loc_for(func, min(ip, len(func.ops) - 1))

    def live_tids(self):
        return [t.tid for t in self.threads if t.status not in ("exited",)]

    # -- serialization ----------------------------------------------------
    def to_doc(self):
        def enc(v):
            # str/int/bool/None are JSON-native and unambiguous enough here,
            # except that a string value could collide with nothing: fine.
            return v

        cells = []
        for base in self.heap_bases:
            c = self.heap[base]
            cells.append([c.base, c.size, c.kind,
                          sorted(c.fields.items()) if c.fields else None,
                          list(c.items) if c.kind == "list" else list(c.words),
                          c.freed])
        threads = []
        for t in self.threads:
            frames = [[f[0].index, f[1], [enc(v) for v in f[2]], [enc(v) for v in f[3]]]
                      for f in t.frames]
            threads.append([t.tid, t.status, t.wait_kind, t.wait_target, frames])
        return {
            "version": 1,
            "program": self.program.fingerprint(),
            "seed": self.seed,
            "threads": threads,
            "heap": cells,
            "globals": sorted(self.globals.items()),
            "locks": sorted(self.locks.items()),
            "next_lock_id": self.next_lock_id,
            "next_addr": self.next_addr,
            "total_alloc": self.total_alloc,
            "sched_state": self.sched_state,
            "rand_state": self.rand_state,
            "gstep": self.gstep,
            "tick": self.tick,
            "input_queue": list(self.input_queue),
            "output": list(self.output),
        }

    @classmethod
    def from_doc(cls, program, doc):
        if doc.get("program") != program.fingerprint():
            from .errors import CorruptImage
            raise CorruptImage("snapshot was taken for a different program")
        vm = cls.__new__(cls)
        vm.program = program
        vm.seed = doc["seed"]
        vm.mode = "record"
        vm.locked_tid = None
        vm.log = None
        vm.threads = []
        for tid, status, wk, wt, frames in doc["threads"]:
            th = Thread(tid)
            th.status = status
            th.wait_kind = wk
            th.wait_target = wt
            th.frames = [[program.functions[fi], ip, list(lcls), list(stk)]
                         for fi, ip, lcls, stk in frames]
            vm.threads.append(th)
        vm.heap = {}
        vm.heap_bases = []
        for base, size, kind, fields, payload, freed in doc["heap"]:
            cell = Cell(base, size, kind, fields=dict(fields) if fields else None)
            if kind == "list":
                cell.items = list(payload)
            else:
                cell.words = list(payload)
            cell.freed = freed
            vm.heap[base] = cell
            vm.heap_bases.append(base)
        vm.globals = dict((k, v) for k, v in doc["globals"])
        vm.locks = dict((k, v) for k, v in doc["locks"])
        vm.next_lock_id = doc["next_lock_id"]
        vm.next_addr = doc["next_addr"]
        vm.total_alloc = doc["total_alloc"]
        vm.sched_state = doc["sched_state"]
        vm.rand_state = doc["rand_state"]
        vm.gstep = doc["gstep"]
        vm.tick = doc["tick"]
        vm.input_queue = list(doc["input_queue"])
        vm.output = list(doc["output"])
        return vm

    def state_bytes(self):
        return json.dumps(self.to_doc(), sort_keys=True, separators=(",", ":")).encode()

    def state_hash(self):
        return hashlib.sha256(self.state_bytes()).hexdigest()
