"""The GDB-flavored command layer on top of the VM.

A session has two phases.  During the record phase, movement commands
(run/continue/next/step/finish) drive the VM in record mode: the scheduler
draws from its PRNG and every nondeterministic action appends to the event
log.  Once a reverse command or a search restores an earlier state, the
session is in the replay phase: the same commands drive the VM in replay
mode, which reproduces the recorded timeline exactly.

Positions in the recorded lifetime are identified by gstep: the count of
completed statements across all threads.  replay_to(gstep) restores the
nearest checkpoint at or before the target and replays forward.  Each
replay leg drops one intermediate checkpoint at its midpoint; together
with the search's progress-condition checkpoints this is what keeps the
per-position re-execution count at two or below.
"""

import bisect
import time

from . import bytecode as bc
from .checkpoint import CheckpointImage, CheckpointStore, TimePosition
from .errors import (AtSessionStart, CommandError, CommandInterruptedUnsupported,
                     EvalError, NoSuchBreakpointLocation, TargetBeyondHistory)
from .events import EventLog
from .vm import VM
from .watch import compile_watch, evaluate

# A replay leg shorter than this is not worth an intermediate image.
MIN_LEG_FOR_IMAGE = 32


class DebugSession:
    def __init__(self, program, seed=0, store_dir=None, auto_ckpt=1000,
                 strict_eval=False):
        self.program = program
        self.seed = seed
        self.auto_ckpt = auto_ckpt          # 0 disables the hook
        self.strict_eval = strict_eval
        self.log = EventLog()
        self.store = CheckpointStore(store_dir)
        self.vm = VM(program, seed)
        self.vm.log = self.log
        self.vm.mode = "record"
        self.phase = "record"               # 'record' | 'replay'
        self.started = False
        self.ended = False
        self.end_reason = None              # 'fault' | 'program-exit'
        self.fault_detail = None
        self.record_end = None              # gstep at end of recording
        self.breakpoints = {}               # id -> line
        self.next_bp_id = 1
        self.focus = 0                      # primary thread
        self.sched_lock = False
        self.watch_expr = None
        self.history = []                   # (command text, output) pairs
        self.moves = []                     # movement items, unit- or command-level
        self.slice_gsteps = [0]             # gsteps after each tid-0 completion
        self.exec_counts = {}               # gstep index -> times executed in replay
        self.count_execs = False
        self.restarts = 0                   # checkpoint restores performed
        self.val_counter = 0                # $N counter for print
        self.output_lines = 0               # program output already shown
        self.last_report = None             # most recent TransitionReport
        self.search_progress = None         # optional callback(dict) for searches
        self.ckpt_wall = 0.0                # seconds spent taking images
        self.restore_wall = 0.0             # seconds spent restoring images

    # ------------------------------------------------------------------
    # command dispatch
    # ------------------------------------------------------------------
    def execute_command(self, line):
        """Execute one REPL command line; returns its textual output."""
        line = line.strip()
        if not line or line.startswith("#"):
            return ""
        parts = line.split(None, 1)
        verb = parts[0]
        arg = parts[1].strip() if len(parts) > 1 else ""
        handler = {
            "break": self._cmd_break,
            "run": self._cmd_run,
            "continue": self._cmd_continue,
            "next": self._cmd_next,
            "step": self._cmd_step,
            "finish": self._cmd_finish,
            "print": self._cmd_print,
            "watch": self._cmd_watch,
            "switch-thread": self._cmd_switch_thread,
            "scheduler-locking": self._cmd_sched_lock,
            "fred-checkpoint": self._cmd_checkpoint,
            "fred-reverse-step": self._cmd_reverse_step,
            "fred-reverse-next": self._cmd_reverse_next,
            "fred-reverse-finish": self._cmd_reverse_finish,
            "fred-reverse-continue": self._cmd_reverse_continue,
            "fred-reverse-watch": self._cmd_reverse_watch,
            "info": self._cmd_info,
            "interrupt": self._cmd_interrupt,
        }.get(verb)
        if handler is None:
            raise CommandError("unknown command %r" % verb)
        out = handler(arg)
        self.history.append((line, out))
        return out

    def _cmd_interrupt(self, arg):
        # Commands run to completion; interruption mid-command is rejected.
        raise CommandInterruptedUnsupported(
            "commands cannot be interrupted mid-execution")

    def _cmd_break(self, arg):
        if not arg:
            raise CommandError("break needs a line number or function name")
        if arg.isdigit():
            line = int(arg)
            if self.program.stmt_at_line(line) is None:
                raise NoSuchBreakpointLocation("no statement at line %d" % line)
        elif arg in self.program.func_index:
            fn = self.program.functions[self.program.func_index[arg]]
            line = fn.lines[0] if fn.lines else 0
            if self.program.stmt_at_line(line) is None:
                raise NoSuchBreakpointLocation("function %s has no statements" % arg)
        else:
            raise NoSuchBreakpointLocation("no such line or function: %r" % arg)
        bp = self.next_bp_id
        self.next_bp_id += 1
        self.breakpoints[bp] = line
        return "Breakpoint %d at %s:%d" % (bp, self.program.filename, line)

    def _bp_lines(self):
        return set(self.breakpoints.values())

    def _cmd_run(self, arg):
        if self.started:
            raise CommandError("program already started; use continue")
        self.started = True
        # Implicit base image so the search always has an anchor at time 0.
        self.take_checkpoint(label="base")
        loc = self.vm.thread_loc(0)
        if loc is not None and loc.line in self._bp_lines():
            return "Breakpoint hit, tid 0 at %s" % loc
        return "Starting program\n" + self._move("run", self._drive_until_stop())

    def _cmd_continue(self, arg):
        self._require_running()
        return "Continuing.\n" + self._move("continue", self._drive_until_stop())

    def _cmd_next(self, arg):
        self._require_running()
        return self._move("next", self._drive_focus(over_calls=True))

    def _cmd_step(self, arg):
        self._require_running()
        return self._move("step", self._drive_focus(over_calls=False))

    def _cmd_finish(self, arg):
        self._require_running()
        d0 = len(self.vm.threads[self.focus].frames)
        if d0 <= 1:
            raise CommandError("cannot finish the outermost frame")
        return self._move("finish", self._drive_focus(until_depth=d0 - 1))

    def _cmd_print(self, arg):
        if not arg:
            raise CommandError("print needs an expression")
        res = self.evaluate(arg)
        self.val_counter += 1
        if not res.ok:
            return "$%d = <eval-error: %s>" % (self.val_counter, res.reason)
        return "$%d = %s (%s)" % (self.val_counter, self.vm._fmt(res.value),
                                  "good" if res.truthy() else "bad")

    def _cmd_watch(self, arg):
        if not arg:
            raise CommandError("watch needs an expression")
        compile_watch(arg)
        self.watch_expr = arg
        res = self.evaluate(arg)
        cur = ("<eval-error: %s>" % res.reason) if not res.ok else self.vm._fmt(res.value)
        return "Watching: %s (currently %s)" % (arg, cur)

    def _cmd_switch_thread(self, arg):
        if not self.sched_lock:
            raise CommandError(
                "switch-thread requires scheduler-locking on; expression "
                "evaluation otherwise binds to the primary thread")
        tid = int(arg)
        if not 0 <= tid < len(self.vm.threads):
            raise CommandError("no thread %d" % tid)
        self.focus = tid
        self.vm.locked_tid = tid
        return "Focused on thread %d" % tid

    def _cmd_sched_lock(self, arg):
        if arg == "on":
            self.sched_lock = True
            self.vm.locked_tid = self.focus
        elif arg == "off":
            self.sched_lock = False
            self.vm.locked_tid = None
            self.focus = 0
        else:
            raise CommandError("scheduler-locking on|off")
        return "scheduler-locking is %s" % arg

    def _cmd_checkpoint(self, arg):
        ckpt = self.take_checkpoint()
        return "checkpoint %d taken at gstep %d" % (ckpt, self.vm.gstep)

    def _cmd_reverse_step(self, arg):
        self.reverse_step()
        return self._where()

    def _cmd_reverse_next(self, arg):
        self.reverse_next()
        return self._where()

    def _cmd_reverse_finish(self, arg):
        self.reverse_finish()
        return self._where()

    def _cmd_reverse_continue(self, arg):
        self.reverse_continue()
        return self._where()

    def _cmd_reverse_watch(self, arg):
        from .search import reverse_watch
        if not arg:
            arg = self.watch_expr
        if not arg:
            raise CommandError("fred-reverse-watch needs an expression")
        report = reverse_watch(self, arg, progress=self.search_progress)
        self.last_report = report
        return report.render()

    def _cmd_info(self, arg):
        if arg == "threads":
            out = []
            for t in self.vm.threads:
                loc = self.vm.thread_loc(t.tid)
                out.append("%s tid %d  %-8s %s" % (
                    "*" if t.tid == self.focus else " ", t.tid, t.status,
                    loc if loc else ""))
            return "\n".join(out)
        if arg == "breakpoints":
            return "\n".join("%d: %s:%d" % (i, self.program.filename, ln)
                             for i, ln in sorted(self.breakpoints.items()))
        if arg == "checkpoints":
            return "\n".join("%d: gstep %d %s" % (im.ckpt_id, im.position.gstep,
                                                  im.label)
                             for im in self.store.images)
        if arg == "history":
            return " ".join(self.effective_history())
        raise CommandError("info threads|breakpoints|checkpoints|history")

    def _require_running(self):
        if not self.started:
            raise CommandError("program is not running; use run")
        if self.ended and self.phase == "record":
            raise CommandError("program has ended (%s)" % self.end_reason)

    # ------------------------------------------------------------------
    # movement engine
    # ------------------------------------------------------------------
    def _on_completed(self, out):
        """Bookkeeping common to every completed step in record phase."""
        if out.tid == 0:
            self.slice_gsteps.append(self.vm.gstep)
        if (self.auto_ckpt and self.phase == "record"
                and self.vm.gstep % self.auto_ckpt == 0):
            self.take_checkpoint(label="intermediate")

    def _stop_text(self, out):
        if out.reason == "program-exit":
            return "Program exited"
        if out.reason == "fault":
            loc = out.loc or (self.vm.thread_loc(out.tid) if out.tid is not None else None)
            return "Program received fault: %s\n  tid %s at %s" % (
                out.detail, out.tid, loc)
        if out.reason == "blocked":
            return "Thread %d blocked (%s)" % (out.tid, out.detail)
        loc = self.vm.thread_loc(out.tid)
        if loc is not None and loc.line in self._bp_lines():
            return "Breakpoint hit, tid %d at %s" % (out.tid, loc)
        return "tid %d at %s" % (out.tid, loc)

    def _mark_end(self, out):
        if self.phase == "record":
            self.ended = True
            self.end_reason = out.reason
            self.fault_detail = out.detail
            self.record_end = self.vm.gstep

    def _drive_until_stop(self, max_steps=None):
        """continue/run: step until breakpoint, fault, or exit."""
        bp_lines = self._bp_lines()
        record = self.phase == "record"
        # run/continue never need a per-step profile (they expand to plain
        # steps), so skip collecting one; it can reach millions of entries.
        profile = None
        n = 0
        while True:
            if not record and self.vm.gstep >= self.record_end:
                return profile, "End of recorded history", None
            out = self.vm.step()
            if out.reason == "completed":
                n += 1
                if record:
                    self._on_completed(out)
                th = self.vm.threads[out.tid]
                if th.status == "runnable" and bp_lines:
                    loc = self.vm.thread_loc(out.tid)
                    if loc is not None and loc.line in bp_lines:
                        return profile, self._stop_text(out), out
                if max_steps is not None and n >= max_steps:
                    return profile, self._stop_text(out), out
            elif out.reason == "blocked":
                if self.sched_lock:
                    return profile, self._stop_text(out), out
                # free mode: the blocked attempt descheduled the thread; retry
            else:  # fault or program-exit
                self._mark_end(out)
                return profile, self._stop_text(out), out

    def _drive_focus(self, over_calls=False, until_depth=None):
        """step/next/finish: run until the focus thread completes a statement
        satisfying the depth condition.  Other threads may run in between
        (free mode) or not at all (scheduler locking)."""
        bp_lines = self._bp_lines()
        record = self.phase == "record"
        tid = self.focus
        d0 = len(self.vm.threads[tid].frames)
        if until_depth is None:
            until_depth = d0 if over_calls else None
        profile = []
        while True:
            if not record and self.vm.gstep >= self.record_end:
                return profile, "End of recorded history", None
            out = self.vm.step()
            if out.reason == "completed":
                if record:
                    self._on_completed(out)
                if out.tid == tid:
                    profile.append((self.vm.gstep, out.depth_before, out.depth_after))
                    if until_depth is None or out.depth_after <= until_depth:
                        return profile, self._stop_text(out), out
                    if out.depth_after == 0:  # focus thread exited
                        return profile, self._stop_text(out), out
                if bp_lines and self.vm.threads[out.tid].status == "runnable":
                    loc = self.vm.thread_loc(out.tid)
                    if loc is not None and loc.line in bp_lines:
                        return profile, self._stop_text(out), out
            elif out.reason == "blocked":
                if self.sched_lock:
                    return profile, self._stop_text(out), out
            else:
                self._mark_end(out)
                return profile, self._stop_text(out), out

    def _move(self, verb, result):
        """Record a movement command into the effective history."""
        profile, text, out = result
        if self.phase == "record":
            g1 = self.vm.gstep
            g0 = self.moves[-1]["g1"] if self.moves else 0
            keep = verb in ("next", "step", "finish")
            self.moves.append({"verb": verb, "g0": g0, "g1": g1,
                               "d0": profile[0][1] if (keep and profile) else None,
                               "profile": profile if keep else None})
        return text

    def _where(self):
        loc = self.vm.thread_loc(self.focus)
        return "#gstep %d, tid %d at %s" % (self.vm.gstep, self.focus, loc)

    # ------------------------------------------------------------------
    # history decomposition and reverse commands
    # ------------------------------------------------------------------
    def effective_history(self):
        """Current effective command history, unit-expanded by reversals."""
        return [m["verb"] for m in self.moves]

    @staticmethod
    def _decompose_next(move):
        """[step, next*, step] units for a recorded next/finish, per its
        recorded call structure; a plain statement stays a single step.
        Each unit is (verb, end_gstep)."""
        profile = move["profile"]
        d0 = move["d0"]
        if len(profile) <= 1:
            return [("step", g) for g, _, _ in profile]
        units = [("step", profile[0][0])]
        i = 1
        while i < len(profile) - 1:
            j = i
            while profile[j][2] > d0 + 1 and j < len(profile) - 2:
                j += 1
            units.append(("next", profile[j][0]))
            i = j + 1
        units.append(("step", profile[-1][0]))
        return units

    def _expand_move(self, move):
        """Expand one movement item into step-level units."""
        verb = move["verb"]
        if verb in ("run", "continue"):
            return [("step", g) for g in range(move["g0"] + 1, move["g1"] + 1)]
        if verb == "step":
            return [("step", move["g1"])]
        return self._decompose_next(move)

    def expand_history(self, lo=0, hi=None):
        """Step-level expansion of moves[lo:hi] (unit verbs and end gsteps)."""
        units = []
        for m in self.moves[lo:hi if hi is not None else len(self.moves)]:
            units.extend(self._expand_move(m))
        return units

    def _units_to_moves(self, units, g0, profile=None):
        out = []
        for verb, g1 in units:
            sub = None
            d0 = None
            if verb == "next" and profile is not None:
                # Keep the slice of the parent depth profile so the unit
                # can itself be decomposed by a later reverse-step.
                sub = [p for p in profile if g0 < p[0] <= g1]
                d0 = sub[0][1] if sub else None
            out.append({"verb": verb, "g0": g0, "g1": g1, "d0": d0,
                        "profile": sub})
            g0 = g1
        return out

    def reverse_step(self):
        if not self.moves:
            raise AtSessionStart("already at the start of history")
        self._finish_recording()
        last = self.moves[-1]
        units = self._expand_move(last)
        if len(units) <= 1:
            self.moves.pop()
        else:
            self.moves[-1:] = self._units_to_moves(units[:-1], last["g0"],
                                                   last["profile"])
        self.replay_to(self.moves[-1]["g1"] if self.moves else 0)

    def reverse_next(self):
        if not self.moves:
            raise AtSessionStart("already at the start of history")
        self._finish_recording()
        self.moves.pop()
        self.replay_to(self.moves[-1]["g1"] if self.moves else 0)

    def reverse_finish(self):
        if not self.moves:
            raise AtSessionStart("already at the start of history")
        d0 = len(self.vm.threads[self.focus].frames)
        if d0 <= 1:
            raise CommandError("cannot reverse-finish the outermost frame")
        while len(self.vm.threads[self.focus].frames) >= d0:
            self.reverse_step()
            if not self.moves:
                break

    def reverse_continue(self):
        if not self.moves:
            raise AtSessionStart("already at the start of history")
        self._finish_recording()
        while self.moves:
            m = self.moves.pop()
            if m["verb"] in ("continue", "run"):
                break
        self.replay_to(self.moves[-1]["g1"] if self.moves else 0)

    def _finish_recording(self):
        """First travel backward ends the record phase at the current point."""
        if self.phase == "record":
            self.record_end = self.vm.gstep
            self.phase = "replay"

    # ------------------------------------------------------------------
    # checkpoints and time travel
    # ------------------------------------------------------------------
    def current_position(self):
        gstep = self.vm.gstep
        anchor = self.store.latest_at_or_before(gstep)
        hidx = sub = 0
        for i, m in enumerate(self.moves):
            if m["g1"] < gstep:
                continue
            hidx = i
            sub = gstep - m["g0"]
            break
        else:
            hidx = len(self.moves)
            sub = gstep - (self.moves[-1]["g1"] if self.moves else 0)
        seqno = self.log.replay_cursor if self.vm.mode == "replay" else len(self.log)
        return TimePosition(gstep, anchor.ckpt_id if anchor else -1, hidx, sub, seqno)

    def take_checkpoint(self, label="", value="unknown"):
        existing = self.store.at_gstep(self.vm.gstep)
        if existing is not None:
            return existing.ckpt_id
        t0 = time.perf_counter()
        img = CheckpointImage(len(self.store.images), self.vm.to_doc(),
                              self.current_position(), label=label, value=value)
        self.store.add(img)
        self.ckpt_wall += time.perf_counter() - t0
        return img.ckpt_id

    def restore(self, ckpt_id):
        img = self.store.get(ckpt_id)
        self._restore_image(img)
        return img

    def _restore_image(self, img):
        self._finish_recording()
        t0 = time.perf_counter()
        vm = VM.from_doc(self.program, img.vm_doc)
        vm.log = self.log
        vm.mode = "replay"
        self.log.replay_cursor = img.position.event_seqno
        self.vm = vm
        if self.sched_lock:
            vm.locked_tid = self.focus
        self.restarts += 1
        self.restore_wall += time.perf_counter() - t0

    def replay_to(self, gstep, leg_image=True):
        """Position the session at exactly `gstep` of the recorded timeline."""
        self._finish_recording()
        if gstep > self.record_end:
            raise TargetBeyondHistory("gstep %d beyond recorded end %d"
                                      % (gstep, self.record_end))
        if self.vm.gstep == gstep and self.vm.mode in ("record", "replay"):
            return  # detached states are off-script and must be restored
        img = self.store.latest_at_or_before(gstep)
        if img is None:
            raise TargetBeyondHistory("no checkpoint at or before gstep %d" % gstep)
        self._restore_image(img)
        leg = gstep - self.vm.gstep
        mid = self.vm.gstep + leg // 2 if (leg_image and leg >= MIN_LEG_FOR_IMAGE) else None
        vm = self.vm
        counts = self.exec_counts
        counting = self.count_execs
        while vm.gstep < gstep:
            g = vm.gstep
            out = vm.step()
            if out.reason == "completed":
                if counting:
                    counts[g] = counts.get(g, 0) + 1
                if mid is not None and vm.gstep == mid:
                    self.take_checkpoint(label="intermediate")
            elif out.reason in ("fault", "program-exit"):
                if vm.gstep < gstep:
                    raise TargetBeyondHistory(
                        "replay ended (%s) at gstep %d before target %d"
                        % (out.reason, vm.gstep, gstep))

    # ------------------------------------------------------------------
    # expression evaluation
    # ------------------------------------------------------------------
    def evaluate(self, expr):
        """Evaluate a watch expression (text or compiled AST) right now."""
        ast = compile_watch(expr) if isinstance(expr, str) else expr
        res = evaluate(self.vm, ast, tid=0)
        if not res.ok and self.strict_eval:
            raise EvalError(res.reason, "strict evaluation mode")
        return res

    # ------------------------------------------------------------------
    # search support
    # ------------------------------------------------------------------
    def slices_between(self, g_lo, g_hi):
        """tid-0 statement-completion boundaries inside [g_lo, g_hi].

        These are the expanded-step units the history search bisects over.
        If tid 0 stopped contributing (exited or blocked for the rest of
        the window), fall back to every global step."""
        sg = self.slice_gsteps
        lo = bisect.bisect_left(sg, g_lo)
        hi = bisect.bisect_right(sg, g_hi)
        sl = sg[lo:hi]
        if len(sl) >= 2 and sl[0] == g_lo and sl[-1] == g_hi:
            return sl
        return list(range(g_lo, g_hi + 1))
