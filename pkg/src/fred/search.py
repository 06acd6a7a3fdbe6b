"""Reverse expression watchpoints: the four-stage binary search.

Given a watched boolean expression that is bad "now" and good at some
earlier checkpoint, find the single (thread, statement) whose execution
flips it, using at most about log2(N) expression evaluations for a
lifetime of N statements:

  stage A  bisect the checkpoint images for the last good / first bad pair;
  stage B  bisect the expanded debugger steps between them, checkpointing
           at every good midpoint (progress condition) so the left endpoint
           always owns an image;
  stage C  bisect the event-log range of the flipping step (skipped for
           single-threaded targets or steps with no events);
  stage D  scheduler-locking endgame: round-robin over live threads, for
           each candidate do repeated next until the flip, re-run the last
           next with scheduler locking to verify, descend with step to the
           exact statement, and rotate away from threads that cannot make
           progress or fail verification.

Expression evaluations at on-script (recorded-timeline) positions are
cached by gstep; only cache misses count toward the probe budget.
"""

import time

from .errors import (NoCulpritFound, NoGoodAnchor, PreconditionNotBad,
                     SearchError)
from .watch import compile_watch


class SearchWindow:
    __slots__ = ("left", "right", "granularity")

    def __init__(self, left, right, granularity):
        self.left = left          # gstep, expression good
        self.right = right        # gstep, expression bad
        self.granularity = granularity

    @property
    def size(self):
        return self.right - self.left

    def __repr__(self):
        return "SearchWindow(%d, %d, %s)" % (self.left, self.right, self.granularity)


class SearchStats:
    def __init__(self):
        self.n_statements = 0
        self.expr_evals = 0
        self.checkpoints = 0
        self.restarts = 0
        self.max_exec_count = 0
        self.probes = {"A": 0, "B": 0, "C": 0, "D": 0}
        self.wall = {"A": 0.0, "B": 0.0, "C": 0.0, "D": 0.0}
        self.threads_skipped = 0

    def to_doc(self):
        return {
            "n_statements": self.n_statements,
            "expr_evals": self.expr_evals,
            "checkpoints": self.checkpoints,
            "restarts": self.restarts,
            "max_exec_count": self.max_exec_count,
            "probes": dict(self.probes),
            "wall": {k: round(v, 6) for k, v in self.wall.items()},
            "threads_skipped": self.threads_skipped,
        }


class TransitionReport:
    def __init__(self, tid, loc, pre_position, value_before, value_after,
                 expr_text, stats):
        self.tid = tid
        self.loc = loc
        self.pre_position = pre_position
        self.value_before = value_before
        self.value_after = value_after
        self.expr_text = expr_text
        self.stats = stats

    def render(self):
        return "\n".join([
            "reverse-watch: transition found",
            "  culprit: tid %d at %s" % (self.tid, self.loc),
            "  watched: %s" % self.expr_text,
            "  before: %r (good)  after: %r (bad)" % (self.value_before,
                                                      self.value_after),
            "  position: gstep %d" % self.pre_position.gstep,
            "  stats: N=%d evals=%d ckpts=%d restarts=%d" % (
                self.stats.n_statements, self.stats.expr_evals,
                self.stats.checkpoints, self.stats.restarts),
        ])

    def to_doc(self):
        return {
            "tid": self.tid,
            "file": self.loc.file,
            "line": self.loc.line,
            "stmt_id": self.loc.stmt_id,
            "pre_gstep": self.pre_position.gstep,
            "value_before": self.value_before,
            "value_after": self.value_after,
            "expr": self.expr_text,
            "stats": self.stats.to_doc(),
        }


class _Searcher:
    def __init__(self, session, expr_text, bad_when=None, progress=None,
                 budget=10000):
        self.session = session
        self.expr_text = expr_text
        self.ast = compile_watch(expr_text)
        self.bad_when = bad_when
        self.progress_cb = progress
        self.budget = budget
        self.stats = SearchStats()
        self.cache = {}               # on-script gstep -> (res, is_bad)
        self.error_is_bad = None      # set at calibration

    # -- evaluation ------------------------------------------------------
    def _classify(self, res):
        if not res.ok:
            return True               # eval-error counts as bad by default
        if self.error_is_bad:
            return False              # calibrated: bad means eval-error
        return res.truthy() == self.bad_truth

    def eval_here(self, stage):
        """Evaluate at the session's current (on-script) position."""
        g = self.session.vm.gstep
        if g in self.cache:
            return self.cache[g]
        res = self.session.evaluate(self.ast)
        self.stats.expr_evals += 1
        self.stats.probes[stage] += 1
        entry = (res, self._classify(res))
        self.cache[g] = entry
        return entry

    def eval_at(self, gstep, stage):
        if gstep in self.cache:
            return self.cache[gstep]
        self.session.replay_to(gstep)
        return self.eval_here(stage)

    def eval_detached(self, stage):
        """Evaluate at an off-script position (never cached)."""
        res = self.session.evaluate(self.ast)
        self.stats.expr_evals += 1
        self.stats.probes[stage] += 1
        return res, self._classify(res)

    def progress(self, stage, window):
        if self.progress_cb is not None:
            self.progress_cb({"stage": stage, "left": window.left,
                              "right": window.right, "size": window.size,
                              "granularity": window.granularity,
                              "probes": self.stats.expr_evals})

    # -- orchestration ---------------------------------------------------
    def run(self):
        session = self.session
        session._finish_recording()
        g_bad = session.vm.gstep
        self.stats.n_statements = session.record_end

        # Calibration: by default the value observed right now defines
        # "bad"; an explicit bad_when instead asserts the current polarity.
        session.replay_to(g_bad)
        res = session.evaluate(self.ast)
        self.stats.expr_evals += 1
        if not res.ok:
            self.error_is_bad = True
            self.bad_truth = None
        else:
            self.error_is_bad = False
            if self.bad_when is not None and res.truthy() != self.bad_when:
                raise PreconditionNotBad(
                    "expression is %s at the current position, expected the "
                    "bad value %s" % (res.truthy(), self.bad_when),
                    stage="calibration")
            self.bad_truth = res.truthy()
        self.cache[g_bad] = (res, True)

        restarts0 = session.restarts
        ckpts0 = len(session.store.images)

        t0 = time.perf_counter()
        window = self.search_ckpts(g_bad)
        self.stats.wall["A"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        window = self.search_debug_history(window)
        self.stats.wall["B"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        window = self.search_event_log(window)
        self.stats.wall["C"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        report = self.local_search(window)
        self.stats.wall["D"] = time.perf_counter() - t0

        self.stats.restarts = session.restarts - restarts0
        self.stats.checkpoints = len(session.store.images) - ckpts0
        if session.exec_counts:
            self.stats.max_exec_count = max(session.exec_counts.values())
        session.replay_to(report.pre_position.gstep)
        return report

    # -- stage A ---------------------------------------------------------
    def search_ckpts(self, g_bad):
        images = [im for im in self.session.store.images
                  if im.position.gstep <= g_bad]
        if not images:
            raise NoGoodAnchor("no checkpoint images exist", stage="A")
        _, bad0 = self.eval_at(images[0].position.gstep, "A")
        if bad0:
            raise NoGoodAnchor(
                "every checkpoint image evaluates bad (oldest is bad)",
                stage="A")
        # Boundary points: image gsteps plus the current (bad) position.
        points = [im.position.gstep for im in images]
        if points[-1] != g_bad:
            points.append(g_bad)
        lo, hi = 0, len(points) - 1      # lo good, hi bad
        while hi - lo > 1:
            mid = (lo + hi) // 2
            _, is_bad = self.eval_at(points[mid], "A")
            if is_bad:
                hi = mid
            else:
                lo = mid
            self.progress("A", SearchWindow(points[lo], points[hi], "checkpoint"))
        window = SearchWindow(points[lo], points[hi], "checkpoint")
        self.progress("A", window)
        return window

    # -- stage B ---------------------------------------------------------

    # Windows up to this many expanded steps get an image at every step in
    # one densifying pass, after which every bisection probe is a pure
    # restore, so no step is executed more than twice during this stage
    # (once in the pass, and never again).  The auto-checkpoint interval
    # keeps stage-A windows below this at the defaults.
    DENSE_LIMIT = 4096

    def _densify(self, slices):
        """Replay the window once, imaging every expanded-step boundary."""
        session = self.session
        session.replay_to(slices[0], leg_image=False)
        vm = session.vm
        counts = session.exec_counts
        i = 1
        while vm.gstep < slices[-1]:
            g = vm.gstep
            out = vm.step()
            if out.reason == "completed":
                counts[g] = counts.get(g, 0) + 1
                if vm.gstep == slices[i]:
                    if i < len(slices) - 1:
                        session.take_checkpoint(label="intermediate")
                    i += 1
            elif out.reason in ("fault", "program-exit"):
                break

    def search_debug_history(self, window):
        session = self.session
        slices = session.slices_between(window.left, window.right)
        session.exec_counts = {}
        session.count_execs = True
        try:
            if 2 < len(slices) <= self.DENSE_LIMIT:
                self._densify(slices)
            lo, hi = 0, len(slices) - 1
            while hi - lo > 1:
                mid = (lo + hi) // 2
                _, is_bad = self.eval_at(slices[mid], "B")
                if is_bad:
                    hi = mid
                else:
                    # Progress condition: the left endpoint always owns an
                    # image, so later iterations replay short legs only.
                    session.take_checkpoint(label="intermediate", value="good")
                    lo = mid
                self.progress("B", SearchWindow(slices[lo], slices[hi], "step"))
        finally:
            session.count_execs = False
        window = SearchWindow(slices[lo], slices[hi], "step")
        self.progress("B", window)
        return window

    # -- stage C ---------------------------------------------------------
    def search_event_log(self, window):
        session = self.session
        session.replay_to(window.right)
        if len(session.vm.threads) == 1:
            return window          # single-threaded: the algorithm stops here
        session.replay_to(window.left)
        e_l = session.log.replay_cursor
        session.replay_to(window.right)
        e_r = session.log.replay_cursor
        if e_r - e_l <= 1:
            return window          # empty or singleton event range
        pos = {e_l: window.left, e_r: window.right}

        def pos_for(e):
            if e not in pos:
                session.replay_to(window.left)
                vm = session.vm
                while session.log.replay_cursor < e and vm.gstep < window.right:
                    vm.step()
                pos[e] = vm.gstep
            return pos[e]

        lo, hi = e_l, e_r
        while hi - lo > 1:
            mid = (lo + hi) // 2
            _, is_bad = self.eval_at(pos_for(mid), "C")
            if is_bad:
                hi = mid
            else:
                lo = mid
            self.progress("C", SearchWindow(pos_for(lo), pos_for(hi), "event"))
        window = SearchWindow(pos_for(lo), pos_for(hi), "event")
        self.progress("C", window)
        return window

    # -- stage D ---------------------------------------------------------
    def _locked_vm(self, gstep, tid):
        """Restore to gstep and switch the VM to off-script locked stepping."""
        self.session.replay_to(gstep)
        vm = self.session.vm
        vm.mode = "detached"
        vm.locked_tid = tid
        return vm

    def local_search(self, window):
        session = self.session
        g_l, g_r = window.left, window.right
        session.replay_to(g_l)
        candidates = [t.tid for t in session.vm.threads if t.status != "exited"]
        skipped = []
        for t in candidates:
            found = self._try_thread(t, g_l, g_r, skipped)
            if found is not None:
                self.stats.threads_skipped = len(set(skipped))
                return found
        self.stats.threads_skipped = len(set(skipped))
        raise NoCulpritFound(
            "no thread's locked re-execution flips the expression in "
            "window [%d, %d] (skipped: %s)" % (g_l, g_r, skipped), stage="D")

    def _try_thread(self, t, g_l, g_r, skipped):
        session = self.session
        # Sub-step 1: repeated next in the candidate thread (free replay),
        # evaluating after each, until the expression changes.
        session.replay_to(g_l)
        vm = session.vm
        prev_g = g_l
        flip = False
        completed = 0
        while vm.gstep < g_r:
            out = vm.step()
            if out.reason in ("fault", "program-exit"):
                break
            if out.reason != "completed" or out.tid != t:
                continue
            completed += 1
            _, is_bad = self.eval_here("D")
            if is_bad:
                flip = True
                break
            prev_g = vm.gstep
        if not flip:
            if completed == 0 and vm.threads[t].status == "blocked":
                skipped.append(t)  # blocked across the whole window
            return None

        # Sub-step 2: re-run the last next with scheduler locking to check
        # that this thread's execution alone causes the flip.
        vm = self._locked_vm(prev_g, t)
        d0 = len(vm.threads[t].frames)
        steps = 0
        while True:
            out = vm.step()
            if out.reason == "blocked":
                skipped.append(t)      # cannot make progress; rotate
                return None
            if out.reason in ("fault", "program-exit"):
                return None
            if out.reason == "completed" and out.tid == t and out.depth_after <= d0:
                break
            steps += 1
            if steps > self.budget:
                # Livelock-style non-progress; the lock table already gives
                # true blocking a fast path above.  Skip this thread.
                skipped.append(t)
                return None
        _, is_bad = self.eval_detached("D")
        if not is_bad:
            return None                # another thread is responsible

        # Sub-step 3: descend with step granularity to the exact statement.
        vm = self._locked_vm(prev_g, t)
        culprit_loc = None
        steps = 0
        while culprit_loc is None:
            out = vm.step()
            if out.reason in ("blocked", "fault", "program-exit"):
                return None
            if out.reason != "completed":
                continue
            steps += 1
            if steps > self.budget:
                skipped.append(t)
                return None
            _, is_bad = self.eval_detached("D")
            if is_bad:
                culprit_loc = out.loc

        # Locate the same execution on the recorded timeline for the report.
        session.replay_to(prev_g)
        vm = session.vm
        pre_g = None
        while vm.gstep < g_r and pre_g is None:
            g = vm.gstep
            out = vm.step()
            if (out.reason == "completed" and out.tid == t
                    and out.loc.stmt_id == culprit_loc.stmt_id):
                _, is_bad = self.eval_here("D")
                if is_bad:
                    pre_g = g
        if pre_g is None:
            return None

        # Validity check: good just before, bad after one locked step.
        res_before, bad_before = self.eval_at(pre_g, "D")
        vm = self._locked_vm(pre_g, t)
        out = vm.step()
        res_after, bad_after = self.eval_detached("D")
        if bad_before or not bad_after:
            raise SearchError(
                "transition report failed validation at gstep %d" % pre_g,
                stage="D")
        session.replay_to(pre_g)
        return TransitionReport(
            t, culprit_loc, session.current_position(),
            res_before.value if res_before.ok else "<eval-error: %s>" % res_before.reason,
            res_after.value if res_after.ok else "<eval-error: %s>" % res_after.reason,
            self.expr_text, self.stats)


def reverse_watch(session, expr_text, bad_when=None, progress=None, budget=10000):
    """Run the full reverse-expression-watchpoint search on a session.

    Leaves the session positioned just before the culprit statement and
    returns a TransitionReport."""
    return _Searcher(session, expr_text, bad_when=bad_when, progress=progress,
                     budget=budget).run()
