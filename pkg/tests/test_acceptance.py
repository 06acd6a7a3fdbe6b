"""Acceptance gate: one test (and one pass/fail line) per criterion.

Every tolerance here is pinned; none of these bounds may be loosened to
make a red test pass.
"""

import json
import math
import os
import random
import subprocess
import sys
import time

import pytest

from fred.compiler import compile_program
from fred.search import reverse_watch
from fred.session import DebugSession
from fred.vm import HEAP_BASE, VM, WORD
from fred.events import EventLog

from conftest import (CORPUS, ROOT, SYNTH_WATCH, compile_corpus,
                      corpus_manifest, linear_scan_oracle, synth_source)


def announce(name, ok, detail=""):
    line = "ACCEPTANCE %-34s %s" % (name, "PASS" if ok else "FAIL")
    if detail:
        line += "  (%s)" % detail
    print(line)
    assert ok, "%s: %s" % (name, detail)


def bug_cases():
    return [c for c in corpus_manifest() if not c.get("decoy")]


def record_case(case, auto_ckpt=64):
    sess = DebugSession(compile_corpus(case["file"]), seed=case["seed"],
                        auto_ckpt=auto_ckpt)
    sess.execute_command("run")
    return sess


# ----------------------------------------------------------------------
# 1. Corpus localization: exact culprit, agrees with the linear-scan
#    oracle, under 10 seconds per bug.
# ----------------------------------------------------------------------
def test_corpus_localization():
    worst = 0.0
    for case in bug_cases():
        t0 = time.perf_counter()
        sess = record_case(case)
        end = sess.vm.gstep
        report = reverse_watch(sess, case["watch"])
        wall = time.perf_counter() - t0
        worst = max(worst, wall)
        oracle = linear_scan_oracle(sess.program, case["seed"], sess.vm.log,
                                    end, case["watch"])
        want = case["culprit"]
        ok = (report.tid == want["tid"]
              and report.loc.line == want["line"]
              and report.loc.stmt_id == want["stmt_id"]
              and oracle is not None
              and (oracle[0], oracle[1].stmt_id) == (report.tid,
                                                     report.loc.stmt_id)
              and wall < 10.0)
        if not ok:
            announce("corpus-localization", False,
                     "%s: got tid %d %s in %.1fs" % (case["name"], report.tid,
                                                     report.loc, wall))
    announce("corpus-localization", True,
             "%d bugs, worst %.2fs < 10s" % (len(bug_cases()), worst))


# ----------------------------------------------------------------------
# 2. Probe bound: expression evaluations <= log2(N) + 8 on synthetic
#    single-culprit runs at N in {2^12, 2^16, 2^20}; 100/100 trials,
#    under 60 seconds total.
# ----------------------------------------------------------------------
def test_probe_bound():
    trials = [(2 ** 12, 90), (2 ** 16, 8), (2 ** 20, 2)]
    rng = random.Random(20260826)
    t0 = time.perf_counter()
    done = 0
    worst_margin = -99.0
    for n, count in trials:
        budget = math.log2(n) + 8
        half = (n - 8) // 2
        for _ in range(count):
            m1 = rng.randint(1, half - 1)
            m2 = half - m1
            prog = compile_program(synth_source(m1, m2), "synth.fr")
            sess = DebugSession(prog, seed=0, auto_ckpt=int(math.sqrt(n)))
            sess.execute_command("run")
            report = reverse_watch(sess, SYNTH_WATCH)
            evals = report.stats.expr_evals
            if evals > budget:
                announce("probe-bound", False,
                         "N=%d m1=%d: %d evals > %.0f" % (n, m1, evals, budget))
            worst_margin = max(worst_margin, evals - budget)
            done += 1
    wall = time.perf_counter() - t0
    if wall >= 60.0:
        announce("probe-bound", False, "%.1fs >= 60s" % wall)
    announce("probe-bound", True,
             "100/100 trials, worst margin %+.1f evals, %.1fs < 60s"
             % (worst_margin, wall))


# ----------------------------------------------------------------------
# 3. Re-execution bound: with intermediate checkpointing on, no history
#    index is re-executed more than twice during stage B.
# ----------------------------------------------------------------------
def test_reexecution_bound():
    worst = 0
    runs = [("synth-2^16", synth_source(16000, 16760), 0)]
    for case in bug_cases():
        runs.append((case["name"], None, case))
    for name, src, case in runs:
        if src is not None:
            sess = DebugSession(compile_program(src, "synth.fr"),
                                seed=0, auto_ckpt=256)
            sess.execute_command("run")
            watch = SYNTH_WATCH
        else:
            sess = record_case(case)
            watch = case["watch"]
        report = reverse_watch(sess, watch)
        if report.stats.max_exec_count > 2:
            announce("reexecution-bound", False,
                     "%s: max exec count %d > 2" % (name,
                                                    report.stats.max_exec_count))
        worst = max(worst, report.stats.max_exec_count)
    announce("reexecution-bound", True, "max per-index executions %d <= 2" % worst)


# ----------------------------------------------------------------------
# 4. Output determinism: 3 corpus programs x 10 replays each; every
#    replay reproduces the recorded output and final state (30/30).
# ----------------------------------------------------------------------
def test_output_determinism():
    good = 0
    for case in bug_cases():
        prog = compile_corpus(case["file"])
        rec = VM(prog, seed=case["seed"])
        rec.mode = "record"
        rec.log = EventLog()
        while True:
            out = rec.step()
            if out.reason in ("fault", "program-exit"):
                break
        for _ in range(10):
            rep = VM(prog, seed=case["seed"])
            rep.mode = "replay"
            rep.log = rec.log
            rep.log.replay_cursor = 0
            while True:
                out = rep.step()
                if out.reason in ("fault", "program-exit"):
                    break
            if (rep.output == rec.output
                    and rep.state_hash() == rec.state_hash()):
                good += 1
    announce("output-determinism", good == 30, "%d/30 replays identical" % good)


# ----------------------------------------------------------------------
# 5. Memory accuracy: 10^4 allocator operations produce the address
#    sequence predicted by an independent bump-allocator model, and the
#    replayed sequence is identical.
# ----------------------------------------------------------------------
def test_memory_accuracy():
    src = """
fn main() {
    let i = 0;
    while (i < 5000) {
        let sz = (i - (i / 4) * 4) * 8 + 4;
        let p = alloc(sz);
        *(p) = i;
        free(p);
        i = i + 1;
    }
    return 0;
}
"""
    prog = compile_program(src, "mem.fr")
    rec = VM(prog, seed=0)
    rec.mode = "record"
    rec.log = EventLog()
    while True:
        out = rec.step()
        if out.reason in ("fault", "program-exit"):
            break
    assert out.reason == "program-exit"
    allocs = [(ev.payload[0], ev.payload[1]) for ev in rec.log.entries
              if ev.kind == 6]
    frees = [ev for ev in rec.log.entries if ev.kind == 7]
    n_ops = len(allocs) + len(frees)

    # Independent model: bump pointer, word-aligned, minimum one word,
    # never reused.
    addr = HEAP_BASE
    predicted = []
    for size, _ in allocs:
        predicted.append(addr)
        addr += max(1, (size + WORD - 1) // WORD) * WORD
    model_ok = [a for _, a in allocs] == predicted

    rep = VM(prog, seed=0)
    rep.mode = "replay"
    rep.log = rec.log
    rep.log.replay_cursor = 0
    while True:
        out = rep.step()
        if out.reason in ("fault", "program-exit"):
            break
    replay_ok = (rep.heap_bases == rec.heap_bases
                 and rep.state_hash() == rec.state_hash())
    announce("memory-accuracy", model_ok and replay_ok and n_ops >= 10000,
             "%d ops, %d allocs match the bump model" % (n_ops, len(allocs)))


# ----------------------------------------------------------------------
# 6. History decomposition golden: [continue, next, next] followed by
#    one reverse-step becomes [continue, next, step, next] exactly.
# ----------------------------------------------------------------------
def test_decomposition_golden():
    src = """
fn helper(x) {
    let a = x + 1;
    return a;
}

fn main() {
    let u = 1;
    let v = 2;
    let w = helper(v);
    let z = w + u;
    return 0;
}
"""
    sess = DebugSession(compile_program(src, "demo.fr"))
    sess.execute_command("break 8")   # let u
    sess.execute_command("break 9")   # let v
    sess.execute_command("run")       # stops at 8 before moving
    sess.execute_command("continue")  # stops at 9
    sess.execute_command("next")
    sess.execute_command("next")      # over helper()
    before = sess.effective_history()
    sess.execute_command("fred-reverse-step")
    after = sess.effective_history()
    ok = (before[-3:] == ["continue", "next", "next"]
          and after == before[:-3] + ["continue", "next", "step", "next"])
    announce("decomposition-golden", ok, "%s -> %s" % (before, after))


# ----------------------------------------------------------------------
# 7. Restore fidelity: for stores of 1, 10 and 100 images, every restored
#    image's state hash matches an independent linear replay to the same
#    gstep.
# ----------------------------------------------------------------------
def test_restore_fidelity():
    src = synth_source(800, 800)
    checked = 0
    for n in (1, 10, 100):
        prog = compile_program(src, "synth.fr")
        sess = DebugSession(prog, seed=0, auto_ckpt=25)
        sess.execute_command("run")
        images = sess.store.images[:n]
        assert len(images) == n
        # Ground truth: a single fresh replay visiting each gstep in order.
        truth = VM(prog, seed=0)
        truth.mode = "replay"
        truth.log = sess.log
        truth.log.replay_cursor = 0
        for img in images:
            while truth.gstep < img.position.gstep:
                truth.step()
            restored = VM.from_doc(prog, img.vm_doc)
            if restored.state_hash() != truth.state_hash():
                announce("restore-fidelity", False,
                         "n=%d: image at gstep %d diverges"
                         % (n, img.position.gstep))
            checked += 1
    announce("restore-fidelity", True, "%d images match linear replay" % checked)


# ----------------------------------------------------------------------
# 8. Decoy robustness: the variant with a permanently blocked thread
#    still localizes the culprit, skipping the blocked thread within the
#    step budget.
# ----------------------------------------------------------------------
def test_decoy_blocked_thread():
    case = [c for c in corpus_manifest() if c.get("decoy")][0]
    sess = record_case(case)
    blocked = [t.tid for t in sess.vm.threads if t.status == "blocked"]
    assert case["decoy_tid"] in blocked, "decoy thread is not blocked"
    t0 = time.perf_counter()
    report = reverse_watch(sess, case["watch"], budget=10000)
    wall = time.perf_counter() - t0
    want = case["culprit"]
    ok = (report.tid == want["tid"]
          and report.loc.line == want["line"]
          and report.stats.threads_skipped >= 1
          and wall < 10.0)
    announce("decoy-blocked-thread", ok,
             "culprit tid %d, %d thread(s) skipped, %.2fs"
             % (report.tid, report.stats.threads_skipped, wall))


# ----------------------------------------------------------------------
# Bench report shape: the full corpus bench emits one row per bug with
# the canonical column set, all PASS.
# ----------------------------------------------------------------------
def test_bench_table_shape(tmp_path):
    r = subprocess.run(
        [sys.executable, "-m", "fred.cli", "bench", CORPUS,
         "--stats", "bench.json"],
        capture_output=True, text=True, cwd=str(tmp_path), timeout=300)
    doc = json.loads((tmp_path / "bench.json").read_text())
    cols = ("Num Ckpts", "Num Rstr", "Num Expr Eval", "Avg Ckpt", "Avg Rstr")
    ok = (r.returncode == 0
          and all(c in doc["columns"] for c in cols)
          and len(doc["rows"]) == len(corpus_manifest())
          and all(row["Result"] == "PASS" for row in doc["rows"])
          and all(all(c in row for c in cols) for row in doc["rows"]))
    announce("bench-table-shape", ok,
             "%d rows, columns %s" % (len(doc["rows"]), list(cols)))


# ----------------------------------------------------------------------
# [SECONDARY] Web UI round trip: the TypeScript client drives a live
# session over the wire and arrives at the same culprit line as the CLI.
# Skipped (not failed) when the secondary component is absent, so the
# primary suite runs on its own.
# ----------------------------------------------------------------------
def test_secondary_ui_round_trip():
    frontend = os.path.join(ROOT, "frontend")
    script = os.path.join(frontend, "scripts", "roundtrip.mjs")
    if not os.path.exists(script):
        pytest.skip("web-ui secondary component not present")
    if not os.path.exists(os.path.join(frontend, "node_modules")):
        pytest.skip("web-ui dependencies not installed")

    case = [c for c in corpus_manifest() if c["name"] == "pbzip_order"][0]
    from fred.server import serve
    sess = record_case(case)
    # CLI-side golden: the search result rendered locally.
    golden = DebugSession(compile_corpus(case["file"]), seed=case["seed"],
                          auto_ckpt=64)
    golden.execute_command("run")
    golden_line = reverse_watch(golden, case["watch"]).loc.line

    srv = serve(sess, "127.0.0.1:0")
    try:
        r = subprocess.run(
            ["node", script, "--port", str(srv.port),
             "--watch", case["watch"]],
            capture_output=True, text=True, timeout=120)
        ok = r.returncode == 0
        doc = json.loads(r.stdout) if ok else {}
        ok = ok and doc.get("culprit_line") == golden_line
        ok = ok and doc.get("windows_monotone") is True
        announce("secondary-ui-round-trip", ok,
                 "ui line %r == cli line %r" % (doc.get("culprit_line"),
                                                golden_line))
    finally:
        srv.stop()
