import json
import os

import pytest

from fred.compiler import compile_program
from fred.session import DebugSession

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CORPUS = os.path.join(ROOT, "corpus")


def corpus_manifest():
    with open(os.path.join(CORPUS, "manifest.json")) as f:
        return json.load(f)["cases"]


def compile_corpus(name):
    path = os.path.join(CORPUS, name)
    with open(path) as f:
        return compile_program(f.read(), path)


def make_session(source, filename="<test>", **kw):
    return DebugSession(compile_program(source, filename), **kw)


def synth_source(m1, m2):
    """Single-threaded program: m1 loop iterations, the culprit statement,
    then m2 more iterations, ending in a fault.  Statement count is
    about 2*(m1+m2) + 8."""
    return """
let x = 0;

fn main() {
    let i = 0;
    while (i < %d) {
        i = i + 1;
    }
    x = 1;
    let j = 0;
    while (j < %d) {
        j = j + 1;
    }
    let p = 0;
    *(p) = 1;
    return 0;
}
""" % (m1, m2)


SYNTH_WATCH = "x == 1"
SYNTH_CULPRIT_LINE = 9          # `x = 1;` in synth_source


def linear_scan_oracle(program, seed, log, end_gstep, expr_text, focus=0):
    """Reference localization: replay the whole recorded run one statement
    at a time, evaluating the watched expression after every statement, and
    report the first completed statement whose execution flips the value
    away from the initial one.  Returns (tid, loc, pre_gstep, evals).

    Independent of the binary search: no checkpoints, no bisection."""
    from fred.vm import VM
    from fred.watch import compile_watch, evaluate

    ast = compile_watch(expr_text)

    def observe(vm):
        res = evaluate(vm, ast, focus)
        return ("error", res.reason) if not res.ok else ("value", res.truthy())

    vm = VM(program, seed)
    vm.mode = "replay"
    vm.log = log
    saved_cursor = log.replay_cursor
    log.replay_cursor = 0
    try:
        baseline = observe(vm)
        evals = 1
        while vm.gstep < end_gstep:
            pre = vm.gstep
            out = vm.step()
            if out.reason not in ("completed", "fault", "program-exit"):
                continue
            evals += 1
            if observe(vm) != baseline:
                return out.tid, out.loc, pre, evals
            if out.reason in ("fault", "program-exit"):
                break
        return None
    finally:
        log.replay_cursor = saved_cursor


@pytest.fixture
def demo_call_session():
    """Session stopped mid-main with a helper call ahead (decomposition
    golden scenario)."""
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
    return make_session(src, "demo.fr")
