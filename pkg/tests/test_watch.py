"""Watch expression compilation and evaluation tests."""

import pytest

from fred.errors import EvalError
from fred.watch import compile_watch, evaluate

from conftest import make_session


def session_at_break(src, line, filename="<test>"):
    sess = make_session(src, filename)
    sess.execute_command("break %d" % line)
    sess.execute_command("run")
    return sess


SRC = """
struct Box { val; next; }

let g = 5;

fn main() {
    let x = 3;
    let b = new Box;
    b.val = 40;
    let p = alloc(8);
    *(p) = 11;
    let stop = 0;
    return 0;
}
"""


@pytest.fixture
def sess():
    return session_at_break(SRC, 12)   # at `let stop = 0;`


def ev(sess, text):
    return evaluate(sess.vm, compile_watch(text), 0)


class TestCompile:
    @pytest.mark.parametrize("text", [
        "x + 1", "g == 5", "b.val > 10", "*(p) == 11", "x < 2 || g > 1",
        "x != 0 && b.val == 40",
    ])
    def test_pure_expressions_accepted(self, text):
        assert compile_watch(text) is not None

    @pytest.mark.parametrize("text", [
        "alloc(8)", "rand() > 0", "clock()", "mutex() == 0", "f(1)",
        "spawn f()", "input()",
    ])
    def test_impure_expressions_rejected(self, text):
        with pytest.raises(EvalError):
            compile_watch(text)


class TestEvaluate:
    def test_locals_and_globals(self, sess):
        assert ev(sess, "x").value == 3
        assert ev(sess, "g").value == 5
        assert ev(sess, "x + g").value == 8

    def test_struct_field(self, sess):
        assert ev(sess, "b.val").value == 40

    def test_deref(self, sess):
        assert ev(sess, "*(p)").value == 11

    def test_comparison_and_logic(self, sess):
        assert ev(sess, "x == 3 && g == 5").value is True
        assert ev(sess, "x == 4 || g == 6").value is False

    def test_nil_compares_as_zero(self, sess):
        assert ev(sess, "b.next == 0").value is True

    def test_short_circuit_suppresses_error(self, sess):
        # b.next is nil; the deref would error but must not be reached.
        res = ev(sess, "b.next != 0 && *(b.next) == 1")
        assert res.ok and res.value is False

    def test_unknown_name_is_eval_error(self, sess):
        res = ev(sess, "nosuch == 1")
        assert not res.ok
        assert "nosuch" in res.reason

    def test_nil_deref_is_eval_error(self, sess):
        res = ev(sess, "*(b.next)")
        assert not res.ok

    def test_division_by_zero_is_eval_error(self, sess):
        res = ev(sess, "x / (g - 5)")
        assert not res.ok

    def test_freed_read_is_eval_error(self):
        sess = session_at_break("""
fn main() {
    let p = alloc(8);
    free(p);
    let stop = 0;
    return 0;
}
""", 5)
        res = ev(sess, "*(p)")
        assert not res.ok
        assert "freed" in res.reason

    def test_truthy(self, sess):
        assert ev(sess, "x").truthy() is True
        assert ev(sess, "x - 3").truthy() is False


def test_strict_eval_session_raises():
    sess = make_session(SRC, strict_eval=True)
    sess.execute_command("run")
    with pytest.raises(EvalError):
        sess.execute_command("print nosuch")
