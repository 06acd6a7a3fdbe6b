"""Parser and compiler tests."""

import pytest

from fred.compiler import compile_program
from fred.errors import CompileError, FrSyntaxError
from fred.lang import parse_expression, parse_source


def compile_src(src):
    return compile_program(src, "<test>")


MINIMAL = """
fn main() {
    return 0;
}
"""


def test_minimal_program_compiles():
    prog = compile_src(MINIMAL)
    assert [f.name for f in prog.functions] == ["main"]


def test_missing_main_rejected():
    with pytest.raises(CompileError, match="main"):
        compile_src("fn other() { return 0; }")


def test_duplicate_function_rejected():
    with pytest.raises(CompileError, match="duplicate"):
        compile_src("fn main() { return 0; }\nfn main() { return 1; }")


def test_struct_and_globals():
    prog = compile_src("""
struct Pair { a; b; }
let g = 41;
fn main() { return g; }
""")
    assert prog.structs["Pair"] == ["a", "b"]
    assert prog.globals["g"] == 41
    assert prog.global_order == ["g"]


def test_global_initializer_must_be_constant():
    with pytest.raises(FrSyntaxError):
        compile_src("let g = 1 + 2;\nfn main() { return 0; }")


def test_syntax_error_carries_line():
    with pytest.raises(FrSyntaxError) as exc:
        compile_src("fn main() {\n    let x = ;\n}")
    assert "2" in str(exc.value)


def test_unknown_variable_rejected():
    with pytest.raises(CompileError, match="nope"):
        compile_src("fn main() { return nope; }")


class TestLoggedPlacement:
    """alloc/input/clock/rand/spawn/new/mutex/list may only appear as the
    whole right-hand side of an assignment or as a bare statement."""

    @pytest.mark.parametrize("expr", [
        "alloc(8) + 1", "1 + clock()", "rand() * 2", "mutex() == 0",
        "f(alloc(8))",
    ])
    def test_nested_use_rejected(self, expr):
        src = "fn f(a) { return a; }\nfn main() { let x = %s; return 0; }" % expr
        with pytest.raises(CompileError, match="right-hand side|bare statement"):
            compile_src(src)

    @pytest.mark.parametrize("stmt", [
        "let x = alloc(8);", "let x = clock();", "let x = rand();",
        "let m = mutex();", "clock();",
    ])
    def test_whole_rhs_allowed(self, stmt):
        compile_src("fn main() { %s return 0; }" % stmt)

    def test_spawn_whole_rhs(self):
        compile_src("""
fn w() { return 0; }
fn main() { let t = spawn w(); join(t); return 0; }
""")


def test_parse_expression_roundtrip():
    ast = parse_expression("a + b * 2 == 7")
    assert ast is not None


def test_statement_ids_are_dense():
    prog = compile_src("""
fn main() {
    let a = 1;
    let b = 2;
    let c = a + b;
    return c;
}
""")
    ids = [loc.stmt_id for loc in prog.stmt_locs]
    assert ids == list(range(len(ids)))


def test_disassemble_mentions_every_function():
    prog = compile_src("fn f() { return 1; }\nfn main() { return f(); }")
    text = prog.disassemble()
    assert "fn f" in text and "fn main" in text
