"""Lexer and recursive-descent parser for the .fr mini-language.

The AST is plain tuples: ('kind', line, ...).  The same expression grammar
is reused by the watched-expression evaluator (see watch.py), so anything
printable with `print <expr>` is also watchable.
"""

from .errors import FrSyntaxError

KEYWORDS = {
    "fn", "let", "if", "else", "while", "return", "true", "false", "nil",
    "struct", "new", "spawn", "print", "lock", "unlock", "join", "free",
    "append", "alloc", "input", "clock", "rand", "mutex", "list", "len",
}

TWO_CHAR = {"==", "!=", "<=", ">=", "&&", "||"}
ONE_CHAR = set("+-*/%<>!=(){}[];,.&")


class Token:
    __slots__ = ("kind", "value", "line", "col")

    def __init__(self, kind, value, line, col):
        self.kind = kind    # 'int' | 'str' | 'name' | 'kw' | 'punct' | 'eof'
        self.value = value
        self.line = line
        self.col = col

    def __repr__(self):
        return "Token(%s, %r)" % (self.kind, self.value)


def tokenize(text):
    toks = []
    i = 0
    line = 1
    col = 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "/" and i + 1 < n and text[i + 1] == "/":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_col = col
        if c.isdigit():
            j = i
            if c == "0" and i + 1 < n and text[i + 1] in "xX":
                j = i + 2
                while j < n and text[j] in "0123456789abcdefABCDEF":
                    j += 1
                val = int(text[i:j], 16)
            else:
                while j < n and text[j].isdigit():
                    j += 1
                val = int(text[i:j])
            toks.append(Token("int", val, line, start_col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            toks.append(Token("kw" if word in KEYWORDS else "name", word, line, start_col))
            col += j - i
            i = j
            continue
        if c == '"':
            j = i + 1
            buf = []
            while j < n and text[j] != '"':
                if text[j] == "\n":
                    raise FrSyntaxError("unterminated string", line, start_col)
                if text[j] == "\\" and j + 1 < n:
                    esc = text[j + 1]
                    buf.append({"n": "\n", "t": "\t", '"': '"', "\\": "\\"}.get(esc, esc))
                    j += 2
                else:
                    buf.append(text[j])
                    j += 1
            if j >= n:
                raise FrSyntaxError("unterminated string", line, start_col)
            toks.append(Token("str", "".join(buf), line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        if text[i:i + 2] in TWO_CHAR:
            toks.append(Token("punct", text[i:i + 2], line, start_col))
            i += 2
            col += 2
            continue
        if c in ONE_CHAR:
            toks.append(Token("punct", c, line, start_col))
            i += 1
            col += 1
            continue
        raise FrSyntaxError("unexpected character %r" % c, line, col)
    toks.append(Token("eof", None, line, col))
    return toks


class Parser:
    def __init__(self, toks):
        self.toks = toks
        self.pos = 0

    # -- token helpers -------------------------------------------------
    def peek(self):
        return self.toks[self.pos]

    def next(self):
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def at(self, kind, value=None):
        t = self.peek()
        return t.kind == kind and (value is None or t.value == value)

    def accept(self, kind, value=None):
        if self.at(kind, value):
            return self.next()
        return None

    def expect(self, kind, value=None):
        t = self.peek()
        if t.kind != kind or (value is not None and t.value != value):
            want = value if value is not None else kind
            raise FrSyntaxError("expected %r, found %r" % (want, t.value), t.line, t.col)
        return self.next()

    def err(self, msg):
        t = self.peek()
        raise FrSyntaxError(msg, t.line, t.col)

    # -- top level -----------------------------------------------------
    def parse_program(self):
        structs = []
        globals_ = []
        fns = []
        while not self.at("eof"):
            if self.at("kw", "struct"):
                structs.append(self.parse_struct())
            elif self.at("kw", "let"):
                globals_.append(self.parse_global())
            elif self.at("kw", "fn"):
                fns.append(self.parse_fn())
            else:
                self.err("expected 'struct', 'let', or 'fn' at top level")
        return structs, globals_, fns

    def parse_struct(self):
        t = self.expect("kw", "struct")
        name = self.expect("name").value
        self.expect("punct", "{")
        fields = []
        while not self.accept("punct", "}"):
            fields.append(self.expect("name").value)
            self.expect("punct", ";")
        return (name, fields, t.line)

    def parse_global(self):
        t = self.expect("kw", "let")
        name = self.expect("name").value
        self.expect("punct", "=")
        val = self.parse_literal()
        self.expect("punct", ";")
        return (name, val, t.line)

    def parse_literal(self):
        t = self.peek()
        neg = False
        if self.accept("punct", "-"):
            neg = True
            t = self.peek()
        if t.kind == "int":
            self.next()
            return -t.value if neg else t.value
        if neg:
            self.err("expected integer literal")
        if t.kind == "str":
            self.next()
            return t.value
        if t.kind == "kw" and t.value in ("true", "false", "nil"):
            self.next()
            return {"true": True, "false": False, "nil": None}[t.value]
        self.err("global initializers must be constants")

    def parse_fn(self):
        t = self.expect("kw", "fn")
        name = self.expect("name").value
        self.expect("punct", "(")
        params = []
        if not self.at("punct", ")"):
            params.append(self.expect("name").value)
            while self.accept("punct", ","):
                params.append(self.expect("name").value)
        self.expect("punct", ")")
        body = self.parse_block()
        return (name, params, body, t.line)

    # -- statements ----------------------------------------------------
    def parse_block(self):
        self.expect("punct", "{")
        stmts = []
        while not self.accept("punct", "}"):
            stmts.append(self.parse_stmt())
        return stmts

    def parse_stmt(self):
        t = self.peek()
        line = t.line
        if self.accept("kw", "let"):
            name = self.expect("name").value
            self.expect("punct", "=")
            e = self.parse_expr()
            self.expect("punct", ";")
            return ("let", line, name, e)
        if self.accept("kw", "if"):
            self.expect("punct", "(")
            cond = self.parse_expr()
            self.expect("punct", ")")
            then = self.parse_block()
            els = None
            if self.accept("kw", "else"):
                els = self.parse_block()
            return ("if", line, cond, then, els)
        if self.accept("kw", "while"):
            self.expect("punct", "(")
            cond = self.parse_expr()
            self.expect("punct", ")")
            body = self.parse_block()
            return ("while", line, cond, body)
        if self.accept("kw", "return"):
            e = None
            if not self.at("punct", ";"):
                e = self.parse_expr()
            self.expect("punct", ";")
            return ("return", line, e)
        if self.accept("kw", "print"):
            self.expect("punct", "(")
            args = self.parse_args()
            self.expect("punct", ";")
            return ("print", line, args)
        for kw in ("lock", "unlock", "join", "free"):
            if self.at("kw", kw):
                self.next()
                self.expect("punct", "(")
                e = self.parse_expr()
                self.expect("punct", ")")
                self.expect("punct", ";")
                return (kw, line, e)
        if self.accept("kw", "append"):
            self.expect("punct", "(")
            lst = self.parse_expr()
            self.expect("punct", ",")
            val = self.parse_expr()
            self.expect("punct", ")")
            self.expect("punct", ";")
            return ("append", line, lst, val)
        # Everything else: expression, possibly an assignment target.
        e = self.parse_expr()
        if self.accept("punct", "="):
            rhs = self.parse_expr()
            self.expect("punct", ";")
            if e[0] not in ("name", "field", "index", "deref"):
                raise FrSyntaxError("invalid assignment target", line, t.col)
            return ("assign", line, e, rhs)
        self.expect("punct", ";")
        return ("exprstmt", line, e)

    def parse_args(self):
        args = []
        if not self.at("punct", ")"):
            args.append(self.parse_expr())
            while self.accept("punct", ","):
                args.append(self.parse_expr())
        self.expect("punct", ")")
        return args

    # -- expressions ---------------------------------------------------
    def parse_expr(self):
        return self.parse_or()

    def parse_or(self):
        e = self.parse_and()
        while self.at("punct", "||"):
            line = self.next().line
            e = ("bin", line, "||", e, self.parse_and())
        return e

    def parse_and(self):
        e = self.parse_cmp()
        while self.at("punct", "&&"):
            line = self.next().line
            e = ("bin", line, "&&", e, self.parse_cmp())
        return e

    def parse_cmp(self):
        e = self.parse_add()
        t = self.peek()
        if t.kind == "punct" and t.value in ("==", "!=", "<", "<=", ">", ">="):
            self.next()
            e = ("bin", t.line, t.value, e, self.parse_add())
        return e

    def parse_add(self):
        e = self.parse_mul()
        while self.at("punct", "+") or self.at("punct", "-"):
            t = self.next()
            e = ("bin", t.line, t.value, e, self.parse_mul())
        return e

    def parse_mul(self):
        e = self.parse_unary()
        while self.at("punct", "*") or self.at("punct", "/") or self.at("punct", "%"):
            t = self.next()
            e = ("bin", t.line, t.value, e, self.parse_unary())
        return e

    def parse_unary(self):
        t = self.peek()
        if self.accept("punct", "!"):
            return ("not", t.line, self.parse_unary())
        if self.accept("punct", "-"):
            return ("neg", t.line, self.parse_unary())
        if self.at("punct", "*"):
            # Raw-address dereference: *( expr )
            self.next()
            self.expect("punct", "(")
            e = self.parse_expr()
            self.expect("punct", ")")
            return self.parse_postfix_ops(("deref", t.line, e))
        if self.accept("punct", "&"):
            path = self.parse_postfix()
            if path[0] not in ("field", "deref", "index"):
                raise FrSyntaxError("'&' needs a heap slot (field, index, or deref)",
                                    t.line, t.col)
            return ("addr", t.line, path)
        return self.parse_postfix()

    def parse_postfix(self):
        return self.parse_postfix_ops(self.parse_primary())

    def parse_postfix_ops(self, e):
        while True:
            t = self.peek()
            if self.accept("punct", "."):
                name = self.expect("name").value
                e = ("field", t.line, e, name)
            elif self.accept("punct", "["):
                idx = self.parse_expr()
                self.expect("punct", "]")
                e = ("index", t.line, e, idx)
            else:
                return e

    def parse_primary(self):
        t = self.peek()
        if t.kind == "int":
            self.next()
            return ("int", t.line, t.value)
        if t.kind == "str":
            self.next()
            return ("str", t.line, t.value)
        if t.kind == "kw":
            if t.value in ("true", "false"):
                self.next()
                return ("bool", t.line, t.value == "true")
            if t.value == "nil":
                self.next()
                return ("nil", t.line)
            if t.value == "spawn":
                self.next()
                name = self.expect("name").value
                self.expect("punct", "(")
                args = self.parse_args()
                return ("spawn", t.line, name, args)
            if t.value == "new":
                self.next()
                tname = self.expect("name").value
                return ("new", t.line, tname)
            if t.value == "len":
                self.next()
                self.expect("punct", "(")
                e = self.parse_expr()
                self.expect("punct", ")")
                return ("len", t.line, e)
            if t.value == "alloc":
                self.next()
                self.expect("punct", "(")
                e = self.parse_expr()
                self.expect("punct", ")")
                return ("alloc", t.line, e)
            if t.value in ("input", "clock", "rand", "mutex", "list"):
                self.next()
                self.expect("punct", "(")
                self.expect("punct", ")")
                return (t.value, t.line)
            self.err("unexpected keyword %r" % t.value)
        if t.kind == "name":
            self.next()
            if self.at("punct", "("):
                self.next()
                args = self.parse_args()
                return ("call", t.line, t.value, args)
            return ("name", t.line, t.value)
        if self.accept("punct", "("):
            e = self.parse_expr()
            self.expect("punct", ")")
            return e
        self.err("expected expression, found %r" % (t.value,))


def parse_source(text):
    """Parse .fr source text into (structs, globals, fns) AST triples."""
    return Parser(tokenize(text)).parse_program()


def parse_expression(text):
    """Parse a standalone expression (watched-expression syntax)."""
    p = Parser(tokenize(text))
    e = p.parse_expr()
    if not p.at("eof"):
        p.err("trailing input after expression")
    return e
