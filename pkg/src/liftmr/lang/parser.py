"""Lexer and recursive-descent parser for MJ source text (.mj files)."""

from __future__ import annotations

import re

from .ast import (
    Assign,
    Binary,
    BoolLit,
    Break,
    Call,
    Decl,
    Expr,
    ExprStmt,
    For,
    FunctionDecl,
    If,
    Index,
    IntLit,
    NewArray,
    NewMap,
    Param,
    Program,
    RESERVED_PREFIX,
    Return,
    StrLit,
    Stmt,
    Type,
    Unary,
    Var,
    While,
    array_of,
    map_of,
    BOOL,
    INT,
    STR,
)
from .errors import MJSyntaxError

KEYWORDS = {
    "int",
    "bool",
    "string",
    "map",
    "if",
    "else",
    "for",
    "while",
    "break",
    "return",
    "true",
    "false",
    "new",
    "length",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*)
  | (?P<num>\d+)
  | (?P<str>"[^"\n]*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>\+\+|--|\+=|-=|\*=|/=|%=|&&|\|\||==|!=|<=|>=|[-+*/%<>=!;,(){}\[\].])
""",
    re.VERBOSE,
)


class Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind = kind  # 'num' | 'str' | 'ident' | 'kw' | 'op' | 'eof'
        self.text = text
        self.line = line
        self.col = col

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r})"


def tokenize(text: str) -> list:
    tokens = []
    line, col = 1, 1
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise MJSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        tok = m.group()
        if kind not in ("ws", "comment"):
            if kind == "ident" and tok in KEYWORDS:
                kind = "kw"
            tokens.append(Token(kind, tok, line, col))
        newlines = tok.count("\n")
        if newlines:
            line += newlines
            col = len(tok) - tok.rfind("\n")
        else:
            col += len(tok)
        pos = m.end()
    tokens.append(Token("eof", "<eof>", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    # -- token plumbing -----------------------------------------------------

    @property
    def cur(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k=1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def advance(self) -> Token:
        t = self.cur
        if t.kind != "eof":
            self.i += 1
        return t

    def at(self, text: str) -> bool:
        return self.cur.text == text and self.cur.kind in ("op", "kw")

    def accept(self, text: str):
        if self.at(text):
            return self.advance()
        return None

    def expect(self, text: str) -> Token:
        if self.at(text):
            return self.advance()
        raise MJSyntaxError(
            f"unexpected {self.cur.text!r}", self.cur.line, self.cur.col, expected=(text,)
        )

    def expect_ident(self) -> Token:
        # '__'-prefixed names are compiler temporaries by convention; they
        # parse fine so normalized output stays re-parseable.
        if self.cur.kind != "ident":
            raise MJSyntaxError(
                f"unexpected {self.cur.text!r}",
                self.cur.line,
                self.cur.col,
                expected=("identifier",),
            )
        return self.advance()

    def pos(self) -> tuple:
        return (self.cur.line, self.cur.col)

    # -- grammar ------------------------------------------------------------

    def parse_program(self) -> Program:
        functions = []
        while self.cur.kind != "eof":
            functions.append(self.parse_funcdecl())
        if not functions:
            raise MJSyntaxError("empty program", 1, 1, expected=("function declaration",))
        return Program(functions=tuple(functions))

    def at_type(self) -> bool:
        return self.cur.kind == "kw" and self.cur.text in ("int", "bool", "string", "map")

    def parse_type(self) -> Type:
        tok = self.cur
        base = self.parse_base_type()
        if base.is_scalar and self.at("["):
            self.advance()
            self.expect("]")
            if base.kind not in ("int", "str"):
                raise MJSyntaxError(f"unsupported array type {base}[]", tok.line, tok.col)
            return array_of(base)
        return base

    def parse_base_type(self) -> Type:
        """A scalar or map type, without any [] array suffix."""
        tok = self.advance()
        if tok.text == "map":
            self.expect("<")
            key = self.parse_base_type()
            self.expect(",")
            val = self.parse_base_type()
            self.expect(">")
            if key.kind not in ("int", "str") or val.kind not in ("int", "bool"):
                raise MJSyntaxError(
                    f"unsupported map type map<{key},{val}>", tok.line, tok.col
                )
            return map_of(key, val)
        base = {"int": INT, "bool": BOOL, "string": STR}.get(tok.text)
        if base is None:
            raise MJSyntaxError(f"unknown type {tok.text!r}", tok.line, tok.col)
        return base

    def parse_scalar_type(self) -> Type:
        tok = self.cur
        t = self.parse_base_type()
        if not t.is_scalar:
            raise MJSyntaxError("scalar type required", tok.line, tok.col)
        return t

    def parse_funcdecl(self) -> FunctionDecl:
        pos = self.pos()
        ret = self.parse_type()
        name = self.expect_ident()
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                pt = self.parse_type()
                pn = self.expect_ident()
                params.append(Param(pn.text, pt, pos=(pn.line, pn.col)))
                if not self.accept(","):
                    break
        self.expect(")")
        body = self.parse_block()
        return FunctionDecl(name.text, tuple(params), ret, body, pos=pos)

    def parse_block(self) -> tuple:
        self.expect("{")
        stmts = []
        while not self.at("}"):
            if self.cur.kind == "eof":
                raise MJSyntaxError("unterminated block", self.cur.line, self.cur.col, expected=("}",))
            stmts.append(self.parse_stmt())
        self.expect("}")
        return tuple(stmts)

    def parse_body(self) -> tuple:
        """A block, or a single statement treated as a one-element body."""
        if self.at("{"):
            return self.parse_block()
        return (self.parse_stmt(),)

    def parse_stmt(self) -> Stmt:
        pos = self.pos()
        if self.at_type():
            return self.parse_decl()
        if self.at("if"):
            return self.parse_if()
        if self.at("for"):
            return self.parse_for()
        if self.at("while"):
            self.advance()
            self.expect("(")
            cond = self.parse_expr()
            self.expect(")")
            body = self.parse_body()
            return While(cond, body, pos=pos)
        if self.at("break"):
            self.advance()
            self.expect(";")
            return Break(pos=pos)
        if self.at("return"):
            self.advance()
            if self.accept(";"):
                return Return(None, pos=pos)
            value = self.parse_expr()
            self.expect(";")
            return Return(value, pos=pos)
        stmt = self.parse_simple_stmt()
        self.expect(";")
        return stmt

    def parse_decl(self) -> Decl:
        pos = self.pos()
        t = self.parse_type()
        name = self.expect_ident()
        init = None
        if self.accept("="):
            init = self.parse_expr()
        self.expect(";")
        return Decl(t, name.text, init, pos=pos)

    def parse_if(self) -> If:
        pos = self.pos()
        self.expect("if")
        self.expect("(")
        cond = self.parse_expr()
        self.expect(")")
        then_body = self.parse_body()
        else_body = ()
        if self.accept("else"):
            if self.at("if"):
                else_body = (self.parse_if(),)
            else:
                else_body = self.parse_body()
        return If(cond, then_body, else_body, pos=pos)

    def parse_for(self) -> For:
        pos = self.pos()
        self.expect("for")
        self.expect("(")
        init = None
        if not self.at(";"):
            if self.at_type():
                t = self.parse_type()
                name = self.expect_ident()
                self.expect("=")
                init = Decl(t, name.text, self.parse_expr(), pos=pos)
            else:
                init = self.parse_simple_stmt()
        self.expect(";")
        cond = None if self.at(";") else self.parse_expr()
        self.expect(";")
        update = None if self.at(")") else self.parse_simple_stmt()
        self.expect(")")
        body = self.parse_body()
        return For(init, cond, update, body, pos=pos)

    def parse_simple_stmt(self) -> Stmt:
        """Assignment (incl. compound/increment sugar) or a call statement."""
        pos = self.pos()
        e = self.parse_expr()
        if isinstance(e, Call) and not self.at("=") and not self._at_compound():
            return ExprStmt(e, pos=pos)
        if not isinstance(e, (Var, Index)):
            raise MJSyntaxError("expression is not a statement", pos[0], pos[1])
        if self.accept("="):
            return Assign(e, self.parse_expr(), pos=pos)
        for op in ("+=", "-=", "*=", "/=", "%="):
            if self.accept(op):
                rhs = self.parse_expr()
                return Assign(e, Binary(op[0], _copy_lvalue(e), rhs, pos=pos), pos=pos)
        if self.accept("++"):
            return Assign(e, Binary("+", _copy_lvalue(e), IntLit(1, pos=pos), pos=pos), pos=pos)
        if self.accept("--"):
            return Assign(e, Binary("-", _copy_lvalue(e), IntLit(1, pos=pos), pos=pos), pos=pos)
        raise MJSyntaxError(
            f"unexpected {self.cur.text!r}",
            self.cur.line,
            self.cur.col,
            expected=("=", "++", "--", "+=", "-="),
        )

    def _at_compound(self) -> bool:
        return self.cur.text in ("+=", "-=", "*=", "/=", "%=", "++", "--")

    # -- expressions, precedence climbing ------------------------------------

    def parse_expr(self) -> Expr:
        return self.parse_or()

    def _binop_chain(self, sub, ops):
        e = sub()
        while self.cur.kind == "op" and self.cur.text in ops:
            op = self.advance()
            rhs = sub()
            e = Binary(op.text, e, rhs, pos=(op.line, op.col))
        return e

    def parse_or(self) -> Expr:
        return self._binop_chain(self.parse_and, ("||",))

    def parse_and(self) -> Expr:
        return self._binop_chain(self.parse_eq, ("&&",))

    def parse_eq(self) -> Expr:
        return self._binop_chain(self.parse_rel, ("==", "!="))

    def parse_rel(self) -> Expr:
        return self._binop_chain(self.parse_add, ("<", "<=", ">", ">="))

    def parse_add(self) -> Expr:
        return self._binop_chain(self.parse_mul, ("+", "-"))

    def parse_mul(self) -> Expr:
        return self._binop_chain(self.parse_unary, ("*", "/", "%"))

    def parse_unary(self) -> Expr:
        if self.at("!"):
            tok = self.advance()
            return Unary("!", self.parse_unary(), pos=(tok.line, tok.col))
        if self.at("-"):
            tok = self.advance()
            inner = self.parse_unary()
            if isinstance(inner, IntLit):
                return IntLit(-inner.value, pos=(tok.line, tok.col))
            return Unary("-", inner, pos=(tok.line, tok.col))
        return self.parse_postfix()

    def parse_postfix(self) -> Expr:
        e = self.parse_primary()
        while True:
            if self.at("["):
                tok = self.advance()
                idx = self.parse_expr()
                self.expect("]")
                e = Index(e, idx, pos=(tok.line, tok.col))
            elif self.at("."):
                tok = self.advance()
                name = self.expect("length")
                e = Call("length", (e,), pos=(name.line, name.col))
            else:
                return e

    def parse_primary(self) -> Expr:
        tok = self.cur
        pos = (tok.line, tok.col)
        if tok.kind == "num":
            self.advance()
            return IntLit(int(tok.text), pos=pos)
        if tok.kind == "str":
            self.advance()
            return StrLit(tok.text[1:-1], pos=pos)
        if self.at("true"):
            self.advance()
            return BoolLit(True, pos=pos)
        if self.at("false"):
            self.advance()
            return BoolLit(False, pos=pos)
        if self.at("new"):
            self.advance()
            if self.at("map"):
                t = self.parse_type()
                self.expect("(")
                self.expect(")")
                return NewMap(t.key, t.val, pos=pos)
            base = self.parse_scalar_type()
            self.expect("[")
            size = self.parse_expr()
            self.expect("]")
            return NewArray(base, size, pos=pos)
        if self.at("("):
            self.advance()
            e = self.parse_expr()
            self.expect(")")
            return e
        if self.at("length") or self.at("get") or self.at("put") or tok.kind == "ident":
            # builtin or user call, or a plain variable
            if tok.kind == "kw":
                name = self.advance()
            else:
                name = self.expect_ident()
            if self.at("("):
                self.advance()
                args = []
                if not self.at(")"):
                    while True:
                        args.append(self.parse_expr())
                        if not self.accept(","):
                            break
                self.expect(")")
                return Call(name.text, tuple(args), pos=pos)
            if name.kind == "kw":
                raise MJSyntaxError(f"{name.text!r} is not a variable", name.line, name.col)
            return Var(name.text, pos=pos)
        raise MJSyntaxError(
            f"unexpected {tok.text!r}", tok.line, tok.col, expected=("expression",)
        )


def _copy_lvalue(e: Expr) -> Expr:
    """Fresh AST for the read side of compound-assignment sugar."""
    if isinstance(e, Var):
        return Var(e.name, pos=e.pos)
    return Index(_copy_lvalue(e.array), e.index, pos=e.pos)


def parse(text: str) -> Program:
    """Parse MJ source text into a Program.

    Raises MJSyntaxError with line/column on malformed input.
    """
    return _Parser(tokenize(text)).parse_program()
