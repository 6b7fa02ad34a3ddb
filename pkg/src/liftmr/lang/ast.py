"""AST and type definitions for MJ, the mini imperative language.

MJ supports scalars (int, bool, string), flat arrays, flat maps, structured
control flow and three builtins (length, get, put). Integers are 64-bit
signed; overflow is a trapped runtime error, not wrap-around. Strings are
interned tokens with equality only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

INT_MIN = -(2**63)
INT_MAX = 2**63 - 1

# User identifiers may not start with '__'; the normalizer owns that prefix
# for compiler temporaries.
RESERVED_PREFIX = "__"

BUILTINS = ("length", "get", "put")


# ---------------------------------------------------------------------------
# Types


@dataclass(frozen=True)
class Type:
    kind: str  # 'int' | 'bool' | 'str' | 'array' | 'map'
    elem: Optional["Type"] = None  # array element
    key: Optional["Type"] = None  # map key
    val: Optional["Type"] = None  # map value

    def __str__(self) -> str:
        return type_source(self)

    @property
    def is_scalar(self) -> bool:
        return self.kind in ("int", "bool", "str")


INT = Type("int")
BOOL = Type("bool")
STR = Type("str")
INT_ARRAY = Type("array", elem=INT)
STR_ARRAY = Type("array", elem=STR)


def array_of(elem: Type) -> Type:
    return Type("array", elem=elem)


def map_of(key: Type, val: Type) -> Type:
    return Type("map", key=key, val=val)


# ---------------------------------------------------------------------------
# Expressions
#
# `ty` is a write-once annotation filled in by the typechecker; `pos` is a
# (line, col) pair. Neither participates in equality.


@dataclass
class Expr:
    ty: Optional[Type] = field(default=None, compare=False, repr=False, kw_only=True)
    pos: Optional[tuple] = field(default=None, compare=False, repr=False, kw_only=True)


@dataclass
class IntLit(Expr):
    value: int


@dataclass
class BoolLit(Expr):
    value: bool


@dataclass
class StrLit(Expr):
    value: str


@dataclass
class Var(Expr):
    name: str


@dataclass
class Unary(Expr):
    op: str  # '!' | '-'
    operand: Expr


@dataclass
class Binary(Expr):
    op: str  # + - * / % < <= > >= == != && ||
    left: Expr
    right: Expr


@dataclass
class Index(Expr):
    array: Expr
    index: Expr


@dataclass
class Call(Expr):
    func: str
    args: tuple


@dataclass
class NewArray(Expr):
    elem_type: Type
    size: Expr


@dataclass
class NewMap(Expr):
    key_type: Type
    val_type: Type


ARITH_OPS = ("+", "-", "*", "/", "%")
CMP_OPS = ("<", "<=", ">", ">=")
EQ_OPS = ("==", "!=")
LOGIC_OPS = ("&&", "||")


# ---------------------------------------------------------------------------
# Statements


@dataclass
class Stmt:
    pos: Optional[tuple] = field(default=None, compare=False, repr=False, kw_only=True)


@dataclass
class Decl(Stmt):
    decl_type: Type
    name: str
    init: Optional[Expr] = None


@dataclass
class Assign(Stmt):
    target: Union[Var, Index]
    value: Expr


@dataclass
class If(Stmt):
    cond: Expr
    then_body: tuple
    else_body: tuple = ()


@dataclass
class For(Stmt):
    init: Optional[Stmt]
    cond: Optional[Expr]
    update: Optional[Stmt]
    body: tuple


@dataclass
class While(Stmt):
    cond: Expr
    body: tuple


@dataclass
class Break(Stmt):
    pass


@dataclass
class Return(Stmt):
    value: Optional[Expr] = None


@dataclass
class ExprStmt(Stmt):
    call: Call


@dataclass
class MRJobStmt(Stmt):
    """Invocation of a bound MapReduce job, inserted by the program rewriter.

    Not expressible in MJ surface syntax; the interpreter executes it via the
    runtime engine and binds the resulting id->value map to `result_name`.
    """

    result_name: str
    job: object
    data_var: str
    input_vars: tuple = ()
    workers: int = 1


@dataclass
class ReconStmt(Stmt):
    """Assignment of one rewritten output from a job result map."""

    target: str
    result_name: str
    var_id: int


@dataclass
class CounterFixStmt(Stmt):
    """Sets the loop counter to the value it holds when the original loop exits."""

    counter: str
    init: int
    stride: int
    data_var: str


# ---------------------------------------------------------------------------
# Declarations / program


@dataclass
class Param:
    name: str
    param_type: Type
    pos: Optional[tuple] = field(default=None, compare=False, repr=False, kw_only=True)


@dataclass
class FunctionDecl:
    name: str
    params: tuple  # of Param
    return_type: Type
    body: tuple  # of Stmt
    pos: Optional[tuple] = field(default=None, compare=False, repr=False, kw_only=True)


@dataclass
class Program:
    functions: tuple  # of FunctionDecl

    def function(self, name: str) -> FunctionDecl:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)

    @property
    def main(self) -> FunctionDecl:
        return self.function("main")


class TypedProgram(Program):
    """A Program whose expressions all carry a `ty` annotation."""


class NormalizedProgram(TypedProgram):
    """A TypedProgram with only simple expressions and canonical while(true) loops."""


class RewrittenProgram(TypedProgram):
    """A TypedProgram in which lifted loops are replaced by job invocations."""


# ---------------------------------------------------------------------------
# Pretty printer


def type_source(t: Type) -> str:
    if t.kind == "array":
        return f"{type_source(t.elem)}[]"
    if t.kind == "map":
        return f"map<{type_source(t.key)},{type_source(t.val)}>"
    return {"int": "int", "bool": "bool", "str": "string"}[t.kind]


_PREC = {
    "||": 1,
    "&&": 2,
    "==": 3,
    "!=": 3,
    "<": 4,
    "<=": 4,
    ">": 4,
    ">=": 4,
    "+": 5,
    "-": 5,
    "*": 6,
    "/": 6,
    "%": 6,
}


def expr_source(e: Expr, parent_prec: int = 0) -> str:
    match e:
        case IntLit(value=v):
            return str(v)
        case BoolLit(value=v):
            return "true" if v else "false"
        case StrLit(value=v):
            return '"%s"' % v
        case Var(name=n):
            return n
        case Index(array=a, index=i):
            return f"{expr_source(a, 9)}[{expr_source(i)}]"
        case Call(func=f, args=args):
            return f"{f}({', '.join(expr_source(a) for a in args)})"
        case NewArray(elem_type=t, size=s):
            return f"new {type_source(t)}[{expr_source(s)}]"
        case NewMap(key_type=k, val_type=v):
            return f"new map<{type_source(k)},{type_source(v)}>()"
        case Unary(op=op, operand=x):
            return f"{op}{expr_source(x, 8)}"
        case Binary(op=op, left=l, right=r):
            prec = _PREC[op]
            s = f"{expr_source(l, prec)} {op} {expr_source(r, prec + 1)}"
            return f"({s})" if prec < parent_prec else s
    raise TypeError(f"cannot print {e!r}")


def _stmt_lines(s: Stmt, indent: int) -> list:
    pad = "    " * indent
    match s:
        case Decl(decl_type=t, name=n, init=init):
            if init is None:
                return [f"{pad}{type_source(t)} {n};"]
            return [f"{pad}{type_source(t)} {n} = {expr_source(init)};"]
        case Assign(target=tgt, value=v):
            return [f"{pad}{expr_source(tgt)} = {expr_source(v)};"]
        case If(cond=c, then_body=tb, else_body=eb):
            lines = [f"{pad}if ({expr_source(c)}) {{"]
            for st in tb:
                lines.extend(_stmt_lines(st, indent + 1))
            if eb:
                lines.append(f"{pad}}} else {{")
                for st in eb:
                    lines.extend(_stmt_lines(st, indent + 1))
            lines.append(f"{pad}}}")
            return lines
        case For(init=ini, cond=c, update=u, body=body):
            ini_s = _inline_stmt(ini) if ini else ""
            u_s = _inline_stmt(u) if u else ""
            c_s = expr_source(c) if c is not None else ""
            lines = [f"{pad}for ({ini_s}; {c_s}; {u_s}) {{"]
            for st in body:
                lines.extend(_stmt_lines(st, indent + 1))
            lines.append(f"{pad}}}")
            return lines
        case While(cond=c, body=body):
            lines = [f"{pad}while ({expr_source(c)}) {{"]
            for st in body:
                lines.extend(_stmt_lines(st, indent + 1))
            lines.append(f"{pad}}}")
            return lines
        case Break():
            return [f"{pad}break;"]
        case Return(value=v):
            return [f"{pad}return;" if v is None else f"{pad}return {expr_source(v)};"]
        case ExprStmt(call=c):
            return [f"{pad}{expr_source(c)};"]
        case MRJobStmt(result_name=r, data_var=d):
            return [f"{pad}// {r} = mapreduce.execute({d}, ...);"]
        case ReconStmt(target=t, result_name=r, var_id=i):
            return [f"{pad}// {t} = {r}.get({i});"]
        case CounterFixStmt(counter=c):
            return [f"{pad}// {c} = <loop exit value>;"]
    raise TypeError(f"cannot print {s!r}")


def _inline_stmt(s: Stmt) -> str:
    text = _stmt_lines(s, 0)[0]
    return text.rstrip(";")


def program_source(p: Program) -> str:
    """Render a Program back to MJ source text."""
    chunks = []
    for f in p.functions:
        params = ", ".join(f"{type_source(q.param_type)} {q.name}" for q in f.params)
        lines = [f"{type_source(f.return_type)} {f.name}({params}) {{"]
        for st in f.body:
            lines.extend(_stmt_lines(st, 1))
        lines.append("}")
        chunks.append("\n".join(lines))
    return "\n\n".join(chunks) + "\n"
