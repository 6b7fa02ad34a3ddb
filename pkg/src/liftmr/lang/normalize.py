"""Normalization: canonical while(true) loops and three-address expressions.

Every loop becomes `while (true) { if (!(cond)) break; body; update; }` with
the counter update as the final statement, and every statement computes at
most one operator over atoms. `length(x)` counts as an atom: it models a
field read on the array, so loop bounds like `i < length(data)` survive
normalization intact.
"""

from __future__ import annotations

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
    NormalizedProgram,
    Return,
    StrLit,
    TypedProgram,
    Unary,
    Var,
    While,
)
from .typecheck import typecheck


def is_atom(e: Expr) -> bool:
    if isinstance(e, (IntLit, BoolLit, StrLit, Var)):
        return True
    # length(x) on a plain variable reads like a field access
    return isinstance(e, Call) and e.func == "length" and isinstance(e.args[0], Var)


class _Lowerer:
    def __init__(self, taken=()):
        self.counter = 0
        self.taken = set(taken)

    def fresh(self, t) -> str:
        while True:
            name = f"__t{self.counter}"
            self.counter += 1
            if name not in self.taken:
                self.taken.add(name)
                return name

    def atom(self, e: Expr, out: list) -> Expr:
        if is_atom(e):
            return e
        simple = self.simple(e, out)
        name = self.fresh(e.ty)
        out.append(Decl(e.ty, name, simple, pos=e.pos))
        return Var(name, ty=e.ty, pos=e.pos)

    def simple(self, e: Expr, out: list) -> Expr:
        """Lower e to at most one operator over atoms, hoisting temps into out."""
        match e:
            case _ if is_atom(e):
                return e
            case Binary(op=op, left=l, right=r):
                return Binary(op, self.atom(l, out), self.atom(r, out), ty=e.ty, pos=e.pos)
            case Unary(op=op, operand=x):
                return Unary(op, self.atom(x, out), ty=e.ty, pos=e.pos)
            case Index(array=a, index=i):
                return Index(self.atom(a, out), self.atom(i, out), ty=e.ty, pos=e.pos)
            case Call(func=f, args=args):
                lowered = tuple(self.atom(a, out) for a in args)
                return Call(f, lowered, ty=e.ty, pos=e.pos)
            case NewArray(elem_type=t, size=sz):
                return NewArray(t, self.atom(sz, out), ty=e.ty, pos=e.pos)
            case NewMap():
                return e
        raise TypeError(f"cannot lower {e!r}")

    def cond(self, e: Expr, out: list) -> Expr:
        """Conditions may keep one comparison/logic operator over atoms."""
        return self.simple(e, out)

    # -- statements -----------------------------------------------------------

    def stmts(self, body) -> list:
        out = []
        for s in body:
            self.stmt(s, out)
        return out

    def stmt(self, s, out: list) -> None:
        match s:
            case Decl(decl_type=t, name=n, init=init):
                lowered = None if init is None else self.simple(init, out)
                out.append(Decl(t, n, lowered, pos=s.pos))
            case Assign(target=Var() as tgt, value=v):
                out.append(Assign(tgt, self.simple(v, out), pos=s.pos))
            case Assign(target=Index(array=a, index=i) as tgt, value=v):
                new_tgt = Index(self.atom(a, out), self.atom(i, out), ty=tgt.ty, pos=tgt.pos)
                out.append(Assign(new_tgt, self.simple(v, out), pos=s.pos))
            case If(cond=c, then_body=tb, else_body=eb):
                lowered = self.cond(c, out)
                out.append(If(lowered, tuple(self.stmts(tb)), tuple(self.stmts(eb)), pos=s.pos))
            case While(cond=BoolLit(value=True), body=body):
                out.append(While(BoolLit(True), tuple(self.stmts(body)), pos=s.pos))
            case While(cond=c, body=body):
                out.append(self.loop(c, self.stmts(body), [], s))
            case For(init=init, cond=c, update=u, body=body):
                if init is not None:
                    self.stmt(init, out)
                cond = c if c is not None else BoolLit(True)
                update = [] if u is None else self.stmts((u,))
                out.append(self.loop(cond, self.stmts(body), update, s))
            case Break():
                out.append(s)
            case Return(value=v):
                lowered = None if v is None else self.atom(v, out)
                out.append(Return(lowered, pos=s.pos))
            case ExprStmt(call=c):
                lowered_args = []
                pre = []
                for a in c.args:
                    lowered_args.append(self.atom(a, pre))
                out.extend(pre)
                out.append(ExprStmt(Call(c.func, tuple(lowered_args), ty=c.ty, pos=c.pos), pos=s.pos))
            case _:
                raise TypeError(f"cannot normalize {s!r}")

    def loop(self, cond: Expr, body: list, update: list, src) -> While:
        """while(true) { [cond temps]; if (!cond) break; body; update; }"""
        pre = []
        lowered = self.cond(cond, pre)
        exit_check = If(Unary("!", lowered, pos=cond.pos), (Break(pos=src.pos),), (), pos=src.pos)
        return While(BoolLit(True), tuple(pre + [exit_check] + body + update), pos=src.pos)


def normalize(p: TypedProgram) -> NormalizedProgram:
    """Lower a TypedProgram to its canonical normalized form.

    Total on typed programs; re-typechecks its own output so the annotations
    on fresh nodes are complete.
    """
    from .typecheck import function_var_types

    functions = []
    for f in p.functions:
        lw = _Lowerer(taken=function_var_types(f))
        functions.append(
            FunctionDecl(f.name, f.params, f.return_type, tuple(lw.stmts(f.body)), pos=f.pos)
        )
    out = typecheck(NormalizedProgram(functions=tuple(functions)))
    return NormalizedProgram(functions=out.functions)
