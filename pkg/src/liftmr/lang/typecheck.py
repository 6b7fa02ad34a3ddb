"""Type checker for MJ programs.

Annotates every expression with its type (write-once `ty` field) and returns
a TypedProgram. Names are block-scoped for visibility but must be unique per
function, so downstream passes can use one flat environment per function.
"""

from __future__ import annotations

from .ast import (
    ARITH_OPS,
    Assign,
    BOOL,
    BUILTINS,
    Binary,
    BoolLit,
    Break,
    Call,
    CMP_OPS,
    Decl,
    EQ_OPS,
    Expr,
    ExprStmt,
    For,
    FunctionDecl,
    INT,
    If,
    Index,
    IntLit,
    LOGIC_OPS,
    NewArray,
    NewMap,
    Program,
    Return,
    StrLit,
    STR,
    Type,
    TypedProgram,
    Unary,
    Var,
    While,
)
from .errors import MJTypeError


def _pos(node) -> tuple:
    return node.pos or (0, 0)


class _FuncChecker:
    def __init__(self, func: FunctionDecl, signatures: dict):
        self.func = func
        self.signatures = signatures
        self.declared = {}  # name -> Type, uniqueness across the whole function
        self.scopes = [set()]  # visibility stack
        self.loop_depth = 0

    def fail(self, msg: str, node) -> None:
        line, col = _pos(node)
        raise MJTypeError(f"{msg} (in function {self.func.name})", line, col)

    # -- scope handling -------------------------------------------------------

    def declare(self, name: str, t: Type, node) -> None:
        if name in self.declared:
            self.fail(f"duplicate declaration of {name!r}", node)
        if name in self.signatures:
            self.fail(f"{name!r} is already a function name", node)
        self.declared[name] = t
        self.scopes[-1].add(name)

    def visible(self, name: str) -> bool:
        return any(name in s for s in self.scopes)

    def lookup(self, name: str, node) -> Type:
        if not self.visible(name):
            self.fail(f"use of undeclared variable {name!r}", node)
        return self.declared[name]

    def check_body(self, stmts, new_scope: bool = True) -> None:
        if new_scope:
            self.scopes.append(set())
        for s in stmts:
            self.check_stmt(s)
        if new_scope:
            self.scopes.pop()

    # -- statements -----------------------------------------------------------

    def check_stmt(self, s) -> None:
        match s:
            case Decl(decl_type=t, name=name, init=init):
                if init is not None:
                    it = self.check_expr(init, allow_new=True)
                    if it != t:
                        self.fail(f"cannot initialize {t} {name} from {it}", s)
                elif not t.is_scalar:
                    self.fail(f"{t} variable {name!r} requires an initializer", s)
                self.declare(name, t, s)
            case Assign(target=tgt, value=val):
                tt = self.check_lvalue(tgt)
                vt = self.check_expr(val, allow_new=isinstance(tgt, Var))
                if vt != tt:
                    self.fail(f"cannot assign {vt} to {tt}", s)
            case If(cond=c, then_body=tb, else_body=eb):
                if self.check_expr(c) != BOOL:
                    self.fail("if condition must be bool", s)
                self.check_body(tb)
                self.check_body(eb)
            case While(cond=c, body=body):
                if self.check_expr(c) != BOOL:
                    self.fail("while condition must be bool", s)
                self.loop_depth += 1
                self.check_body(body)
                self.loop_depth -= 1
            case For(init=init, cond=c, update=u, body=body):
                self.scopes.append(set())
                if init is not None:
                    self.check_stmt(init)
                if c is not None and self.check_expr(c) != BOOL:
                    self.fail("for condition must be bool", s)
                self.loop_depth += 1
                self.check_body(body, new_scope=False)
                if u is not None:
                    self.check_stmt(u)
                self.loop_depth -= 1
                self.scopes.pop()
            case Break():
                if self.loop_depth == 0:
                    self.fail("break outside loop", s)
            case Return(value=v):
                if v is not None:
                    rt = self.check_expr(v)
                    if rt != self.func.return_type:
                        self.fail(
                            f"return type {rt} does not match declared {self.func.return_type}",
                            s,
                        )
            case ExprStmt(call=c):
                self.check_call(c, statement=True)
            case _:
                self.fail(f"unsupported statement {type(s).__name__}", s)

    def check_lvalue(self, tgt) -> Type:
        if isinstance(tgt, Var):
            t = self.lookup(tgt.name, tgt)
            tgt.ty = t
            return t
        if isinstance(tgt, Index):
            return self.check_expr(tgt)
        self.fail("invalid assignment target", tgt)

    # -- expressions ----------------------------------------------------------

    def check_expr(self, e: Expr, allow_new: bool = False) -> Type:
        t = self._infer(e, allow_new)
        e.ty = t
        return t

    def _infer(self, e: Expr, allow_new: bool) -> Type:
        match e:
            case IntLit():
                return INT
            case BoolLit():
                return BOOL
            case StrLit():
                return STR
            case Var(name=n):
                return self.lookup(n, e)
            case NewArray(elem_type=et, size=size):
                if not allow_new:
                    self.fail("'new' is only allowed as an initializer", e)
                if et != INT:
                    self.fail("only int arrays can be allocated", e)
                if self.check_expr(size) != INT:
                    self.fail("array size must be int", e)
                return Type("array", elem=et)
            case NewMap(key_type=k, val_type=v):
                if not allow_new:
                    self.fail("'new' is only allowed as an initializer", e)
                return Type("map", key=k, val=v)
            case Index(array=a, index=i):
                at = self.check_expr(a)
                if at.kind != "array":
                    self.fail(f"cannot index into {at}", e)
                if self.check_expr(i) != INT:
                    self.fail("array index must be int", e)
                return at.elem
            case Unary(op="!", operand=x):
                if self.check_expr(x) != BOOL:
                    self.fail("'!' needs a bool operand", e)
                return BOOL
            case Unary(op="-", operand=x):
                if self.check_expr(x) != INT:
                    self.fail("unary '-' needs an int operand", e)
                return INT
            case Binary(op=op, left=l, right=r):
                lt = self.check_expr(l)
                rt = self.check_expr(r)
                if op in ARITH_OPS:
                    if lt != INT or rt != INT:
                        self.fail(f"operator {op!r} needs int operands", e)
                    return INT
                if op in CMP_OPS:
                    if lt != INT or rt != INT:
                        self.fail(f"operator {op!r} needs int operands", e)
                    return BOOL
                if op in EQ_OPS:
                    if lt != rt or not lt.is_scalar:
                        self.fail(f"operator {op!r} needs matching scalar operands", e)
                    return BOOL
                if op in LOGIC_OPS:
                    if lt != BOOL or rt != BOOL:
                        self.fail(f"operator {op!r} needs bool operands", e)
                    return BOOL
                self.fail(f"unknown operator {op!r}", e)
            case Call():
                return self.check_call(e, statement=False)
        self.fail(f"unsupported expression {type(e).__name__}", e)

    def check_call(self, c: Call, statement: bool) -> Type:
        if c.func == "length":
            if len(c.args) != 1:
                self.fail("length takes one argument", c)
            at = self.check_expr(c.args[0])
            if at.kind != "array":
                self.fail(f"length needs an array, got {at}", c)
            c.ty = INT
            return INT
        if c.func == "get":
            if len(c.args) != 2:
                self.fail("get takes (map, key)", c)
            mt = self.check_expr(c.args[0])
            kt = self.check_expr(c.args[1])
            if mt.kind != "map" or kt != mt.key:
                self.fail(f"get needs (map<{kt},_>, {kt})", c)
            c.ty = mt.val
            return mt.val
        if c.func == "put":
            if not statement:
                self.fail("put is only allowed as a statement", c)
            if len(c.args) != 3:
                self.fail("put takes (map, key, value)", c)
            mt = self.check_expr(c.args[0])
            kt = self.check_expr(c.args[1])
            vt = self.check_expr(c.args[2])
            if mt.kind != "map" or kt != mt.key or vt != mt.val:
                self.fail("put arguments do not match the map type", c)
            c.ty = mt.val
            return mt.val
        sig = self.signatures.get(c.func)
        if sig is None:
            self.fail(f"call to unknown function {c.func!r}", c)
        params, ret = sig
        if len(c.args) != len(params):
            self.fail(f"{c.func} expects {len(params)} arguments", c)
        for arg, pt in zip(c.args, params):
            at = self.check_expr(arg)
            if at != pt:
                self.fail(f"argument type {at} does not match parameter {pt}", c)
        c.ty = ret
        return ret


def _check_no_recursion(p: Program) -> None:
    def callees(f: FunctionDecl) -> set:
        found = set()

        def walk_expr(e):
            match e:
                case Call(func=fn, args=args):
                    if fn not in BUILTINS:
                        found.add(fn)
                    for a in args:
                        walk_expr(a)
                case Binary(left=l, right=r):
                    walk_expr(l)
                    walk_expr(r)
                case Unary(operand=x):
                    walk_expr(x)
                case Index(array=a, index=i):
                    walk_expr(a)
                    walk_expr(i)
                case NewArray(size=sz):
                    walk_expr(sz)
                case _:
                    pass

        def walk_stmt(s):
            match s:
                case Decl(init=init):
                    if init is not None:
                        walk_expr(init)
                case Assign(target=t, value=v):
                    walk_expr(t)
                    walk_expr(v)
                case If(cond=c, then_body=tb, else_body=eb):
                    walk_expr(c)
                    for x in tb:
                        walk_stmt(x)
                    for x in eb:
                        walk_stmt(x)
                case While(cond=c, body=b):
                    walk_expr(c)
                    for x in b:
                        walk_stmt(x)
                case For(init=i, cond=c, update=u, body=b):
                    if i:
                        walk_stmt(i)
                    if c is not None:
                        walk_expr(c)
                    if u:
                        walk_stmt(u)
                    for x in b:
                        walk_stmt(x)
                case Return(value=v):
                    if v is not None:
                        walk_expr(v)
                case ExprStmt(call=c):
                    walk_expr(c)
                case _:
                    pass

        for s in f.body:
            walk_stmt(s)
        return found

    graph = {f.name: callees(f) for f in p.functions}
    state = {}  # name -> 'active' | 'done'

    def visit(name: str, chain):
        if state.get(name) == "done":
            return
        if state.get(name) == "active":
            cycle = " -> ".join(chain + [name])
            raise MJTypeError(f"recursion is not supported: {cycle}")
        state[name] = "active"
        for callee in graph.get(name, ()):
            visit(callee, chain + [name])
        state[name] = "done"

    for f in p.functions:
        visit(f.name, [])


def typecheck(p: Program) -> TypedProgram:
    """Check a parsed Program; returns it as a TypedProgram with `ty` set."""
    seen = set()
    for f in p.functions:
        if f.name in seen:
            raise MJTypeError(f"duplicate function {f.name!r}", *(f.pos or (0, 0)))
        seen.add(f.name)
    if "main" not in seen:
        raise MJTypeError("program has no 'main' function")
    signatures = {
        f.name: (tuple(q.param_type for q in f.params), f.return_type) for f in p.functions
    }
    _check_no_recursion(p)
    for f in p.functions:
        checker = _FuncChecker(f, signatures)
        for q in f.params:
            checker.declare(q.name, q.param_type, q)
        checker.check_body(f.body, new_scope=False)
    return TypedProgram(functions=p.functions)


def function_var_types(f: FunctionDecl) -> dict:
    """Name -> Type for every variable declared anywhere in the function."""
    out = {q.name: q.param_type for q in f.params}

    def walk(stmts):
        for s in stmts:
            match s:
                case Decl(decl_type=t, name=n):
                    out[n] = t
                case If(then_body=tb, else_body=eb):
                    walk(tb)
                    walk(eb)
                case While(body=b):
                    walk(b)
                case For(init=i, body=b):
                    if i is not None:
                        walk((i,))
                    walk(b)
                case _:
                    pass

    walk(f.body)
    return out
