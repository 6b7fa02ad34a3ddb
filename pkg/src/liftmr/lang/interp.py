"""Tree-walking interpreter for MJ: the sequential differential-testing oracle.

Deterministic; traps on out-of-bounds indexing, division by zero, 64-bit
overflow and fuel exhaustion. `interpret` returns the environment of `main`'s
variables at program exit (compiler temporaries excluded).
"""

from __future__ import annotations

from .ast import (
    Assign,
    Binary,
    BoolLit,
    Break,
    Call,
    CounterFixStmt,
    Decl,
    Expr,
    ExprStmt,
    For,
    If,
    Index,
    IntLit,
    INT_MAX,
    INT_MIN,
    MRJobStmt,
    NewArray,
    NewMap,
    Program,
    ReconStmt,
    RESERVED_PREFIX,
    Return,
    StrLit,
    Unary,
    Var,
    While,
)
from .errors import MJTrap

DEFAULT_FUEL = 100_000_000


def check_int(v: int) -> int:
    if v < INT_MIN or v > INT_MAX:
        raise MJTrap("overflow", str(v))
    return v


def int_div(a: int, b: int) -> int:
    """Division truncating toward zero (Java semantics)."""
    if b == 0:
        raise MJTrap("division-by-zero")
    q = abs(a) // abs(b)
    return -q if (a < 0) != (b < 0) else q


def int_mod(a: int, b: int) -> int:
    """Remainder with the sign of the dividend (Java semantics)."""
    if b == 0:
        raise MJTrap("division-by-zero")
    return a - int_div(a, b) * b


def default_value(t) -> object:
    if t.kind == "int":
        return 0
    if t.kind == "bool":
        return False
    if t.kind == "str":
        return ""
    raise MJTrap("uninitialized", str(t))


def copy_value(v):
    if isinstance(v, list):
        return list(v)
    if isinstance(v, dict):
        return dict(v)
    return v


class _BreakSignal(Exception):
    pass


class _ReturnSignal(Exception):
    def __init__(self, value):
        self.value = value


class Interp:
    def __init__(self, program: Program, fuel: int = DEFAULT_FUEL, workers: int = 1):
        self.program = program
        self.fuel = fuel
        self.workers = workers

    def burn(self, n: int = 1) -> None:
        self.fuel -= n
        if self.fuel < 0:
            raise MJTrap("fuel-exhausted")

    # -- expressions ----------------------------------------------------------

    def eval(self, e: Expr, env: dict):
        match e:
            case IntLit(value=v) | BoolLit(value=v) | StrLit(value=v):
                return v
            case Var(name=n):
                return env[n]
            case Index(array=a, index=i):
                arr = self.eval(a, env)
                idx = self.eval(i, env)
                if idx < 0 or idx >= len(arr):
                    raise MJTrap("index-out-of-bounds", f"{idx} not in [0, {len(arr)})")
                return arr[idx]
            case Binary(op=op, left=l, right=r):
                if op == "&&":
                    return self.eval(l, env) and self.eval(r, env)
                if op == "||":
                    return self.eval(l, env) or self.eval(r, env)
                a = self.eval(l, env)
                b = self.eval(r, env)
                return apply_binop(op, a, b)
            case Unary(op=op, operand=x):
                v = self.eval(x, env)
                return (not v) if op == "!" else check_int(-v)
            case Call(func="length", args=(a,)):
                return len(self.eval(a, env))
            case Call(func="get", args=(m, k)):
                mv = self.eval(m, env)
                kv = self.eval(k, env)
                if kv in mv:
                    return mv[kv]
                return default_value(e.ty)
            case NewArray(size=sz):
                n = self.eval(sz, env)
                if n < 0:
                    raise MJTrap("negative-array-size", str(n))
                return [0] * n
            case NewMap():
                return {}
            case Call(func=fn, args=args):
                argv = [self.eval(a, env) for a in args]
                return self.call_function(fn, argv)
        raise TypeError(f"cannot evaluate {e!r}")

    def call_function(self, name: str, argv: list):
        f = self.program.function(name)
        env = {}
        for q, v in zip(f.params, argv):
            env[q.name] = copy_value(v)
        try:
            self.exec_body(f.body, env)
        except _ReturnSignal as r:
            return r.value
        return None

    # -- statements -----------------------------------------------------------

    def exec_body(self, stmts, env: dict) -> None:
        for s in stmts:
            self.exec_stmt(s, env)

    def exec_stmt(self, s, env: dict) -> None:
        self.burn()
        match s:
            case Decl(decl_type=t, name=n, init=init):
                env[n] = default_value(t) if init is None else self.eval(init, env)
            case Assign(target=Var(name=n), value=v):
                env[n] = self.eval(v, env)
            case Assign(target=Index(array=a, index=i), value=v):
                arr = self.eval(a, env)
                idx = self.eval(i, env)
                if idx < 0 or idx >= len(arr):
                    raise MJTrap("index-out-of-bounds", f"{idx} not in [0, {len(arr)})")
                arr[idx] = self.eval(v, env)
            case If(cond=c, then_body=tb, else_body=eb):
                if self.eval(c, env):
                    self.exec_body(tb, env)
                else:
                    self.exec_body(eb, env)
            case While(cond=c, body=body):
                try:
                    while self.eval(c, env):
                        self.burn()
                        self.exec_body(body, env)
                except _BreakSignal:
                    pass
            case For(init=init, cond=c, update=u, body=body):
                if init is not None:
                    self.exec_stmt(init, env)
                try:
                    while c is None or self.eval(c, env):
                        self.burn()
                        self.exec_body(body, env)
                        if u is not None:
                            self.exec_stmt(u, env)
                except _BreakSignal:
                    pass
            case Break():
                raise _BreakSignal()
            case Return(value=v):
                raise _ReturnSignal(None if v is None else self.eval(v, env))
            case ExprStmt(call=Call(func="put", args=(m, k, v))):
                mv = self.eval(m, env)
                mv[self.eval(k, env)] = self.eval(v, env)
            case ExprStmt(call=c):
                self.eval(c, env)
            case MRJobStmt(result_name=r, job=job, data_var=d, input_vars=ivs):
                from .. import runtime

                cfg = runtime.RuntimeConfig(workers=self.workers)
                inputs = {n: env[n] for n in ivs}
                out = runtime.execute(job, env[d], cfg, inputs=inputs)
                env[r] = out.values
            case ReconStmt(target=t, result_name=r, var_id=i):
                env[t] = copy_value(env[r][i])
            case CounterFixStmt(counter=c, init=i0, stride=k, data_var=d):
                n = len(env[d])
                if n <= i0:
                    env[c] = i0
                else:
                    env[c] = i0 + -((i0 - n) // k) * k
            case _:
                raise TypeError(f"cannot execute {s!r}")


def apply_binop(op: str, a, b):
    if op == "+":
        return check_int(a + b)
    if op == "-":
        return check_int(a - b)
    if op == "*":
        return check_int(a * b)
    if op == "/":
        return int_div(a, b)
    if op == "%":
        return int_mod(a, b)
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    if op == "==":
        return a == b
    if op == "!=":
        return a != b
    raise TypeError(f"unknown operator {op!r}")


def interpret(p: Program, inputs: dict, fuel: int = DEFAULT_FUEL, workers: int = 1) -> dict:
    """Run `main` with its parameters bound from `inputs`.

    Returns a snapshot of every named variable of main live at exit. Input
    containers are copied on the way in, so callers may reuse them.
    """
    it = Interp(p, fuel=fuel, workers=workers)
    f = p.main
    missing = [q.name for q in f.params if q.name not in inputs]
    if missing:
        raise KeyError(f"missing main inputs: {missing}")
    env = {q.name: copy_value(inputs[q.name]) for q in f.params}
    try:
        it.exec_body(f.body, env)
    except _ReturnSignal:
        pass
    return {
        name: copy_value(v)
        for name, v in env.items()
        if not name.startswith(RESERVED_PREFIX)
    }
