"""Compilation of candidate expressions to Python callables.

Generated code preserves MJ semantics: 64-bit overflow, division by zero and
out-of-bounds indexing raise MJTrap. Used by the runtime's map/combine/reduce
phases and by the synthesizer's fold evaluation, where per-call interpreter
overhead would dominate.
"""

from __future__ import annotations

from .lang.ast import (
    Binary,
    BoolLit,
    Call,
    Expr,
    Index,
    IntLit,
    INT_MAX,
    INT_MIN,
    StrLit,
    Unary,
    Var,
)
from .lang.errors import MJTrap
from .lang.interp import int_div, int_mod


def _ck(v: int) -> int:
    if v < INT_MIN or v > INT_MAX:
        raise MJTrap("overflow", str(v))
    return v


def _ix(arr, i: int):
    if 0 <= i < len(arr):
        return arr[i]
    raise MJTrap("index-out-of-bounds", f"{i} not in [0, {len(arr)})")


_HELPERS = {"_ck": _ck, "_ix": _ix, "_div": int_div, "_mod": int_mod}

_CMP = {"<": "<", "<=": "<=", ">": ">", ">=": ">=", "==": "==", "!=": "!="}


def expr_py(e: Expr, names: dict) -> str:
    """Python source for a candidate expression; `names` maps MJ variable
    names to Python identifiers."""
    match e:
        case IntLit(value=v):
            return repr(v)
        case BoolLit(value=v):
            return repr(v)
        case StrLit(value=v):
            return repr(v)
        case Var(name=n):
            return names[n]
        case Index(array=a, index=i):
            return f"_ix({expr_py(a, names)}, {expr_py(i, names)})"
        case Binary(op="&&", left=l, right=r):
            return f"({expr_py(l, names)} and {expr_py(r, names)})"
        case Binary(op="||", left=l, right=r):
            return f"({expr_py(l, names)} or {expr_py(r, names)})"
        case Binary(op="/", left=l, right=r):
            return f"_div({expr_py(l, names)}, {expr_py(r, names)})"
        case Binary(op="%", left=l, right=r):
            return f"_mod({expr_py(l, names)}, {expr_py(r, names)})"
        case Binary(op=op, left=l, right=r) if op in ("+", "-", "*"):
            return f"_ck({expr_py(l, names)} {op} {expr_py(r, names)})"
        case Binary(op=op, left=l, right=r) if op in _CMP:
            return f"({expr_py(l, names)} {_CMP[op]} {expr_py(r, names)})"
        case Unary(op="!", operand=x):
            return f"(not {expr_py(x, names)})"
        case Unary(op="-", operand=x):
            return f"_ck(-{expr_py(x, names)})"
        case Call(func="length", args=(a,)):
            return f"len({expr_py(a, names)})"
    raise TypeError(f"cannot compile {e!r}")


def compile_expr(e: Expr, params: tuple) -> callable:
    """Callable taking the MJ variables in `params` as positional arguments."""
    names = {p: f"p{i}" for i, p in enumerate(params)}
    args = ", ".join(names[p] for p in params)
    src = f"def _fn({args}):\n    return {expr_py(e, names)}\n"
    ns = dict(_HELPERS)
    exec(src, ns)
    return ns["_fn"]


def compile_fold(fold) -> callable:
    """fn(acc, v) applying one fold step."""
    return compile_expr(fold.expr, ("value", "v"))


def compile_mapper(candidate, input_names: tuple) -> callable:
    """fn(data, lo, hi, inputs) -> list of (key, value) pairs for the global
    index range [lo, hi), in (index, emit position) order.

    `inputs` is a dict of loop-constant input bindings; the data collection
    and counter are bound per index.
    """
    names = {candidate.data_var: "data", candidate.counter: "i"}
    for k, n in enumerate(input_names):
        names[n] = f"in{k}"
    lines = ["def _mapper(data, lo, hi, inputs):"]
    for k, n in enumerate(input_names):
        lines.append(f"    in{k} = inputs[{n!r}]")
    lines.append("    out = []")
    lines.append("    ap = out.append")
    lines.append("    for i in range(lo, hi):")
    for emit in candidate.emits:
        comps = [expr_py(k, names) for k in emit.key]
        key = comps[0] if len(comps) == 1 else "(" + ", ".join(comps) + ("," if len(comps) == 1 else "") + ")"
        pair = f"({key}, {expr_py(emit.value, names)})"
        if emit.guard is None:
            lines.append(f"        ap({pair})")
        else:
            lines.append(f"        if {expr_py(emit.guard, names)}:")
            lines.append(f"            ap({pair})")
    lines.append("    return out")
    src = "\n".join(lines) + "\n"
    ns = dict(_HELPERS)
    exec(src, ns)
    return ns["_mapper"]
