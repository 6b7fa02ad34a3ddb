"""Candidate summaries: guarded emits, per-type folds and a counter range.

Candidate expressions reuse the MJ expression AST over a small terminal set:
the data collection (indexed), the loop counter, loop-constant scalar inputs
and literals. Fold expressions use the reserved variables `value` (the
accumulator) and `v` (the next element).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..lang.ast import (
    Binary,
    BoolLit,
    Call,
    Expr,
    Index,
    IntLit,
    StrLit,
    Unary,
    Var,
)
from ..lang.errors import MJTrap
from ..lang.interp import apply_binop

FOLD_ACC = "value"
FOLD_ELEM = "v"


@dataclass(frozen=True)
class Emit:
    guard: Optional[Expr]  # None means unconditional
    key: tuple  # 1-3 scalar expressions; single component keys are bare scalars
    value: Expr


@dataclass(frozen=True)
class Fold:
    value_type: str  # 'int' | 'bool'
    init: object
    expr: Expr  # over FOLD_ACC, FOLD_ELEM and literals


@dataclass(frozen=True)
class CounterExp:
    lo: Expr
    mid: Expr
    hi: Expr  # lo <= mid <= hi


@dataclass(frozen=True)
class Candidate:
    emits: tuple  # of Emit
    folds: tuple  # of Fold, at most one per value type
    counter_exp: CounterExp
    counter: str
    data_var: str

    def fold_for(self, value) -> Fold:
        kind = "bool" if isinstance(value, bool) else "int"
        for f in self.folds:
            if f.value_type == kind:
                return f
        raise MJTrap("no-fold", f"no {kind} fold in candidate")


# ---------------------------------------------------------------------------
# Expression evaluation (small closed terms; no user function calls)


def eval_expr(e: Expr, env: dict):
    match e:
        case IntLit(value=v) | BoolLit(value=v) | StrLit(value=v):
            return v
        case Var(name=n):
            return env[n]
        case Index(array=a, index=i):
            arr = eval_expr(a, env)
            idx = eval_expr(i, env)
            if idx < 0 or idx >= len(arr):
                raise MJTrap("index-out-of-bounds", f"{idx} not in [0, {len(arr)})")
            return arr[idx]
        case Binary(op="&&", left=l, right=r):
            return eval_expr(l, env) and eval_expr(r, env)
        case Binary(op="||", left=l, right=r):
            return eval_expr(l, env) or eval_expr(r, env)
        case Binary(op=op, left=l, right=r):
            return apply_binop(op, eval_expr(l, env), eval_expr(r, env))
        case Unary(op="!", operand=x):
            return not eval_expr(x, env)
        case Unary(op="-", operand=x):
            return -eval_expr(x, env)
        case Call(func="length", args=(a,)):
            return len(eval_expr(a, env))
    raise TypeError(f"cannot evaluate candidate expression {e!r}")


def apply_fold(fold: Fold, acc, v):
    return eval_expr(fold.expr, {FOLD_ACC: acc, FOLD_ELEM: v})


def fold_all(fold: Fold, values) -> object:
    acc = fold.init
    for v in values:
        acc = apply_fold(fold, acc, v)
    return acc


def eval_candidate(c: Candidate, data, prefix_len: int, inputs: Optional[dict] = None) -> dict:
    """Apply fm at every index below prefix_len, group by key, fold each group.

    Returns the associative array key -> folded value. Folds run in emission
    order (index, then emit position). Raises MJTrap on expression traps;
    callers treat that as a counterexample.
    """
    if prefix_len > len(data):
        raise ValueError("prefix_len exceeds the data length")
    env = dict(inputs) if inputs else {}
    env[c.data_var] = data
    groups: dict = {}
    for i in range(prefix_len):
        env[c.counter] = i
        for emit in c.emits:
            if emit.guard is not None and not eval_expr(emit.guard, env):
                continue
            comps = tuple(eval_expr(k, env) for k in emit.key)
            key = comps[0] if len(comps) == 1 else comps
            groups.setdefault(key, []).append(eval_expr(emit.value, env))
    return {key: fold_all(c.fold_for(vals[0]), vals) for key, vals in groups.items()}


def check_commutative_associative(fold: Fold, values, max_len: int = 4) -> bool:
    """True iff the fold's result is invariant under every permutation and
    every grouping (pre-folded blocks, as a combiner would produce) of value
    lists up to max_len over the given finite value domain."""
    from itertools import combinations_with_replacement, permutations

    from ..pycompile import compile_fold

    try:
        fn = compile_fold(fold)
    except TypeError:
        return False

    def fold_list(vals, start):
        acc = start
        for v in vals:
            acc = fn(acc, v)
        return acc

    try:
        for n in range(max_len + 1):
            for multiset in combinations_with_replacement(values, n):
                ref = fold_list(multiset, fold.init)
                for perm in set(permutations(multiset)):
                    if fold_list(perm, fold.init) != ref:
                        return False
                for cuts in range(1 << max(0, n - 1)):
                    blocks = []
                    cur = [multiset[0]] if n else []
                    for j in range(1, n):
                        if cuts >> (j - 1) & 1:
                            blocks.append(cur)
                            cur = []
                        cur.append(multiset[j])
                    if n:
                        blocks.append(cur)
                    partials = [fold_list(b, fold.init) for b in blocks]
                    if fold_list(partials, fold.init) != ref:
                        return False
    except MJTrap:
        return False
    return True


def counter_exp_holds(c: Candidate, i: int, data, inputs: Optional[dict] = None) -> bool:
    env = dict(inputs) if inputs else {}
    env[c.data_var] = data
    env[c.counter] = i
    lo = eval_expr(c.counter_exp.lo, env)
    mid = eval_expr(c.counter_exp.mid, env)
    hi = eval_expr(c.counter_exp.hi, env)
    return lo <= mid <= hi


# ---------------------------------------------------------------------------
# Cost and ordering


def expr_size(e: Expr) -> int:
    """Total AST node count; the enumeration cost of an expression."""
    match e:
        case IntLit() | BoolLit() | StrLit() | Var():
            return 1
        case Index(array=a, index=i):
            return 1 + expr_size(a) + expr_size(i)
        case Binary(left=l, right=r):
            return 1 + expr_size(l) + expr_size(r)
        case Unary(operand=x):
            return 1 + expr_size(x)
        case Call(args=args):
            return 1 + sum(expr_size(a) for a in args)
    raise TypeError(f"no size for {e!r}")


def expr_depth(e: Expr) -> int:
    """Operator nesting depth; terminals are depth 0. This is what the
    grammar's recursion bound limits."""
    match e:
        case IntLit() | BoolLit() | StrLit() | Var():
            return 0
        case Index(array=a, index=i):
            return 1 + max(expr_depth(a), expr_depth(i))
        case Binary(left=l, right=r):
            return 1 + max(expr_depth(l), expr_depth(r))
        case Unary(operand=x):
            return 1 + expr_depth(x)
        case Call(args=args):
            return 1 + max((expr_depth(a) for a in args), default=0)
    raise TypeError(f"no depth for {e!r}")


def expr_text(e: Expr) -> str:
    """Parenthesized prefix form; canonical and totally ordered, so it doubles
    as the lexicographic tie-breaker for equal-cost candidates."""
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
            return f"(index {expr_text(a)} {expr_text(i)})"
        case Binary(op=op, left=l, right=r):
            return f"({op} {expr_text(l)} {expr_text(r)})"
        case Unary(op=op, operand=x):
            return f"({op} {expr_text(x)})"
        case Call(func=f, args=args):
            inner = " ".join(expr_text(a) for a in args)
            return f"({f} {inner})"
    raise TypeError(f"no text for {e!r}")


def emit_cost(e: Emit) -> int:
    # a missing guard serializes as the literal `true`, so it counts one node
    guard = 1 if e.guard is None else expr_size(e.guard)
    key = sum(expr_size(k) for k in e.key) + (1 if len(e.key) > 1 else 0)
    return 1 + guard + key + expr_size(e.value)


def fold_cost(f: Fold) -> int:
    return 1 + expr_size(f.expr)


def counter_exp_cost(ce: CounterExp) -> int:
    return 1 + expr_size(ce.lo) + expr_size(ce.mid) + expr_size(ce.hi)


def candidate_cost(c: Candidate) -> int:
    return (
        sum(emit_cost(e) for e in c.emits)
        + sum(fold_cost(f) for f in c.folds)
        + counter_exp_cost(c.counter_exp)
    )


def emit_text(e: Emit) -> str:
    guard = "true" if e.guard is None else expr_text(e.guard)
    key = expr_text(e.key[0]) if len(e.key) == 1 else "(tuple " + " ".join(expr_text(k) for k in e.key) + ")"
    return f"guard {guard} key {key} value {expr_text(e.value)}"


def candidate_lex_key(c: Candidate) -> tuple:
    """Deterministic tie-break among equal-cost candidates."""
    return (
        tuple(emit_text(e) for e in c.emits),
        tuple((f.value_type, str(f.init), expr_text(f.expr)) for f in c.folds),
        expr_text(c.counter_exp.lo),
        expr_text(c.counter_exp.mid),
        expr_text(c.counter_exp.hi),
    )


def candidate_order_key(c: Candidate) -> tuple:
    return (candidate_cost(c), candidate_lex_key(c))


# ---------------------------------------------------------------------------
# Grammar membership


def _scalar_expr_in_grammar(e: Expr, g, expect: str) -> bool:
    """Derivability of a scalar expression from the grammar's productions."""
    from ..lang.ast import INT, STR

    if expr_depth(e) > g.recursion_bound:
        return False

    def check(e, expect) -> bool:
        match e:
            case IntLit(value=v):
                return expect == "int" and v in g.int_literals
            case BoolLit():
                return expect == "bool"
            case StrLit(value=v):
                return expect == "str" and v in g.str_literals
            case Var(name=n):
                if expect == "int":
                    return n == g.counter or n in g.int_vars
                if expect == "str":
                    return n in g.str_vars
                return False
            case Index(array=Var(name=a), index=i):
                elem = "int" if g.data_elem == INT else "str"
                return a == g.data_var and expect == elem and check(i, "int")
            case Binary(op=op, left=l, right=r):
                if op in g.int_ops:
                    return expect == "int" and check(l, "int") and check(r, "int")
                if op in g.cmp_ops:
                    if expect != "bool":
                        return False
                    if check(l, "int") and check(r, "int"):
                        return True
                    return g.str_eq and op == "==" and check(l, "str") and check(r, "str")
                if op in g.logic_ops:
                    return expect == "bool" and check(l, "bool") and check(r, "bool")
                return False
            case Unary(op="!", operand=x):
                return "!" in g.logic_ops and expect == "bool" and check(x, "bool")
            case _:
                return False

    return check(e, expect)


def candidate_in_grammar(c: Candidate, g, template=None) -> bool:
    """True when every part of the candidate is derivable from g within its
    recursion bound and emit budget."""
    if len(c.emits) > g.emit_budget:
        return False
    max_arity = min(3, 2 + g.key_extra_arity)
    for e in c.emits:
        if e.guard is not None and not _scalar_expr_in_grammar(e.guard, g, "bool"):
            return False
        if not 1 <= len(e.key) <= max_arity:
            return False
        for k in e.key:
            if not any(_scalar_expr_in_grammar(k, g, t) for t in ("int", "str")):
                return False
        if not any(_scalar_expr_in_grammar(e.value, g, t) for t in ("int", "bool")):
            return False
    for f in c.folds:
        ops = g.fold_int_ops if f.value_type == "int" else g.fold_bool_ops
        if not _fold_expr_ok(f.expr, g, ops, f.value_type):
            return False
    for term in (c.counter_exp.lo, c.counter_exp.mid, c.counter_exp.hi):
        if not _loop_term_ok(term, g):
            return False
    return True


def _fold_expr_ok(e: Expr, g, ops, value_type: str) -> bool:
    if expr_depth(e) > g.recursion_bound:
        return False

    def check(e) -> bool:
        match e:
            case Var(name=n):
                return n in (FOLD_ACC, FOLD_ELEM)
            case IntLit(value=v):
                return value_type == "int" and v in g.int_literals
            case BoolLit():
                return value_type == "bool"
            case Binary(op=op, left=l, right=r):
                return op in ops and check(l) and check(r)
            case _:
                return False

    return check(e)


def _loop_term_ok(e: Expr, g) -> bool:
    match e:
        case Var(name=n):
            return n == g.counter
        case IntLit():
            return True
        case Call(func="length", args=(Var(name=a),)):
            return a == g.data_var
        case _:
            return False
