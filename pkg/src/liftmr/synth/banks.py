"""Vectorized expression banks for the synthesis search.

Every grammar expression is evaluated once over all (context, index) points
of the bounded domain; expressions with identical value/trap signatures are
observationally equivalent for the whole search, so only the first (cheapest,
earliest-generated) representative of each class is kept. Signatures are
numpy arrays; traps (out-of-bounds, division by zero, overflow) are masked.
"""

from __future__ import annotations

import numpy as np
from dataclasses import dataclass, field

from ..lang.ast import Binary, Call, Expr, Index, IntLit, StrLit, Var, INT, STR
from ..specgen import GrammarSpec

_SENTINEL = np.int64(np.iinfo(np.int64).min)


@dataclass
class PointSpace:
    """Flattened (context, index) points plus per-point columns."""

    ctxs: list
    offsets: np.ndarray  # start of each ctx's points
    n_points: int
    counter_col: np.ndarray
    len_col: np.ndarray
    base_col: np.ndarray  # offset of the owning ctx, per point
    data_col: np.ndarray  # data element per point (int value or token code)
    input_cols: dict  # name -> column
    tokens: list  # code -> token string
    token_code: dict  # token string -> code

    def flat(self, ctx_idx: int, index: int) -> int:
        return int(self.offsets[ctx_idx]) + index

    def decode(self, code: int) -> str:
        return self.tokens[code]


def build_point_space(template, ctxs) -> PointSpace:
    tokens: list = []
    token_code: dict = {}

    def code_of(tok: str) -> int:
        if tok not in token_code:
            token_code[tok] = len(tokens)
            tokens.append(tok)
        return token_code[tok]

    offsets = np.zeros(len(ctxs), dtype=np.int64)
    total = 0
    for k, ctx in enumerate(ctxs):
        offsets[k] = total
        total += len(ctx.data)

    counter_col = np.empty(total, dtype=np.int64)
    len_col = np.empty(total, dtype=np.int64)
    base_col = np.empty(total, dtype=np.int64)
    data_col = np.empty(total, dtype=np.int64)
    str_data = template.data_elem == STR
    input_names = [name for name, _ in template.scalar_inputs]
    input_cols = {name: np.empty(total, dtype=np.int64) for name in input_names}

    for k, ctx in enumerate(ctxs):
        n = len(ctx.data)
        if n == 0:
            continue
        lo = int(offsets[k])
        hi = lo + n
        counter_col[lo:hi] = np.arange(n, dtype=np.int64)
        len_col[lo:hi] = n
        base_col[lo:hi] = lo
        if str_data:
            data_col[lo:hi] = [code_of(x) for x in ctx.data]
        else:
            data_col[lo:hi] = ctx.data
        bound = ctx.inputs_dict
        for name in input_names:
            v = bound[name]
            input_cols[name][lo:hi] = code_of(v) if isinstance(v, str) else int(v)

    return PointSpace(
        ctxs=ctxs,
        offsets=offsets,
        n_points=total,
        counter_col=counter_col,
        len_col=len_col,
        base_col=base_col,
        data_col=data_col,
        input_cols=input_cols,
        tokens=tokens,
        token_code=token_code,
    )


@dataclass
class Entry:
    expr: Expr
    size: int
    depth: int
    kind: str  # 'int' | 'bool' | 'str'
    vals: np.ndarray
    traps: np.ndarray
    order: int  # generation sequence; the lexicographic tie-break

    @property
    def trap_free(self) -> bool:
        return not self.traps.any()


def _sig_key(kind: str, vals: np.ndarray, traps: np.ndarray) -> bytes:
    canon = vals.copy()
    canon[traps] = _SENTINEL
    return kind.encode() + canon.tobytes() + traps.tobytes()


class _Dedup:
    def __init__(self):
        self.seen = set()
        self.order = 0

    def admit(self, kind, vals, traps) -> bool:
        key = _sig_key(kind, vals, traps)
        if key in self.seen:
            return False
        self.seen.add(key)
        return True


def _trunc_div(a: np.ndarray, b: np.ndarray):
    traps = b == 0
    safe = np.where(traps, 1, b)
    q = a // safe
    r = a - q * safe
    adjust = (r != 0) & ((a < 0) != (safe < 0))
    return q + adjust, traps


def _apply_int_op(op: str, a, b, atr, btr):
    traps = atr | btr
    if op == "+":
        with np.errstate(over="ignore"):
            s = a + b
        traps = traps | (((a ^ s) & (b ^ s)) < 0)
        return s, traps
    if op == "-":
        with np.errstate(over="ignore"):
            s = a - b
        traps = traps | (((a ^ b) & (a ^ s)) < 0)
        return s, traps
    if op == "*":
        with np.errstate(over="ignore"):
            p = a * b
        nz = b != 0
        bad = np.zeros_like(nz)
        if nz.any():
            safe = np.where(nz, b, 1)
            bad = nz & (p // safe != np.where(nz, a, 0))
        return p, traps | bad
    if op == "/":
        q, div_traps = _trunc_div(a, b)
        return q, traps | div_traps
    if op == "%":
        q, div_traps = _trunc_div(a, b)
        with np.errstate(over="ignore"):
            r = a - q * b
        return r, traps | div_traps
    raise ValueError(op)


@dataclass
class Banks:
    ints: list  # of Entry, in enumeration order
    bools: list  # value-position booleans (may trap)
    guards: list  # trap-free booleans, enumeration order
    strs: list

    def of_kind(self, kind: str) -> list:
        return {"int": self.ints, "bool": self.bools, "str": self.strs}[kind]


def build_banks(
    g: GrammarSpec,
    space: PointSpace,
    int_cap: int = 9,
    bool_cap: int = 9,
    cmp_operand_cap: int = 5,
) -> Banks:
    """Enumerate expressions by (size, production order) with observational
    dedup. The recursion bound limits nesting depth; the size caps bound how
    far each tier is materialized."""
    cap = int_cap
    dedup = _Dedup()
    order = [0]

    def entry(expr, size, depth, kind, vals, traps) -> Entry | None:
        if not dedup.admit(kind, vals, traps):
            return None
        e = Entry(expr, size, depth, kind, vals, traps, order[0])
        order[0] += 1
        return e

    P = space.n_points
    zeros_t = np.zeros(P, dtype=bool)

    ints: list = []
    by_size_int: dict = {}

    def add_int(e: Entry | None):
        if e is not None:
            ints.append(e)
            by_size_int.setdefault(e.size, []).append(e)

    # terminals: counter, literals, scalar int inputs
    add_int(entry(Var(g.counter), 1, 0, "int", space.counter_col, zeros_t))
    for lit in g.int_literals:
        add_int(entry(IntLit(lit), 1, 0, "int", np.full(P, lit, dtype=np.int64), zeros_t))
    for name in g.int_vars:
        add_int(entry(Var(name), 1, 0, "int", space.input_cols[name], zeros_t))

    str_entries: list = []
    if g.data_elem == STR or g.str_vars or g.str_literals:
        for name in g.str_vars:
            e = entry(Var(name), 1, 0, "str", space.input_cols[name], zeros_t)
            if e is not None:
                str_entries.append(e)
        for lit in g.str_literals:
            code = space.token_code.get(lit)
            if code is None:
                space.token_code[lit] = code = len(space.tokens)
                space.tokens.append(lit)
            e = entry(StrLit(lit), 1, 0, "str", np.full(P, code, dtype=np.int64), zeros_t)
            if e is not None:
                str_entries.append(e)

    def gather(idx_entry: Entry):
        idx = idx_entry.vals
        bad = idx_entry.traps | (idx < 0) | (idx >= space.len_col)
        pos = np.where(bad, space.base_col, space.base_col + idx)
        return space.data_col[pos], bad

    data_kind = "int" if g.data_elem == INT else "str"

    # grow by size; data[e] and binary operators
    for size in range(2, cap + 1):
        batch = []
        for idx_entry in by_size_int.get(size - 2, ()):
            if idx_entry.depth + 1 > g.recursion_bound:
                continue
            vals, traps = gather(idx_entry)
            e = entry(
                Index(Var(g.data_var), idx_entry.expr),
                size,
                idx_entry.depth + 1,
                data_kind,
                vals,
                traps,
            )
            if e is not None:
                (batch if data_kind == "int" else str_entries).append(e)
        for op in g.int_ops:
            for sa in range(1, size - 1):
                sb = size - 1 - sa
                for ea in by_size_int.get(sa, ()):
                    for eb in by_size_int.get(sb, ()):
                        depth = max(ea.depth, eb.depth) + 1
                        if depth > g.recursion_bound:
                            continue
                        vals, traps = _apply_int_op(op, ea.vals, eb.vals, ea.traps, eb.traps)
                        e = entry(Binary(op, ea.expr, eb.expr), size, depth, "int", vals, traps)
                        if e is not None:
                            batch.append(e)
        for e in batch:
            add_int(e)

    ints.sort(key=lambda e: (e.size, e.order))
    str_entries.sort(key=lambda e: (e.size, e.order))

    # boolean expressions
    bools: list = []
    by_size_bool: dict = {}

    def add_bool(e: Entry | None):
        if e is not None:
            bools.append(e)
            by_size_bool.setdefault(e.size, []).append(e)

    from ..lang.ast import BoolLit

    add_bool(entry(BoolLit(True), 1, 0, "bool", np.ones(P, dtype=bool), zeros_t))
    add_bool(entry(BoolLit(False), 1, 0, "bool", np.zeros(P, dtype=bool), zeros_t))

    int_by_size = {s: v for s, v in by_size_int.items() if s <= cmp_operand_cap}

    def cmp_sig(op, a, b):
        if op == "==":
            return a == b
        if op == "!=":
            return a != b
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        return a >= b

    str_by_size: dict = {}
    for e in str_entries:
        str_by_size.setdefault(e.size, []).append(e)

    for size in range(3, bool_cap + 1):
        batch = []
        for op in g.cmp_ops:
            for sa in range(1, size - 1):
                sb = size - 1 - sa
                for ea in int_by_size.get(sa, ()):
                    for eb in int_by_size.get(sb, ()):
                        depth = max(ea.depth, eb.depth) + 1
                        if depth > g.recursion_bound:
                            continue
                        vals = cmp_sig(op, ea.vals, eb.vals)
                        e = entry(
                            Binary(op, ea.expr, eb.expr), size, depth, "bool", vals, ea.traps | eb.traps
                        )
                        if e is not None:
                            batch.append(e)
        if g.str_eq:
            for sa in range(1, size - 1):
                sb = size - 1 - sa
                for ea in str_by_size.get(sa, ()):
                    for eb in str_by_size.get(sb, ()):
                        depth = max(ea.depth, eb.depth) + 1
                        if depth > g.recursion_bound:
                            continue
                        e = entry(
                            Binary("==", ea.expr, eb.expr),
                            size,
                            depth,
                            "bool",
                            ea.vals == eb.vals,
                            ea.traps | eb.traps,
                        )
                        if e is not None:
                            batch.append(e)
        for op in g.logic_ops:
            if op == "!":
                for ex in by_size_bool.get(size - 1, ()):
                    if ex.depth + 1 > g.recursion_bound:
                        continue
                    from ..lang.ast import Unary

                    e = entry(Unary("!", ex.expr), size, ex.depth + 1, "bool", ~ex.vals, ex.traps)
                    if e is not None:
                        batch.append(e)
                continue
            for sa in range(1, size - 1):
                sb = size - 1 - sa
                for ea in by_size_bool.get(sa, ()):
                    for eb in by_size_bool.get(sb, ()):
                        depth = max(ea.depth, eb.depth) + 1
                        if depth > g.recursion_bound:
                            continue
                        vals = (ea.vals & eb.vals) if op == "&&" else (ea.vals | eb.vals)
                        e = entry(
                            Binary(op, ea.expr, eb.expr), size, depth, "bool", vals, ea.traps | eb.traps
                        )
                        if e is not None:
                            batch.append(e)
        for e in batch:
            add_bool(e)

    bools.sort(key=lambda e: (e.size, e.order))
    guards = [e for e in bools if e.trap_free]
    return Banks(ints=ints, bools=bools, guards=guards, strs=str_entries)
