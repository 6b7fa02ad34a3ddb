"""Generic cost-ordered candidate enumeration from a grammar.

Streams every candidate derivable from the GrammarSpec in nondecreasing cost
(total AST node count), ties broken by canonical serialization, without
duplicates. The stream is finite because the recursion bound caps expression
depth, and lazy: tier t is materialized only when tiers below it have been
yielded. The synthesis engine explores the same ordered space with factorized
pruning; this direct enumerator is the reference on small grammars.
"""

from __future__ import annotations

from typing import Iterator, Optional

from ..lang.ast import (
    Binary,
    BoolLit,
    Call,
    Index,
    IntLit,
    StrLit,
    Unary,
    Var,
    INT,
    STR,
)
from ..specgen import GrammarSpec
from .candidates import (
    Candidate,
    CounterExp,
    Emit,
    Fold,
    candidate_lex_key,
    counter_exp_cost,
    emit_cost,
    emit_text,
    expr_text,
    fold_cost,
)


def _max_expr_size(recursion_bound: int) -> int:
    return (1 << (recursion_bound + 1)) - 1


class _ExprTiers:
    """Expressions of one kind grouped by size; tiers built on demand."""

    def __init__(self, g: GrammarSpec, kind: str, ints=None, strs=None):
        self.g = g
        self.kind = kind
        self.ints = ints or self
        self.strs = strs
        self.by_size: dict = {}
        self.depth: dict = {}
        self.seen: set = set()
        self.built_to = 0
        self.limit = _max_expr_size(g.recursion_bound)

    def tier(self, size: int) -> list:
        if size < 1 or size > self.limit:
            return []
        while self.built_to < size:
            self.built_to += 1
            self._build(self.built_to)
        return self.by_size.get(size, [])

    def _admit(self, e, depth: int, size: int):
        if depth > self.g.recursion_bound:
            return
        key = expr_text(e)
        if key in self.seen:
            return
        self.seen.add(key)
        self.depth[key] = depth
        self.by_size.setdefault(size, []).append(e)

    def _d(self, e) -> int:
        return self.depth[expr_text(e)]

    def _build(self, size: int) -> None:
        g = self.g
        if self.kind == "int":
            if size == 1:
                self._admit(Var(g.counter), 0, 1)
                for v in g.int_literals:
                    self._admit(IntLit(v), 0, 1)
                for n in g.int_vars:
                    self._admit(Var(n), 0, 1)
                return
            if g.data_elem == INT:
                for sub in self.tier(size - 2):
                    self._admit(Index(Var(g.data_var), sub), self._d(sub) + 1, size)
            for op in g.int_ops:
                for sa in range(1, size - 1):
                    for ea in self.tier(sa):
                        for eb in self.tier(size - 1 - sa):
                            self._admit(
                                Binary(op, ea, eb), max(self._d(ea), self._d(eb)) + 1, size
                            )
        elif self.kind == "str":
            if size == 1:
                for n in g.str_vars:
                    self._admit(Var(n), 0, 1)
                for v in g.str_literals:
                    self._admit(StrLit(v), 0, 1)
                return
            if g.data_elem == STR:
                for sub in self.ints.tier(size - 2):
                    self._admit(Index(Var(g.data_var), sub), self.ints._d(sub) + 1, size)
        else:  # bool
            if size == 1:
                self._admit(BoolLit(True), 0, 1)
                self._admit(BoolLit(False), 0, 1)
                return
            for op in g.cmp_ops:
                for sa in range(1, size - 1):
                    for ea in self.ints.tier(sa):
                        for eb in self.ints.tier(size - 1 - sa):
                            self._admit(
                                Binary(op, ea, eb),
                                max(self.ints._d(ea), self.ints._d(eb)) + 1,
                                size,
                            )
            if g.str_eq and self.strs is not None:
                for sa in range(1, size - 1):
                    for ea in self.strs.tier(sa):
                        for eb in self.strs.tier(size - 1 - sa):
                            self._admit(
                                Binary("==", ea, eb),
                                max(self.strs._d(ea), self.strs._d(eb)) + 1,
                                size,
                            )
            for op in g.logic_ops:
                if op == "!":
                    for ex in self.tier(size - 1):
                        self._admit(Unary("!", ex), self._d(ex) + 1, size)
                    continue
                for sa in range(1, size - 1):
                    for ea in self.tier(sa):
                        for eb in self.tier(size - 1 - sa):
                            self._admit(
                                Binary(op, ea, eb), max(self._d(ea), self._d(eb)) + 1, size
                            )


class _EmitPool:
    """Emits grouped by cost, built on demand; each entry carries the value
    kind so folds can be matched."""

    def __init__(self, g: GrammarSpec, ints, strs, bools):
        self.g = g
        self.ints = ints
        self.strs = strs
        self.bools = bools
        self.by_cost: dict = {}
        self.built_to = 0
        smax = _max_expr_size(g.recursion_bound)
        arity = min(3, 2 + g.key_extra_arity)
        self.limit = 1 + smax + (arity * smax + 1) + smax

    def tier(self, cost: int) -> list:
        if cost > self.limit:
            return []
        while self.built_to < cost:
            self.built_to += 1
            self._build(self.built_to)
        return self.by_cost.get(cost, [])

    def _scalars(self, size: int) -> list:
        return self.ints.tier(size) + self.strs.tier(size)

    def _keys(self, cost: int) -> list:
        """Key tuples of the given total cost (tuple node included for 2+)."""
        out = [(e,) for e in self._scalars(cost)]
        max_arity = min(3, 2 + self.g.key_extra_arity)
        if max_arity >= 2:
            for sa in range(1, cost - 1):
                for ea in self._scalars(sa):
                    for eb in self._scalars(cost - 1 - sa):
                        out.append((ea, eb))
        if max_arity >= 3:
            for sa in range(1, cost - 2):
                for sb in range(1, cost - 1 - sa):
                    sc = cost - 1 - sa - sb
                    for ea in self._scalars(sa):
                        for eb in self._scalars(sb):
                            for ec in self._scalars(sc):
                                out.append((ea, eb, ec))
        return out

    def _build(self, cost: int) -> None:
        batch = []
        for gcost in range(1, cost - 1):
            guards = [None] if gcost == 1 else []
            # a literal-true guard is canonically the unguarded form
            guards += [
                e for e in self.bools.tier(gcost) if not isinstance(e, BoolLit) or not e.value
            ]
            if not guards:
                continue
            for kcost in range(1, cost - gcost):
                vcost = cost - 1 - gcost - kcost
                if vcost < 1:
                    continue
                keys = self._keys(kcost)
                if not keys:
                    continue
                values = [(e, "int") for e in self.ints.tier(vcost)] + [
                    (e, "bool") for e in self.bools.tier(vcost)
                ]
                for guard in guards:
                    for key in keys:
                        for value, vkind in values:
                            batch.append((Emit(guard, key, value), vkind))
        if batch:
            batch.sort(key=lambda t: emit_text(t[0]))
            self.by_cost[cost] = batch


def _fold_pool(g: GrammarSpec, kind: str) -> list:
    """All folds of one value kind, (cost, text)-ordered; the FoldExp grammar
    recurses to the same bound as the other expression grammars."""
    tiers: dict = {}
    seen: set = set()
    if kind == "int":
        terms = [Var("value"), Var("v")] + [IntLit(v) for v in g.int_literals]
        ops = g.fold_int_ops
        inits = sorted(set(g.int_literals), key=lambda x: (x != 0, x))
    else:
        terms = [Var("value"), Var("v"), BoolLit(True), BoolLit(False)]
        ops = g.fold_bool_ops
        inits = [False, True]

    def admit(e, depth, size):
        if depth > g.recursion_bound:
            return
        key = expr_text(e)
        if key in seen:
            return
        seen.add(key)
        tiers.setdefault(size, []).append((e, depth))

    for t in terms:
        admit(t, 0, 1)
    limit = _max_expr_size(g.recursion_bound)
    for size in range(3, limit + 1):
        for op in ops:
            for sa in range(1, size - 1):
                for ea, da in tiers.get(sa, []):
                    for eb, db in tiers.get(size - 1 - sa, []):
                        admit(Binary(op, ea, eb), max(da, db) + 1, size)
    folds = [
        Fold(kind, init, e)
        for size in sorted(tiers)
        for e, _ in tiers[size]
        for init in inits
    ]
    folds.sort(key=lambda f: (fold_cost(f), expr_text(f.expr), str(f.init)))
    return folds


def _counter_exps(g: GrammarSpec) -> list:
    terms = (
        [Var(g.counter)]
        + [IntLit(v) for v in g.int_literals]
        + [Call("length", (Var(g.data_var),))]
    )
    out = []
    for lo in terms:
        for mid in terms:
            for hi in terms:
                ce = CounterExp(lo, mid, hi)
                out.append((counter_exp_cost(ce), ce))
    out.sort(key=lambda t: (t[0], expr_text(t[1].lo), expr_text(t[1].mid), expr_text(t[1].hi)))
    return out


def _emit_multisets(pool: _EmitPool, count: int, cost: int, start_cost: int = 1, start_idx: int = 0):
    """Nondecreasing (cost, index) combinations of `count` emits totaling cost."""
    if count == 0:
        if cost == 0:
            yield ()
        return
    min_rest = count - 1
    for c in range(start_cost, cost - min_rest + 1):
        entries = pool.tier(c)
        first = start_idx if c == start_cost else 0
        for i in range(first, len(entries)):
            for rest in _emit_multisets(pool, count - 1, cost - c, c, i):
                yield ((c, i, entries[i]),) + rest


def enumerate_candidates(g: GrammarSpec, max_cost: Optional[int] = None) -> Iterator[Candidate]:
    """The ordered candidate stream for a grammar.

    Lazy in the total cost; pass max_cost to bound the walk early (the stream
    terminates either way since the depth-bounded language is finite).
    """
    ints = _ExprTiers(g, "int")
    strs = _ExprTiers(g, "str", ints=ints)
    bools = _ExprTiers(g, "bool", ints=ints, strs=strs)
    pool = _EmitPool(g, ints, strs, bools)
    folds = {"int": _fold_pool(g, "int"), "bool": _fold_pool(g, "bool")}
    ces = _counter_exps(g)
    if not ces:
        return

    max_fold = max(
        (fold_cost(f) for k in folds for f in folds[k]), default=0
    )
    hard_limit = g.emit_budget * pool.limit + 2 * max_fold + max(c for c, _ in ces)
    limit = min(max_cost, hard_limit) if max_cost is not None else hard_limit

    for total in range(1, limit + 1):
        tier_out = []
        for count in range(1, g.emit_budget + 1):
            for ce_cost, ce in ces:
                if ce_cost >= total:
                    break
                emit_budget_cost = total - ce_cost
                # fold kinds depend on the emit combination, so split by them
                for fold_total in range(0, emit_budget_cost):
                    emits_cost = emit_budget_cost - fold_total
                    for chosen in _emit_multisets(pool, count, emits_cost):
                        kinds = tuple(sorted({vk for _, _, (_, vk) in chosen}))
                        combos = _fold_combos(folds, kinds, fold_total)
                        for fold_combo in combos:
                            cand = Candidate(
                                emits=tuple(e for _, _, (e, _) in chosen),
                                folds=fold_combo,
                                counter_exp=ce,
                                counter=g.counter,
                                data_var=g.data_var,
                            )
                            tier_out.append((candidate_lex_key(cand), cand))
        tier_out.sort(key=lambda t: t[0])
        for _, cand in tier_out:
            yield cand


def _fold_combos(folds: dict, kinds: tuple, total: int):
    if not kinds:
        return [()] if total == 0 else []
    if len(kinds) == 1:
        return [(f,) for f in folds[kinds[0]] if fold_cost(f) == total]
    out = []
    for fa in folds[kinds[0]]:
        ca = fold_cost(fa)
        if ca >= total:
            continue
        for fb in folds[kinds[1]]:
            if ca + fold_cost(fb) == total:
                out.append((fa, fb))
    return out
