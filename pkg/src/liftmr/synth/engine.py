"""CEGIS synthesis engine.

The search is factorized: with keys structured as (output id, components...),
an emit contributes to exactly one output, and the bounded Hoare check
decomposes into independent per-output requirements over the original loop's
sequential traces. Each trace transition gives a window of at most `stride`
indices whose selected emissions must update that output's pinned state; a
(key, value) pair is feasible when every window has a selectable subset, and
the guard is then the cheapest trap-free boolean whose fire-set picks a valid
subset in every window. Candidates are explored in nondecreasing cost with a
deterministic tie-break, counterexample contexts are cached and re-checked
first, and the assembled winner must pass the full bounded check before it
becomes a Summary.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Optional

from ..analyzer import LoopFragment, VarRoles
from ..lang.ast import BoolLit, Call, IntLit, Var
from ..lang.errors import MJTrap
from ..pycompile import compile_fold
from ..specgen import (
    ArrayShape,
    DEFAULT_POLICY,
    DEFAULT_RECURSION_BOUND,
    EmptyMap,
    ExpansionPolicy,
    FreshSymbol,
    GrammarSpec,
    MapShape,
    PolicyExhausted,
    ScalarShape,
    SummaryTemplate,
    TemplateError,
    gen_grammar,
    gen_precondition,
    gen_template,
)
from .banks import Banks, Entry, PointSpace, build_banks, build_point_space
from .candidates import (
    Candidate,
    CounterExp,
    Emit,
    Fold,
    candidate_cost,
    candidate_lex_key,
    emit_cost,
    emit_text,
    expr_size,
)
from .checker import check_bounded, sequential_trace
from .domain import BoundedDomain, Context, contexts, search_contexts


def _ce_context(template, ce) -> Context:
    sym_names = {
        init.name
        for _, init in template.precondition.bindings
        if isinstance(init, FreshSymbol)
    }
    return Context(
        data=ce.data,
        inputs=tuple((n, v) for n, v in ce.inputs if n not in sym_names),
        syms=tuple((n, v) for n, v in ce.inputs if n in sym_names),
    )

MAX_WINDOW_WIDTH = 8
MAX_FOLD_INITS = 6
PAIR_SEARCH_TIER_CAP = 8
PAIR_SEARCH_GUARDS = 40

# search-internal size caps per expression role; they grow with the grammar's
# recursion bound so every expansion strictly enlarges the explored language
KEY_SIZE_CAP = 5
COLLECTION_VALUE_SIZE_CAP = 5
SCALAR_VALUE_SIZE_CAP = 9
CMP_OPERAND_SIZE_CAP = 5


def _role_caps(g: GrammarSpec, problems: list) -> tuple:
    extra = 2 * max(0, g.recursion_bound - 3)
    key_cap = KEY_SIZE_CAP + extra
    coll_val_cap = COLLECTION_VALUE_SIZE_CAP + extra
    scalar_val_cap = SCALAR_VALUE_SIZE_CAP + extra
    cmp_cap = CMP_OPERAND_SIZE_CAP + extra
    int_cap = max(key_cap, coll_val_cap, cmp_cap)
    if any(p.kind == "scalar" for p in problems):
        int_cap = max(int_cap, scalar_val_cap)
    return int_cap, cmp_cap, key_cap, coll_val_cap, scalar_val_cap


@dataclass(frozen=True)
class SynthConfig:
    domain: BoundedDomain = BoundedDomain()
    recursion_bound: Optional[int] = None  # override for the iteration-1 bound
    max_emits: Optional[int] = None
    timeout_s: Optional[float] = None
    workers: int = 1
    seed: int = 0
    max_iterations: Optional[int] = None
    policy: ExpansionPolicy = DEFAULT_POLICY


@dataclass(frozen=True)
class Summary:
    fragment_id: str
    candidate: Candidate
    template: SummaryTemplate
    domain: BoundedDomain
    iteration: int
    candidates_examined: int
    wall_ms: int = field(compare=False, default=0)


@dataclass(frozen=True)
class GiveUp:
    fragment_id: str
    reason: str  # policy-exhausted | timeout | unsupported-inputs | unsupported-output | unsupported-shape
    iteration: int
    candidates_examined: int
    wall_ms: int = field(compare=False, default=0)
    detail: str = ""


class _Timeout(Exception):
    pass


class _Clock:
    def __init__(self, timeout_s: Optional[float]):
        self.t0 = time.perf_counter()
        self.deadline = None if timeout_s is None else self.t0 + timeout_s

    def check(self):
        if self.deadline is not None and time.perf_counter() > self.deadline:
            raise _Timeout()

    @property
    def wall_ms(self) -> int:
        return int((time.perf_counter() - self.t0) * 1000)


# ---------------------------------------------------------------------------
# Per-output windows over the sequential traces


@dataclass
class Window:
    wid: int
    positions: tuple  # flat point indices, ascending
    from_state: object  # None means the fold-init default state
    to_state: object

    @property
    def full_mask(self) -> int:
        return (1 << len(self.positions)) - 1


@dataclass
class OutputProblem:
    spec: object  # OutputSpec
    kind: str  # 'scalar' | 'array' | 'map'
    value_kind: str  # 'int' | 'bool'
    windows: list  # of Window, all contexts concatenated
    ctx_window_slices: list  # per ctx: (start, end) into windows
    forced_init: object  # required fold init, _ANY_INIT, or _NO_INIT
    ever_changes: bool


_ANY_INIT = object()
_NO_INIT = object()


def _state_of(snapshot: dict, spec) -> object:
    return snapshot[spec.name]


def build_output_problems(template, ctxs, traces, space: PointSpace) -> list:
    problems = []
    for spec in template.outputs:
        match spec.shape:
            case ScalarShape(value_type=t):
                kind = "scalar"
                value_kind = t.kind
            case ArrayShape():
                kind = "array"
                value_kind = "int"
            case MapShape(val=v):
                kind = "map"
                value_kind = v.kind
        windows = []
        slices = []
        inits = set()
        ever_changes = False
        for k, (ctx, trace) in enumerate(zip(ctxs, traces)):
            start = len(windows)
            n = len(ctx.data)
            base = int(space.offsets[k])
            points = trace.points
            # entry window: [0, prefix(i0)) from the default state to S0
            i0, s0 = points[0]
            p0 = min(max(i0, 0), n)
            windows.append(
                Window(
                    wid=len(windows),
                    positions=tuple(range(base, base + p0)),
                    from_state=None,
                    to_state=_state_of(s0, spec),
                )
            )
            if kind == "scalar":
                inits.add(_state_of(s0, spec))
            elif kind == "array":
                inits.update(set(_state_of(s0, spec)) or {0})
            else:
                inits.add(() if not _state_of(s0, spec) else ("nonempty",))
            for (ia, sa), (ib, sb) in zip(points, points[1:]):
                pa, pb = min(ia, n), min(ib, n)
                fs, ts = _state_of(sa, spec), _state_of(sb, spec)
                if fs != ts:
                    ever_changes = True
                windows.append(
                    Window(
                        wid=len(windows),
                        positions=tuple(range(base + pa, base + pb)),
                        from_state=fs,
                        to_state=ts,
                    )
                )
            slices.append((start, len(windows)))

        if kind == "map":
            forced = _ANY_INIT if inits == {()} else _NO_INIT
        elif len(inits) == 1:
            forced = next(iter(inits))
        else:
            forced = _NO_INIT
        problems.append(
            OutputProblem(
                spec=spec,
                kind=kind,
                value_kind=value_kind,
                windows=windows,
                ctx_window_slices=slices,
                forced_init=forced,
                ever_changes=ever_changes,
            )
        )
    return problems


# ---------------------------------------------------------------------------
# Window simulation


def _sim_window(problem: OutputProblem, w: Window, contributions, fold_init, fold_fn) -> bool:
    """Does folding `contributions` (ordered (cell, value) pairs) into the
    window's from-state yield exactly its to-state?"""
    try:
        if problem.kind == "scalar":
            cur = fold_init if w.from_state is None else w.from_state
            for _, v in contributions:
                cur = fold_fn(cur, v)
            return cur == w.to_state
        if problem.kind == "array":
            src = w.from_state
            target = w.to_state
            length = len(target)
            touched = {}
            for c, v in contributions:
                if isinstance(c, bool) or not isinstance(c, int) or not 0 <= c < length:
                    return False
                base = touched.get(c)
                if base is None:
                    base = fold_init if src is None else src[c]
                touched[c] = fold_fn(base, v)
            for c, v in touched.items():
                if v != target[c]:
                    return False
            if src is None:
                for c, v in enumerate(target):
                    if v != fold_init and c not in touched:
                        return False
            else:
                for c in _array_diff(src, target):
                    if c not in touched:
                        return False
            return True
        # map
        src = w.from_state or {}
        target = w.to_state
        touched = {}
        for c, v in contributions:
            base = touched.get(c)
            if base is None:
                base = src.get(c, _MISSING)
                if base is _MISSING:
                    base = fold_init
            touched[c] = fold_fn(base, v)
        for c, v in touched.items():
            if c not in target or v != target[c]:
                return False
        for c in target:
            if c not in src and c not in touched:
                return False
            if c in src and src[c] != target[c] and c not in touched:
                return False
        return True
    except MJTrap:
        return False


_MISSING = object()


def _changed_cells(problem: OutputProblem, w: Window):
    """(base, target) for every cell the window must change."""
    if problem.kind == "scalar":
        if w.from_state != w.to_state:
            yield (w.from_state, w.to_state)
        return
    if problem.kind == "array":
        for c in _array_diff(w.from_state, w.to_state):
            yield (w.from_state[c], w.to_state[c])
        return
    src = w.from_state or {}
    for k, v in w.to_state.items():
        if k not in src:
            yield (None, v)  # base is the fold init; caller substitutes
        elif src[k] != v:
            yield (src[k], v)


_DIFF_CACHE: dict = {}


def _array_diff(src: tuple, target: tuple) -> tuple:
    key = (id(src), id(target))
    hit = _DIFF_CACHE.get(key)
    if hit is None:
        hit = tuple(c for c, (a, b) in enumerate(zip(src, target)) if a != b)
        _DIFF_CACHE[key] = hit
    return hit


# ---------------------------------------------------------------------------
# Per-output solving


@dataclass
class Solution:
    emits: tuple
    cost: int
    lex: tuple


_GUARD_MISSING = object()
STAGE_A_CTXS = 8


class _OutputSolver:
    def __init__(self, problem: OutputProblem, space: PointSpace, stats, clock):
        self.problem = problem
        self.space = space
        self.stats = stats
        self.clock = clock
        self.killers: list = []  # ctx indices ordered by recent kills
        n_ctx = len(problem.ctx_window_slices)
        # informative contexts (those with a changing window) first
        changing = []
        rest = []
        for k in range(n_ctx):
            start, end = problem.ctx_window_slices[k]
            if any(w.from_state != w.to_state for w in problem.windows[start:end] if w.from_state is not None):
                changing.append(k)
            else:
                rest.append(k)
        self.ctx_order = changing + rest
        self._guard_mask_cache: dict = {}  # (guard order, wid) -> int
        self._pattern_cache: dict = {}  # stage-A mask pattern -> fits? (bool)

    def _iter_ctxs(self):
        killers = self.killers
        for k in killers:
            yield k
        kset = set(killers)
        for k in self.ctx_order:
            if k not in kset:
                yield k

    def _decode_cell(self, key_entry: Optional[Entry], pos: int):
        if key_entry is None:
            return None
        raw = key_entry.vals[pos]
        if key_entry.kind == "str":
            return self.space.decode(int(raw))
        return int(raw)

    def _validate_ctx(self, ctx_i: int, key_entry, val_entry, fold_init, fold_fn, masks: dict) -> bool:
        problem = self.problem
        bool_vals = val_entry.kind == "bool"
        start, end = problem.ctx_window_slices[ctx_i]
        for w in problem.windows[start:end]:
            width = len(w.positions)
            valid = set()
            if width == 0:
                if _sim_window(problem, w, (), fold_init, fold_fn):
                    valid.add(0)
            else:
                cells = []
                values = []
                usable = 0
                for b, pos in enumerate(w.positions):
                    trap = bool(val_entry.traps[pos]) or (
                        key_entry is not None and bool(key_entry.traps[pos])
                    )
                    if trap:
                        cells.append(None)
                        values.append(None)
                    else:
                        usable |= 1 << b
                        cells.append(self._decode_cell(key_entry, pos))
                        v = val_entry.vals[pos]
                        values.append(bool(v) if bool_vals else int(v))
                for mask in range(1 << width):
                    if mask & ~usable:
                        continue
                    contributions = [
                        (cells[b], values[b]) for b in range(width) if mask >> b & 1
                    ]
                    if _sim_window(problem, w, contributions, fold_init, fold_fn):
                        valid.add(mask)
            if not valid:
                if ctx_i in self.killers:
                    self.killers.remove(ctx_i)
                self.killers.insert(0, ctx_i)
                del self.killers[24:]
                return False
            masks[w.wid] = valid
        return True

    def validate(self, key_entry, val_entry, fold_init, fold_fn, guards):
        """Full-domain validation with a staged guard prefilter.

        Returns the per-window valid mask sets, or None when some context has
        an unsatisfiable window or no guard can realize the requirements
        already visible after the first few contexts.
        """
        masks: dict = {}
        it = self._iter_ctxs()
        for _, ctx_i in zip(range(STAGE_A_CTXS), it):
            if not self._validate_ctx(ctx_i, key_entry, val_entry, fold_init, fold_fn, masks):
                return None
        if not self._guard_can_fit(masks, guards):
            return None
        for ctx_i in it:
            if not self._validate_ctx(ctx_i, key_entry, val_entry, fold_init, fold_fn, masks):
                return None
        return masks

    def _guard_mask(self, g: Entry, w: Window) -> int:
        key = (g.order, w.wid)
        m = self._guard_mask_cache.get(key)
        if m is None:
            m = 0
            for b, pos in enumerate(w.positions):
                if g.vals[pos]:
                    m |= 1 << b
            self._guard_mask_cache[key] = m
        return m

    def _pattern_key(self, masks: dict) -> tuple:
        return tuple(sorted((wid, tuple(sorted(s))) for wid, s in masks.items()))

    def _achievable_masks(self, w: Window, guards: list) -> set:
        key = ("ach", w.wid)
        hit = self._pattern_cache.get(key)
        if hit is None:
            hit = {0, w.full_mask} | {self._guard_mask(g, w) for g in guards}
            self._pattern_cache[key] = hit
        return hit

    def _guard_can_fit(self, masks: dict, guards: list) -> bool:
        """Is there any guard (or no guard) compatible with these windows?"""
        windows = [w for w in self.problem.windows if w.wid in masks]
        if all(w.full_mask in masks[w.wid] for w in windows):
            return True
        for w in windows:
            if len(w.positions) > 1 and not (
                masks[w.wid] & self._achievable_masks(w, guards)
            ):
                return False
        key = self._pattern_key(masks)
        hit = self._pattern_cache.get(key)
        if hit is not None:
            return hit
        found = False
        for g in guards:
            if all(self._guard_mask(g, w) in masks[w.wid] for w in windows):
                found = True
                break
        self._pattern_cache[key] = found
        return found

    def find_guard(self, masks: dict, guards: list):
        """The cheapest guard whose fire-set selects a valid subset in every
        window; None-guard (unconditional) is cheapest of all. Returns
        (guard-entry-or-None, found) with found=False when nothing fits."""
        windows = self.problem.windows
        if all(w.full_mask in masks[w.wid] for w in windows):
            return None, True
        for g in guards:
            ok = True
            for w in windows:
                if self._guard_mask(g, w) not in masks[w.wid]:
                    ok = False
                    break
            if ok:
                return g, True
        return None, False

    def changing_windows(self, limit: int = 8) -> list:
        out = []
        for ctx_i in self.ctx_order:
            start, end = self.problem.ctx_window_slices[ctx_i]
            for w in self.problem.windows[start:end]:
                if w.from_state is not None and w.from_state != w.to_state and w.positions:
                    out.append(w)
                    break
            if len(out) >= limit:
                break
        return out

    def key_filter(self, entries: list) -> list:
        """Drop key-component entries that cannot address some changing
        window's changed cell at any position (then no subset can cover the
        change, so the pair is infeasible regardless of value and guard)."""
        if self.problem.kind == "scalar":
            return entries
        probes = self.changing_windows()
        if not probes:
            return entries
        targets = []
        for w in probes:
            if self.problem.kind == "array":
                diff = _array_diff(w.from_state, w.to_state)
            else:
                src = w.from_state or {}
                diff = tuple(
                    k for k in w.to_state if k not in src or src[k] != w.to_state[k]
                )
            targets.append((w.positions, diff))
        kept = []
        for e in entries:
            ok = True
            for positions, diff in targets:
                for cell in diff:
                    if not any(
                        not e.traps[pos] and self._decode_cell(e, pos) == cell
                        for pos in positions
                    ):
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                kept.append(e)
        return kept

    def validate_unguarded(self, key_entry, val_entry, fold_init, fold_fn) -> bool:
        """Fast path: does firing at every index satisfy every window?"""
        problem = self.problem
        bool_vals = val_entry.kind == "bool"
        for ctx_i in self._iter_ctxs():
            start, end = problem.ctx_window_slices[ctx_i]
            for w in problem.windows[start:end]:
                contributions = []
                dead = False
                for pos in w.positions:
                    if val_entry.traps[pos] or (
                        key_entry is not None and key_entry.traps[pos]
                    ):
                        dead = True
                        break
                    v = val_entry.vals[pos]
                    contributions.append(
                        (self._decode_cell(key_entry, pos), bool(v) if bool_vals else int(v))
                    )
                if dead or not _sim_window(problem, w, contributions, fold_init, fold_fn):
                    if ctx_i in self.killers:
                        self.killers.remove(ctx_i)
                    self.killers.insert(0, ctx_i)
                    del self.killers[24:]
                    return False
        return True

    def fold_feasible(self, fold_init, fold_fn, value_sets) -> bool:
        """Cheap exact filter: on a few changing windows, every changed cell's
        target must be fold-reachable from its base using values any bank
        entry can supply at those positions. value_sets maps position -> set."""
        problem = self.problem
        probes = 0
        for ctx_i in self.ctx_order:
            start, end = problem.ctx_window_slices[ctx_i]
            for w in problem.windows[start:end]:
                if w.from_state is None or w.from_state == w.to_state or not w.positions:
                    continue
                vals = set()
                for pos in w.positions:
                    vals |= value_sets.get(pos, set())
                if not vals or len(vals) > 256:
                    return True  # probe too coarse; do not reject
                for base, target in _changed_cells(problem, w):
                    if base is None:
                        base = fold_init
                    reach = {base}
                    hit = base == target
                    for _ in range(len(w.positions)):
                        if hit:
                            break
                        nxt = set()
                        for r in reach:
                            for v in vals:
                                try:
                                    nxt.add(fold_fn(r, v))
                                except MJTrap:
                                    pass
                        if target in nxt:
                            hit = True
                        reach = nxt
                    if not hit:
                        return False
                probes += 1
                if probes >= 3:
                    return True
        return True


def _fold_candidates(g: GrammarSpec, value_kind: str, forced_init) -> list:
    """(init, expr, cost) fold candidates in enumeration order, commutative/
    associative-checked lazily by the caller."""
    from itertools import product as iproduct

    acc, elem = Var("value"), Var("v")
    if value_kind == "bool":
        terms = [acc, elem, BoolLit(True), BoolLit(False)]
        ops = g.fold_bool_ops
        inits = [False, True] if forced_init is _ANY_INIT else [forced_init]
    else:
        lits = [IntLit(v) for v in g.int_literals[:MAX_FOLD_INITS]]
        terms = [acc, elem] + lits
        ops = g.fold_int_ops
        if forced_init is _ANY_INIT:
            inits = sorted({0, 1} | set(g.int_literals[:MAX_FOLD_INITS]), key=lambda x: (x != 0, x))
        else:
            inits = [forced_init]
    if forced_init is _NO_INIT:
        return []
    from ..lang.ast import Binary

    exprs = list(terms)
    for op in ops:
        for a, b in iproduct(terms, terms):
            exprs.append(Binary(op, a, b))
    out = []
    for init in inits:
        for e in exprs:
            out.append(Fold(value_kind, init, e))
    out.sort(key=lambda f: (1 + expr_size(f.expr), str(f.init)))
    return out


_CA_CACHE: dict = {}


def check_commutative_associative(fold: Fold, values: tuple, max_len: int = 4) -> bool:
    from .candidates import check_commutative_associative as ca
    from .candidates import expr_text

    cache_key = (fold.value_type, fold.init, expr_text(fold.expr), values, max_len)
    hit = _CA_CACHE.get(cache_key)
    if hit is None:
        _CA_CACHE[cache_key] = hit = ca(fold, values, max_len)
    return hit


# ---------------------------------------------------------------------------
# Counter range expression


def _solve_counter_exp(template, ctxs, traces, g: GrammarSpec) -> CounterExp:
    reachable = []  # (ctx, [i...])
    for ctx, trace in zip(ctxs, traces):
        reachable.append((ctx, [i for i, _ in trace.points]))

    length_term = Call("length", (Var(template.data_var),))
    lo_terms = [IntLit(v) for v in g.int_literals] + [length_term]
    hi_terms = [length_term] + [IntLit(v) for v in g.int_literals]

    def term_value(term, n):
        match term:
            case IntLit(value=v):
                return v
            case Call():
                return n
        raise TypeError(term)

    def valid(lo, hi) -> bool:
        for ctx, ivals in reachable:
            n = len(ctx.data)
            lv, hv = term_value(lo, n), term_value(hi, n)
            for i in ivals:
                if not lv <= i <= hv:
                    return False
        return True

    options = []
    for lo in lo_terms:
        for hi in hi_terms:
            options.append((expr_size(lo) + expr_size(hi), len(options), lo, hi))
    options.sort(key=lambda t: (t[0], t[1]))
    for _, _, lo, hi in options:
        if valid(lo, hi):
            return CounterExp(lo, Var(template.counter), hi)
    return CounterExp(IntLit(0), IntLit(0), IntLit(0))  # vacuously true range


# ---------------------------------------------------------------------------
# Iteration search


@dataclass
class _Stats:
    examined: int = 0


def _key_entries(problem: OutputProblem, banks: Banks):
    if problem.kind == "scalar":
        return [None]
    if problem.kind == "array":
        return banks.ints
    kt = problem.spec.shape.key
    return banks.strs if kt.kind == "str" else banks.ints


def _emit_for(problem, key_entry, val_entry, guard_entry) -> Emit:
    d = problem.spec.var_id
    key = (IntLit(d),) if key_entry is None else (IntLit(d), key_entry.expr)
    return Emit(
        None if guard_entry is None else guard_entry.expr,
        key,
        val_entry.expr,
    )


def _solve_single_emits(
    solver: _OutputSolver, banks: Banks, folds: list, stats, clock, key_cap: int, val_cap: int
) -> dict:
    """fold index -> best single-emit (or zero-emit) Solution for one output."""
    problem = solver.problem
    solutions: dict = {}

    if not problem.ever_changes:
        for fi, fold in enumerate(folds):
            ok = all(
                _sim_window(problem, w, (), fold.init, lambda a, b: a)
                for w in problem.windows
                if len(w.positions) == 0
            )
            if ok:
                solutions[fi] = Solution(emits=(), cost=0, lex=())

    key_entries = solver.key_filter(
        [e for e in _key_entries(problem, banks) if e is None or e.size <= key_cap]
    )
    val_entries = [
        e
        for e in (banks.ints if problem.value_kind == "int" else banks.bools)
        if e.size <= val_cap
    ]
    keys_by_size: dict = {}
    for e in key_entries:
        keys_by_size.setdefault(0 if e is None else e.size, []).append(e)
    vals_by_size: dict = {}
    for e in val_entries:
        vals_by_size.setdefault(e.size, []).append(e)

    max_tier = max(keys_by_size, default=0) + max(vals_by_size, default=0)
    # emit node + true guard + id literal (+ tuple node for compound keys)
    base_cost = 3 + (1 if problem.kind != "scalar" else 0)

    # distinct values the bank can supply per point, for the reachability probe
    value_sets: dict = {}
    probe_positions = set()
    for ctx_i in solver.ctx_order[:STAGE_A_CTXS]:
        start, end = problem.ctx_window_slices[ctx_i]
        for w in problem.windows[start:end]:
            probe_positions.update(w.positions)
    for e in val_entries:
        for pos in probe_positions:
            if not e.traps[pos]:
                v = e.vals[pos]
                value_sets.setdefault(pos, set()).add(
                    bool(v) if e.kind == "bool" else int(v)
                )

    GUARD_EXTRA = 2  # a selective guard costs at least 2 nodes more than `true`

    for fi, fold in enumerate(folds):
        fold_fn = compile_fold(fold)
        if problem.ever_changes and not solver.fold_feasible(fold.init, fold_fn, value_sets):
            continue
        for tier in range(1, max_tier + 1):
            best = solutions.get(fi)
            if best is not None and best.cost < base_cost + tier:
                break  # nothing at this tier or later can even tie
            clock.check()
            guarded_ok = best is None or base_cost + tier + GUARD_EXTRA <= best.cost
            for ks in sorted(keys_by_size):
                vs = tier - ks
                if vs not in vals_by_size:
                    continue
                for key_entry in keys_by_size[ks]:
                    for val_entry in vals_by_size[vs]:
                        stats.examined += 1
                        if stats.examined % 4096 == 0:
                            clock.check()
                        if not guarded_ok:
                            # only an unconditional emit can still compete
                            if not solver.validate_unguarded(
                                key_entry, val_entry, fold.init, fold_fn
                            ):
                                continue
                            guard = None
                        else:
                            masks = solver.validate(
                                key_entry, val_entry, fold.init, fold_fn, banks.guards
                            )
                            if masks is None:
                                continue
                            guard, found = solver.find_guard(masks, banks.guards)
                            if not found:
                                continue
                        emit = _emit_for(problem, key_entry, val_entry, guard)
                        cost = emit_cost(emit)
                        lex = emit_text(emit)
                        best = solutions.get(fi)
                        if best is None or (cost, lex) < (best.cost, best.lex):
                            solutions[fi] = Solution(emits=(emit,), cost=cost, lex=lex)
    return solutions


def _solve_emit_pairs(solver, banks, folds, stats, clock, solutions) -> None:
    """Limited two-emit search for one output, used when the grammar's emit
    budget leaves slack; updates `solutions` in place."""
    problem = solver.problem
    key_entries = [e for e in _key_entries(problem, banks) if e is None or e.size <= PAIR_SEARCH_TIER_CAP // 2]
    val_entries = [
        e
        for e in (banks.ints if problem.value_kind == "int" else banks.bools)
        if e.size <= PAIR_SEARCH_TIER_CAP // 2
    ]
    guards = [None] + banks.guards[:PAIR_SEARCH_GUARDS]
    pairs = [(k, v) for k in key_entries for v in val_entries]
    pairs.sort(key=lambda kv: ((0 if kv[0] is None else kv[0].size) + kv[1].size))
    pairs = pairs[:200]
    fold_fns = [compile_fold(f) for f in folds]
    for fi, fold in enumerate(folds):
        if fi in solutions:
            continue
        for a in range(len(pairs)):
            for b in range(a, len(pairs)):
                stats.examined += 1
                if stats.examined % 1024 == 0:
                    clock.check()
                found = _validate_pair_emits(
                    solver, pairs[a], pairs[b], fold, fold_fns[fi], guards
                )
                if found is not None:
                    emits, cost = found
                    best = solutions.get(fi)
                    if best is None or cost < best.cost:
                        solutions[fi] = Solution(emits=emits, cost=cost, lex=())
                    break
            if fi in solutions:
                break


def _validate_pair_emits(solver, kv1, kv2, fold, fold_fn, guards):
    problem = solver.problem
    k1, v1 = kv1
    k2, v2 = kv2
    for g1 in guards:
        for g2 in guards:
            ok = True
            for w in problem.windows:
                contributions = []
                trap = False
                for b, pos in enumerate(w.positions):
                    for kk, vv, gg in ((k1, v1, g1), (k2, v2, g2)):
                        if gg is not None and not gg.vals[pos]:
                            continue
                        if (kk is not None and kk.traps[pos]) or vv.traps[pos]:
                            trap = True
                            break
                        cell = solver._decode_cell(kk, pos)
                        val = vv.vals[pos]
                        contributions.append((cell, bool(val) if vv.kind == "bool" else int(val)))
                    if trap:
                        break
                if trap or not _sim_window(problem, w, contributions, fold.init, fold_fn):
                    ok = False
                    break
            if ok:
                emits = tuple(
                    _emit_for(problem, kk, vv, gg)
                    for kk, vv, gg in ((k1, v1, g1), (k2, v2, g2))
                )
                return emits, sum(emit_cost(e) for e in emits)
    return None


def _search_iteration(
    g: GrammarSpec,
    template: SummaryTemplate,
    problems: list,
    space: PointSpace,
    ctxs: list,
    traces: list,
    stats: _Stats,
    clock: _Clock,
    ca_values: dict,
) -> Optional[Candidate]:
    int_cap, cmp_cap, key_cap, coll_val_cap, scalar_val_cap = _role_caps(g, problems)
    banks = build_banks(g, space, int_cap=int_cap, cmp_operand_cap=cmp_cap)
    counter_exp = _solve_counter_exp(template, ctxs, traces, g)

    # folds per value kind, filtered by the commutativity/associativity gate
    folds_by_kind: dict = {}
    for problem in problems:
        vk = problem.value_kind
        if vk in folds_by_kind:
            continue
        forced = problem.forced_init
        for other in problems:
            if other.value_kind == vk and other.forced_init is not _ANY_INIT:
                if forced is _ANY_INIT:
                    forced = other.forced_init
                elif other.forced_init != forced:
                    forced = _NO_INIT
        raw = _fold_candidates(g, vk, forced)
        kept = []
        for f in raw:
            stats.examined += 1
            if check_commutative_associative(f, ca_values[vk]):
                kept.append(f)
        folds_by_kind[vk] = kept

    per_output: dict = {}
    slack = g.emit_budget - len(problems)
    for problem in problems:
        solver = _OutputSolver(problem, space, stats, clock)
        folds = folds_by_kind[problem.value_kind]
        val_cap = scalar_val_cap if problem.kind == "scalar" else coll_val_cap
        sols = _solve_single_emits(solver, banks, folds, stats, clock, key_cap, val_cap)
        if slack > 0 and not sols:
            _solve_emit_pairs(solver, banks, folds, stats, clock, sols)
        if not sols:
            return None
        per_output[problem.spec.var_id] = sols

    # assemble: one fold per value kind, shared by its outputs
    kinds = sorted({p.value_kind for p in problems})
    viable: dict = {}
    for vk in kinds:
        outs = [p for p in problems if p.value_kind == vk]
        folds = folds_by_kind[vk]
        viable[vk] = [
            fi
            for fi in range(len(folds))
            if all(fi in per_output[p.spec.var_id] for p in outs)
        ]
        if not viable[vk]:
            return None

    from itertools import product as iproduct

    best = None
    best_key = None
    for combo in iproduct(*(viable[vk] for vk in kinds)):
        chosen = dict(zip(kinds, combo))
        emits = []
        for problem in sorted(problems, key=lambda p: p.spec.var_id):
            emits.extend(per_output[problem.spec.var_id][chosen[problem.value_kind]].emits)
        folds = tuple(folds_by_kind[vk][chosen[vk]] for vk in kinds)
        cand = Candidate(
            emits=tuple(emits),
            folds=folds,
            counter_exp=counter_exp,
            counter=template.counter,
            data_var=template.data_var,
        )
        key = (candidate_cost(cand), candidate_lex_key(cand))
        if best_key is None or key < best_key:
            best, best_key = cand, key
    return best


# ---------------------------------------------------------------------------
# Entry point


def synthesize(f: LoopFragment, roles: VarRoles, config: SynthConfig = SynthConfig()):
    """Search for a verified summary of the fragment; Summary or GiveUp."""
    clock = _Clock(config.timeout_s)
    stats = _Stats()

    def give_up(reason: str, iteration: int, detail: str = "") -> GiveUp:
        return GiveUp(f.id, reason, iteration, stats.examined, clock.wall_ms, detail)

    pre = gen_precondition(f, roles)
    try:
        template = gen_template(f, roles, pre)
    except TemplateError as e:
        return give_up("unsupported-output", 0, str(e))
    if template.collection_inputs:
        names = ", ".join(n for n, _ in template.collection_inputs)
        return give_up("unsupported-inputs", 0, f"collection inputs besides data: {names}")
    for _, init in pre.bindings:
        if isinstance(init, FreshSymbol) and not init.sym_type.is_scalar:
            return give_up("unsupported-shape", 0, f"unknown initial value of {init.sym_type}")
    if f.stride > MAX_WINDOW_WIDTH:
        return give_up("unsupported-shape", 0, f"stride {f.stride} too wide")

    # A stride-s loop needs collections long enough for at least two full
    # iterations, or first-iteration-only candidates verify vacuously.
    domain = config.domain
    eff_domain = domain
    if f.stride > 1 and 2 * f.stride > domain.max_len:
        eff_domain = replace(domain, max_len=2 * f.stride)

    search_ctxs = search_contexts(template, domain, eff_domain)
    gate_ctxs = contexts(template, eff_domain) if eff_domain is not domain else None

    ca_values = {
        "int": tuple(range(domain.int_range[0], domain.int_range[1] + 1)),
        "bool": (False, True),
    }

    def build_state(ctxs):
        traces = [sequential_trace(f, template, ctx) for ctx in ctxs]
        space = build_point_space(template, ctxs)
        problems = build_output_problems(template, ctxs, traces, space)
        return traces, space, problems

    traces, space, problems = build_state(search_ctxs)
    for p in problems:
        if any(len(w.positions) > MAX_WINDOW_WIDTH for w in p.windows):
            return give_up("unsupported-shape", 0, "entry window too wide")

    iteration = 1
    while True:
        if config.max_iterations is not None and iteration > config.max_iterations:
            return give_up("policy-exhausted", iteration - 1, "iteration cap reached")
        try:
            g = gen_grammar(
                f,
                roles,
                iteration,
                base_recursion=config.recursion_bound or DEFAULT_RECURSION_BOUND,
                max_emits=config.max_emits,
                policy=config.policy,
            )
        except PolicyExhausted:
            return give_up("policy-exhausted", iteration - 1)

        while True:  # CEGIS: re-search after gate counterexamples
            try:
                found = _search_iteration(
                    g, template, problems, space, search_ctxs, traces, stats, clock, ca_values
                )
            except _Timeout:
                return give_up("timeout", iteration)
            if found is None:
                break
            verdict = check_bounded(
                found, template, eff_domain, f=f, ctx_list=gate_ctxs or search_ctxs
            )
            if verdict.verified:
                return Summary(
                    fragment_id=f.id,
                    candidate=found,
                    template=template,
                    domain=eff_domain,
                    iteration=iteration,
                    candidates_examined=stats.examined,
                    wall_ms=clock.wall_ms,
                )
            if gate_ctxs is None:
                raise AssertionError(
                    "engine accepted a candidate that fails the bounded check: "
                    f"{verdict.counterexample}"
                )
            ce = verdict.counterexample
            search_ctxs = search_ctxs + [_ce_context(template, ce)]
            traces, space, problems = build_state(search_ctxs)
        iteration += 1
