"""Bounded model checking of candidate summaries.

The three proof obligations are checked exhaustively over a finite domain by
walking the loop's reachable counter values. The invariant pins every output
at counter value i to reduce(map(data[0:min(i, len)], fm), fr), so there is
exactly one invariant-satisfying state per (data, i); obligation 2 executes
one body iteration from that state and re-checks the invariant, and
obligation 3 compares the exit state against the full-data postcondition.
A runtime trap in the original body makes the remaining states for that
input unreachable, so checking for that input stops there (equivalence is
relative to non-trapping executions). A trap inside a candidate expression
rejects the candidate like a counterexample.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..analyzer import LoopFragment
from ..lang.errors import MJTrap
from ..lang.interp import Interp, copy_value
from ..specgen import (
    ArrayShape,
    BoolInit,
    EmptyMap,
    FreshSymbol,
    IntInit,
    MapShape,
    ScalarShape,
    StrInit,
    SummaryTemplate,
    ZeroArray,
)
from .candidates import Candidate, counter_exp_holds, eval_candidate
from .domain import BoundedDomain, Context, contexts

BODY_FUEL = 100_000


@dataclass(frozen=True)
class Counterexample:
    data: tuple
    inputs: tuple  # (name, value) pairs, fresh symbols included
    counter: int  # counter value at which the statement was checked
    statement: int  # 1, 2 or 3

    def context(self) -> Context:
        named = tuple((n, v) for n, v in self.inputs)
        return Context(data=self.data, inputs=named)


@dataclass(frozen=True)
class Verdict:
    verified: bool
    counterexample: Optional[Counterexample] = None

    def __bool__(self) -> bool:
        return self.verified


VERIFIED = Verdict(True)


class ReconstructError(Exception):
    """The associative array does not fit the template's output shapes."""


# ---------------------------------------------------------------------------
# State construction


def initial_value(init, spec_shape, syms: dict):
    match init:
        case IntInit(value=v) | BoolInit(value=v) | StrInit(value=v):
            return v
        case ZeroArray(length=n):
            return [0] * n
        case EmptyMap():
            return {}
        case FreshSymbol(name=s):
            if s not in syms:
                raise MJTrap("symbolic", f"no value for symbol {s}")
            return syms[s]
    raise TypeError(f"bad init {init!r}")


def initial_outputs(t: SummaryTemplate, ctx: Context) -> dict:
    syms = ctx.syms_dict
    return {
        spec.name: initial_value(spec.init, spec.shape, syms) for spec in t.outputs
    }


def counter_init_value(t: SummaryTemplate, ctx: Context) -> int:
    match t.counter_init:
        case IntInit(value=v):
            return v
        case FreshSymbol(name=s):
            return ctx.syms_dict[s]
    raise TypeError(f"bad counter init {t.counter_init!r}")


def _input_env(t: SummaryTemplate, ctx: Context) -> dict:
    """Environment bindings for data and the loop-constant inputs."""
    env = {t.data_var: list(ctx.data)}
    arrays: dict = {}
    for name, value in ctx.inputs:
        if "[" in name:  # synthetic per-element input "arr[k]"
            arr, idx = name[:-1].split("[")
            arrays.setdefault(arr, {})[int(idx)] = value
        env[name] = value
    for arr, cells in arrays.items():
        size = max(cells) + 1
        backing = [0] * size
        for k, v in cells.items():
            backing[k] = v
        env[arr] = backing
    return env


# ---------------------------------------------------------------------------
# Sequential traces


@dataclass(frozen=True)
class Trace:
    """Reachable (counter, output snapshot) pairs of the original loop on one
    input, in order; `trapped` marks a runtime error cutting the run short."""

    points: tuple  # of (i, snapshot) where snapshot: name -> value (frozen-ish)
    trapped: bool

    @property
    def exit_counter(self) -> int:
        return self.points[-1][0]


def _snapshot(t: SummaryTemplate, env: dict) -> dict:
    out = {}
    for spec in t.outputs:
        v = env[spec.name]
        match spec.shape:
            case ArrayShape():
                out[spec.name] = tuple(v)
            case MapShape():
                out[spec.name] = dict(v)
            case ScalarShape():
                out[spec.name] = v
    return out


def sequential_trace(f: LoopFragment, t: SummaryTemplate, ctx: Context) -> Trace:
    """Execute the fragment body from the precondition state, recording the
    outputs at every reachable counter value."""
    env = _input_env(t, ctx)
    env.update(initial_outputs(t, ctx))
    i = counter_init_value(t, ctx)
    env[t.counter] = i
    n = len(ctx.data)
    points = [(i, _snapshot(t, env))]
    it = Interp(None, fuel=BODY_FUEL)
    body = f.core_body + (f.counter_update,)
    while i < n:
        try:
            for s in body:
                it.exec_stmt(s, env)
        except MJTrap:
            return Trace(points=tuple(points), trapped=True)
        i = env[t.counter]
        points.append((i, _snapshot(t, env)))
    return Trace(points=tuple(points), trapped=False)


# ---------------------------------------------------------------------------
# Reconstruction (strict) and invariant pinning


def reconstruct(assoc: dict, t: SummaryTemplate, init_of) -> dict:
    """Build output values from an associative array keyed by variable id.

    Strict: every key must name a declared output and fit its shape; array
    cells and scalar outputs absent from the array take the fold init value.
    init_of(spec) supplies that default per output.
    """
    by_id = {spec.var_id: spec for spec in t.outputs}
    picked: dict = {spec.var_id: {} for spec in t.outputs}
    for key, value in assoc.items():
        if isinstance(key, tuple):
            d, rest = key[0], key[1:]
        else:
            d, rest = key, ()
        if isinstance(d, bool) or not isinstance(d, int) or d not in by_id:
            raise ReconstructError(f"key {key!r} does not name an output id")
        spec = by_id[d]
        if isinstance(value, bool):
            ok_value = spec.value_type.kind == "bool"
        else:
            ok_value = spec.value_type.kind == "int" and isinstance(value, int)
        if not ok_value:
            raise ReconstructError(f"value {value!r} does not fit output {spec.name}")
        match spec.shape:
            case ScalarShape():
                if rest != ():
                    raise ReconstructError(f"key {key!r}: scalar output takes a bare id")
                picked[d][()] = value
            case ArrayShape(length=length):
                if len(rest) != 1 or isinstance(rest[0], bool) or not isinstance(rest[0], int):
                    raise ReconstructError(f"key {key!r}: array output takes (id, index)")
                j = rest[0]
                if length is None or j < 0 or j >= length:
                    raise ReconstructError(f"key {key!r}: index outside [0, {length})")
                picked[d][j] = value
            case MapShape(key=kt):
                if len(rest) != 1:
                    raise ReconstructError(f"key {key!r}: map output takes (id, key)")
                k = rest[0]
                if kt.kind == "int" and (isinstance(k, bool) or not isinstance(k, int)):
                    raise ReconstructError(f"map key {k!r} is not int")
                if kt.kind == "str" and not isinstance(k, str):
                    raise ReconstructError(f"map key {k!r} is not a token")
                picked[d][k] = value
    out = {}
    for spec in t.outputs:
        cells = picked[spec.var_id]
        match spec.shape:
            case ScalarShape():
                out[spec.name] = cells.get((), init_of(spec))
            case ArrayShape(length=length):
                default = init_of(spec)
                arr = [default] * (length or 0)
                for j, v in cells.items():
                    arr[j] = v
                out[spec.name] = tuple(arr)
            case MapShape():
                out[spec.name] = cells
    return out


def candidate_init_of(c: Candidate):
    def init_of(spec) -> object:
        kind = spec.value_type.kind
        for f in c.folds:
            if f.value_type == kind:
                return f.init
        raise ReconstructError(f"candidate has no {kind} fold for output {spec.name}")

    return init_of


def pin_outputs(c: Candidate, t: SummaryTemplate, ctx: Context, i: int):
    """The unique outputs satisfying the invariant at counter value i, or None
    when no state can satisfy it (reconstruction fails or an expression
    traps)."""
    prefix = min(max(i, 0), len(ctx.data))
    try:
        assoc = eval_candidate(c, ctx.data, prefix, inputs=_input_env(t, ctx))
        return reconstruct(assoc, t, candidate_init_of(c))
    except (MJTrap, ReconstructError):
        return None


# ---------------------------------------------------------------------------
# check_bounded


def _ce(ctx: Context, i: int, statement: int) -> Verdict:
    return Verdict(
        False,
        Counterexample(
            data=ctx.data,
            inputs=ctx.inputs + ctx.syms,
            counter=i,
            statement=statement,
        ),
    )


def check_candidate_on_context(
    c: Candidate, t: SummaryTemplate, f: LoopFragment, ctx: Context
) -> Verdict:
    n = len(ctx.data)
    env_inputs = _input_env(t, ctx)

    def holds_counter_exp(i: int) -> bool:
        try:
            return counter_exp_holds(c, i, ctx.data, inputs=env_inputs)
        except MJTrap:
            return False

    i = counter_init_value(t, ctx)
    pre = initial_outputs(t, ctx)
    pre_cmp = {
        spec.name: tuple(pre[spec.name]) if isinstance(pre[spec.name], list) else pre[spec.name]
        for spec in t.outputs
    }
    pinned = pin_outputs(c, t, ctx, i)
    if not holds_counter_exp(i) or pinned is None or pinned != pre_cmp:
        return _ce(ctx, i, 1)

    it = Interp(None, fuel=BODY_FUEL)
    body = f.core_body + (f.counter_update,)
    while i < n:
        env = dict(env_inputs)
        for spec in t.outputs:
            v = pinned[spec.name]
            env[spec.name] = list(v) if isinstance(v, tuple) else copy_value(v)
        env[t.counter] = i
        try:
            for s in body:
                it.exec_stmt(s, env)
        except MJTrap as trap:
            if trap.kind == "fuel-exhausted":
                return _ce(ctx, i, 2)
            return VERIFIED  # original program faults here; nothing further is reachable
        i_next = env[t.counter]
        pinned_next = pin_outputs(c, t, ctx, i_next)
        after = _snapshot(t, env)
        if not holds_counter_exp(i_next) or pinned_next is None or after != pinned_next:
            return _ce(ctx, i, 2)
        pinned = pinned_next
        i = i_next

    # exit: invariant state must satisfy the full-data postcondition
    try:
        assoc = eval_candidate(c, ctx.data, n, inputs=env_inputs)
        post = reconstruct(assoc, t, candidate_init_of(c))
    except (MJTrap, ReconstructError):
        return _ce(ctx, i, 3)
    if pinned != post:
        return _ce(ctx, i, 3)
    return VERIFIED


def check_bounded(
    c: Candidate,
    t: SummaryTemplate,
    d: BoundedDomain,
    f: Optional[LoopFragment] = None,
    ctx_list: Optional[list] = None,
) -> Verdict:
    """Check the three obligations for every context of the bounded domain.

    Returns Verified, or the first counterexample in domain order. The
    fragment defaults to the one the template was generated from.
    """
    fragment = f or t.fragment
    if fragment is None:
        raise ValueError("check_bounded needs the loop fragment")
    for ctx in ctx_list if ctx_list is not None else contexts(t, d):
        verdict = check_candidate_on_context(c, t, fragment, ctx)
        if not verdict:
            return verdict
    return VERIFIED


def recheck_counterexample(
    c: Candidate, t: SummaryTemplate, ce: Counterexample, f: Optional[LoopFragment] = None
) -> bool:
    """A returned counterexample must fail again when its context is re-checked."""
    fragment = f or t.fragment
    named = ce.inputs
    sym_names = {
        init.name
        for _, init in t.precondition.bindings
        if isinstance(init, FreshSymbol)
    }
    ctx = Context(
        data=ce.data,
        inputs=tuple((n, v) for n, v in named if n not in sym_names),
        syms=tuple((n, v) for n, v in named if n in sym_names),
    )
    verdict = check_candidate_on_context(c, t, fragment, ctx)
    return (not verdict) and verdict.counterexample.statement == ce.statement
