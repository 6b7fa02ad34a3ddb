"""Synthesis specifications: preconditions, summary templates and grammars.

For each admitted fragment this module produces
  * the precondition (initial values of outputs and counter, traced
    statically; unknown values become fresh symbols),
  * the summary template: every output v must satisfy
    v = reduce(map(data, fm), fr)[key(v)], with the loop invariant being the
    same statement over the data prefix [0:i] plus a counter-range conjunct,
  * a bounded expression grammar harvested from the fragment, with an
    iterative expansion policy that strictly grows the language.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from .analyzer import LoopFragment, VarRoles
from .lang.ast import (
    Assign,
    Binary,
    BoolLit,
    Call,
    Decl,
    ExprStmt,
    For,
    If,
    Index,
    IntLit,
    NewArray,
    NewMap,
    StrLit,
    Type,
    Unary,
    Var,
    While,
    BOOL,
    INT,
    STR,
)


class TemplateError(Exception):
    pass


class PolicyExhausted(Exception):
    """No expansion step left; synthesis halts for this fragment."""


# ---------------------------------------------------------------------------
# Initial values


@dataclass(frozen=True)
class IntInit:
    value: int


@dataclass(frozen=True)
class BoolInit:
    value: bool


@dataclass(frozen=True)
class StrInit:
    value: str


@dataclass(frozen=True)
class ZeroArray:
    length: int


@dataclass(frozen=True)
class EmptyMap:
    key: Type
    val: Type


@dataclass(frozen=True)
class FreshSymbol:
    name: str
    sym_type: Type


@dataclass(frozen=True)
class Precondition:
    """Initial symbolic value for every output variable and the counter."""

    bindings: tuple  # of (name, init-value), stable order

    def get(self, name: str):
        for n, v in self.bindings:
            if n == name:
                return v
        raise KeyError(name)

    def text(self) -> str:
        parts = []
        for n, v in self.bindings:
            match v:
                case IntInit(value=x) | BoolInit(value=x):
                    parts.append(f"{n} = {str(x).lower()}")
                case StrInit(value=x):
                    parts.append(f'{n} = "{x}"')
                case ZeroArray(length=k):
                    parts.append(f"{n} = [0..0] (length {k})")
                case EmptyMap():
                    parts.append(f"{n} = {{}}")
                case FreshSymbol(name=s):
                    parts.append(f"{n} = {s}")
        return " && ".join(parts)


_UNKNOWN = object()


def _static_value(e, state: dict):
    match e:
        case IntLit(value=v):
            return IntInit(v)
        case BoolLit(value=v):
            return BoolInit(v)
        case StrLit(value=v):
            return StrInit(v)
        case NewArray(size=IntLit(value=n)):
            return ZeroArray(n)
        case NewArray(size=Var(name=m)):
            known = state.get(m, _UNKNOWN)
            if isinstance(known, IntInit):
                return ZeroArray(known.value)
            return _UNKNOWN
        case NewMap(key_type=k, val_type=v):
            return EmptyMap(k, v)
        case Var(name=m):
            return state.get(m, _UNKNOWN)
        case _:
            return _UNKNOWN


def _assigned_names(stmts) -> set:
    names = set()
    for s in stmts:
        match s:
            case Decl(name=n) | Assign(target=Var(name=n)):
                names.add(n)
            case Assign(target=Index(array=Var(name=n))):
                names.add(n)
            case ExprStmt(call=Call(func="put", args=(Var(name=n), *_))):
                names.add(n)
            case If(then_body=tb, else_body=eb):
                names |= _assigned_names(tb) | _assigned_names(eb)
            case While(body=b):
                names |= _assigned_names(b)
            case For(init=i, update=u, body=b):
                extra = [x for x in (i, u) if x is not None]
                names |= _assigned_names(tuple(extra) + b)
            case _:
                pass
    return names


def gen_precondition(f: LoopFragment, roles: VarRoles) -> Precondition:
    """Trace literal initializations backwards from loop entry.

    Straight-line declarations and assignments propagate; anything assigned
    inside branching or looping control flow before our loop, and anything
    bound from a parameter, becomes a fresh symbol.
    """
    state = {}
    for s in f.pre_loop:
        match s:
            case Decl(name=n, init=init):
                state[n] = _UNKNOWN if init is None else _static_value(init, state)
            case Assign(target=Var(name=n), value=v):
                state[n] = _static_value(v, state)
            case Assign(target=Index(array=Var(name=n))):
                state[n] = _UNKNOWN
            case ExprStmt(call=Call(func="put", args=(Var(name=n), *_))):
                state[n] = _UNKNOWN
            case If() | While() | For():
                for n in _assigned_names((s,)):
                    state[n] = _UNKNOWN
            case _:
                pass

    bindings = []
    sym_no = 0
    for name in tuple(roles.outputs) + (f.counter,):
        v = state.get(name, _UNKNOWN)
        if v is _UNKNOWN:
            bindings.append((name, FreshSymbol(f"s{sym_no}", f.bindings[name])))
            sym_no += 1
        else:
            bindings.append((name, v))
    return Precondition(bindings=tuple(bindings))


# ---------------------------------------------------------------------------
# Summary template


@dataclass(frozen=True)
class ScalarShape:
    value_type: Type


@dataclass(frozen=True)
class ArrayShape:
    length: Optional[int]  # None when not statically known
    elem: Type


@dataclass(frozen=True)
class MapShape:
    key: Type
    val: Type


@dataclass(frozen=True)
class OutputSpec:
    name: str
    var_id: int
    shape: object
    init: object  # initial value from the precondition

    @property
    def value_type(self) -> Type:
        match self.shape:
            case ScalarShape(value_type=t):
                return t
            case ArrayShape(elem=t):
                return t
            case MapShape(val=t):
                return t
        raise TypeError(self.shape)


@dataclass(frozen=True)
class SummaryTemplate:
    fragment_id: str
    data_var: str
    data_elem: Type
    counter: str
    counter_init: object
    stride: int
    outputs: tuple  # of OutputSpec, ordered by var_id
    scalar_inputs: tuple  # of (name, Type), loop-constant scalars fm may reference
    collection_inputs: tuple  # of (name, Type): non-data arrays/maps read by the body
    precondition: Precondition
    fragment: object = field(default=None, compare=False, repr=False)

    def output(self, var_id: int) -> OutputSpec:
        return self.outputs[var_id]

    def key_of(self, spec: OutputSpec) -> str:
        match spec.shape:
            case ScalarShape():
                return str(spec.var_id)
            case ArrayShape():
                return f"({spec.var_id}, j)"
            case MapShape():
                return f"({spec.var_id}, k)"

    def text(self) -> str:
        """Canonical rendering of the precondition, postcondition, invariant
        and the three proof obligations for this fragment."""
        lines = [f"template for {self.fragment_id}"]
        lines.append(f"precondition: {self.precondition.text()}")
        post = []
        inv = []
        for spec in self.outputs:
            reduce_full = f"reduce(map({self.data_var}, fm), fr)"
            reduce_pre = f"reduce(map({self.data_var}[0:{self.counter}], fm), fr)"
            match spec.shape:
                case ScalarShape():
                    post.append(f"{spec.name} = {reduce_full}[{spec.var_id}]")
                    inv.append(f"{spec.name} = {reduce_pre}[{spec.var_id}]")
                case ArrayShape(length=n):
                    bound = n if n is not None else f"{spec.name}.length"
                    post.append(
                        f"forall 0 <= j < {bound}. {spec.name}[j] = {reduce_full}[({spec.var_id}, j)]"
                    )
                    inv.append(
                        f"forall 0 <= j < {bound}. {spec.name}[j] = {reduce_pre}[({spec.var_id}, j)]"
                    )
                case MapShape():
                    post.append(
                        f"forall k in keys({spec.name}). {spec.name}[k] = {reduce_full}[({spec.var_id}, k)]"
                        f" && keys({reduce_full} at id {spec.var_id}) = keys({spec.name})"
                    )
                    inv.append(
                        f"forall k in keys({spec.name}). {spec.name}[k] = {reduce_pre}[({spec.var_id}, k)]"
                        f" && keys({reduce_pre} at id {spec.var_id}) = keys({spec.name})"
                    )
        lines.append("postcondition: " + " &&\n               ".join(post))
        lines.append("invariant: LoopCounterExp &&\n           " + " &&\n           ".join(inv))
        lines.append("obligation 1: forall s, data. precondition(s) -> invariant(s)")
        lines.append(
            f"obligation 2: forall s, data. invariant(s) && {self.counter} < length({self.data_var})"
            " -> invariant(body(s))"
        )
        lines.append(
            f"obligation 3: forall s, data. invariant(s) && !({self.counter} < length({self.data_var}))"
            " -> postcondition(s)"
        )
        return "\n".join(lines) + "\n"


def gen_template(f: LoopFragment, roles: VarRoles, pre: Precondition) -> SummaryTemplate:
    """Instantiate the summary shape for each output of the fragment."""
    if not roles.outputs:
        raise TemplateError("fragment has no outputs")
    if not roles.id_of:
        raise TemplateError("output ids not assigned")
    outputs = []
    for name in roles.outputs:
        t = f.bindings[name]
        init = pre.get(name)
        if t.is_scalar:
            if t == STR:
                raise TemplateError(f"unsupported output type {t} for {name!r}")
            shape = ScalarShape(t)
        elif t.kind == "array":
            if t.elem != INT:
                raise TemplateError(f"unsupported output type {t} for {name!r}")
            length = init.length if isinstance(init, ZeroArray) else None
            shape = ArrayShape(length, t.elem)
        elif t.kind == "map":
            shape = MapShape(t.key, t.val)
        else:
            raise TemplateError(f"unsupported output type {t} for {name!r}")
        outputs.append(OutputSpec(name, roles.id_of[name], shape, init))
    outputs.sort(key=lambda o: o.var_id)

    scalar_inputs = []
    collection_inputs = []
    synthetic_names = {s.name for s in roles.synthetic}
    for name in roles.inputs:
        if name == f.data_var:
            continue
        if name in synthetic_names:
            s = next(x for x in roles.synthetic if x.name == name)
            scalar_inputs.append((name, s.elem))
            continue
        t = f.bindings[name]
        if t.is_scalar:
            scalar_inputs.append((name, t))
        else:
            collection_inputs.append((name, t))

    return SummaryTemplate(
        fragment_id=f.id,
        data_var=f.data_var,
        data_elem=f.data_elem,
        counter=f.counter,
        counter_init=pre.get(f.counter),
        stride=f.stride,
        outputs=tuple(outputs),
        scalar_inputs=tuple(scalar_inputs),
        collection_inputs=tuple(collection_inputs),
        precondition=pre,
        fragment=f,
    )


# ---------------------------------------------------------------------------
# Grammar


@dataclass(frozen=True)
class GrammarSpec:
    iteration: int
    recursion_bound: int
    emit_budget: int
    counter: str
    data_var: str
    data_elem: Type
    output_ids: tuple
    int_literals: tuple
    str_literals: tuple
    int_vars: tuple  # scalar int inputs usable as terminals
    str_vars: tuple
    int_ops: tuple
    cmp_ops: tuple  # comparison productions for BoolExp
    logic_ops: tuple
    str_eq: bool  # string equality comparisons available
    fold_int_ops: tuple
    fold_bool_ops: tuple
    key_extra_arity: int  # components allowed beyond each output's required shape

    def text(self) -> str:
        lines = [f"grammar iteration={self.iteration} recursionBound={self.recursion_bound} emitBudget={self.emit_budget}"]
        lines.append(f"fm ::= {{ {'; '.join(['EmitMap'] * self.emit_budget)}; }}")
        lines.append("EmitMap ::= emit(Key, Val) | if (BoolExp) { emit(Key, Val) }")
        arity = "" if self.key_extra_arity == 0 else f" (+{self.key_extra_arity} extra component)"
        lines.append(f"Key ::= id | (id, Scalar...) per output shape{arity}")
        terms = [self.counter] + [str(x) for x in self.int_literals] + list(self.int_vars)
        lines.append(f"IntTerm ::= {' | '.join(terms)}")
        prods = ["IntTerm", f"{self.data_var}[IntExp]"] if self.data_elem == INT else ["IntTerm"]
        prods += [f"IntExp {op} IntExp" for op in self.int_ops]
        lines.append(f"IntExp ::= {' | '.join(prods)}")
        bools = ["true", "false"]
        bools += [f"IntExp {op} IntExp" for op in self.cmp_ops]
        if self.str_eq:
            bools.append("StrExp == StrExp")
        bools += [f"BoolExp {op} BoolExp" for op in self.logic_ops if op != "!"]
        if "!" in self.logic_ops:
            bools.append("!BoolExp")
        lines.append(f"BoolExp ::= {' | '.join(bools)}")
        if self.data_elem == STR or self.str_vars or self.str_literals:
            sterm = list(self.str_vars) + [f'"{s}"' for s in self.str_literals]
            if self.data_elem == STR:
                sterm.append(f"{self.data_var}[IntExp]")
            lines.append(f"StrExp ::= {' | '.join(sterm)}")
        lines.append(
            "fr(int) ::= { value = IntLit; for (v in values) { value = FoldIntExp } emit(key, value); }"
        )
        lines.append(
            f"FoldIntExp ::= value | v | IntLit | FoldIntExp ({' | '.join(self.fold_int_ops)}) FoldIntExp"
        )
        lines.append(
            "fr(bool) ::= { value = BoolLit; for (v in values) { value = FoldBoolExp } emit(key, value); }"
        )
        lines.append(
            f"FoldBoolExp ::= value | v | BoolLit | FoldBoolExp ({' | '.join(self.fold_bool_ops)}) FoldBoolExp"
        )
        lines.append("LoopCounterExp ::= LoopTerm <= LoopTerm <= LoopTerm")
        lines.append(f"LoopTerm ::= {self.counter} | IntLit | length({self.data_var})")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ExpansionStep:
    raise_recursion: int = 0
    add_int_ops: tuple = ()
    add_cmp_ops: tuple = ()
    add_logic_ops: tuple = ()
    raise_emits: int = 0
    add_key_arity: int = 0


@dataclass(frozen=True)
class ExpansionPolicy:
    steps: tuple

    def step_for(self, iteration: int) -> ExpansionStep:
        """The step that takes `iteration` to `iteration + 1`."""
        idx = iteration - 1
        if idx >= len(self.steps):
            raise PolicyExhausted(f"no expansion step after iteration {iteration}")
        return self.steps[idx]


# Cheapest-first: deepen expressions and unlock the operator classes the
# benchmarks' guards need before paying for extra emit statements.
DEFAULT_POLICY = ExpansionPolicy(
    steps=(
        ExpansionStep(
            raise_recursion=1,
            add_int_ops=("%", "*"),
            add_cmp_ops=("==",),
            add_logic_ops=("&&", "||", "!"),
            add_key_arity=1,
        ),
        ExpansionStep(raise_recursion=1),
        ExpansionStep(raise_emits=1),
        ExpansionStep(raise_recursion=1),
        ExpansionStep(raise_emits=1),
    )
)

DEFAULT_RECURSION_BOUND = 2


def _harvest(f: LoopFragment):
    int_lits = set()
    str_lits = set()
    arith = set()
    cmp = set()
    logic = set()

    def expr(e):
        match e:
            case IntLit(value=v):
                int_lits.add(v)
            case StrLit(value=v):
                str_lits.add(v)
            case Binary(op=op, left=l, right=r):
                if op in ("+", "-", "*", "/", "%"):
                    arith.add(op)
                elif op in ("<", "<=", ">", ">=", "==", "!="):
                    cmp.add(op)
                else:
                    logic.add(op)
                expr(l)
                expr(r)
            case Unary(op=op, operand=x):
                if op == "!":
                    logic.add("!")
                expr(x)
            case Index(array=a, index=i):
                expr(a)
                expr(i)
            case Call(args=args):
                for a in args:
                    expr(a)
            case NewArray(size=sz):
                expr(sz)
            case _:
                pass

    def stmt(s):
        match s:
            case Decl(init=init):
                if init is not None:
                    expr(init)
            case Assign(target=t, value=v):
                expr(t)
                expr(v)
            case If(cond=c, then_body=tb, else_body=eb):
                expr(c)
                for x in tb:
                    stmt(x)
                for x in eb:
                    stmt(x)
            case ExprStmt(call=c):
                expr(c)
            case _:
                pass

    for s in f.core_body:
        stmt(s)
    stmt(f.counter_update)
    return int_lits, str_lits, arith, cmp, logic


def gen_grammar(
    f: LoopFragment,
    roles: VarRoles,
    iteration: int = 1,
    base_recursion: int = DEFAULT_RECURSION_BOUND,
    max_emits: Optional[int] = None,
    policy: ExpansionPolicy = DEFAULT_POLICY,
) -> GrammarSpec:
    """Grammar for the fragment at the given expansion iteration.

    Iteration 1 harvests terminals and operators only from the fragment
    itself (plus the output ids, 0/1 and the scalar precondition values,
    which the synthesizer may always spell); later iterations apply the
    expansion policy cumulatively.
    """
    int_lits, str_lits, arith, cmp, logic = _harvest(f)
    n_out = len(roles.outputs)
    int_lits |= set(range(n_out)) | {0, 1, f.stride}

    pre = gen_precondition(f, roles)
    for _, v in pre.bindings:
        if isinstance(v, IntInit):
            int_lits.add(v.value)

    synthetic_names = {s.name: s for s in roles.synthetic}
    int_vars = []
    str_vars = []
    for name in roles.inputs:
        if name == f.data_var:
            continue
        t = synthetic_names[name].elem if name in synthetic_names else f.bindings[name]
        if t == INT:
            int_vars.append(name)
        elif t == STR:
            str_vars.append(name)

    g = GrammarSpec(
        iteration=1,
        recursion_bound=base_recursion,
        emit_budget=n_out,
        counter=f.counter,
        data_var=f.data_var,
        data_elem=f.data_elem,
        output_ids=tuple(range(n_out)),
        int_literals=tuple(sorted(int_lits)),
        str_literals=tuple(sorted(str_lits)),
        int_vars=tuple(int_vars),
        str_vars=tuple(str_vars),
        int_ops=tuple(sorted(arith | {"+"})),
        cmp_ops=tuple(sorted(cmp)),
        logic_ops=tuple(sorted(logic)),
        str_eq=("==" in cmp and (f.data_elem == STR or str_vars)),
        fold_int_ops=tuple(sorted(arith | {"+"})),
        fold_bool_ops=("&&", "||"),
        key_extra_arity=0,
    )
    for it in range(1, iteration):
        g = expand(g, policy)
    if max_emits is not None and g.emit_budget > max_emits:
        g = replace(g, emit_budget=max_emits)
    return g


def expand(g: GrammarSpec, policy: ExpansionPolicy = DEFAULT_POLICY) -> GrammarSpec:
    """Apply the next policy step; the generated language strictly grows.

    Raises PolicyExhausted when no step remains.
    """
    step = policy.step_for(g.iteration)
    return replace(
        g,
        iteration=g.iteration + 1,
        recursion_bound=g.recursion_bound + step.raise_recursion,
        emit_budget=g.emit_budget + step.raise_emits,
        int_ops=tuple(sorted(set(g.int_ops) | set(step.add_int_ops))),
        cmp_ops=tuple(sorted(set(g.cmp_ops) | set(step.add_cmp_ops))),
        logic_ops=tuple(sorted(set(g.logic_ops) | set(step.add_logic_ops))),
        str_eq=g.str_eq or ("==" in step.add_cmp_ops and (g.data_elem == STR or bool(g.str_vars))),
        fold_int_ops=tuple(sorted(set(g.fold_int_ops) | set(step.add_int_ops))),
        key_extra_arity=g.key_extra_arity + step.add_key_arity,
    )
