"""Loop fragment extraction and input/output variable classification.

A loop is admitted as a lifting candidate when it has the canonical shape

    while (true) { if (!(i < length(data))) break;  body;  i = i + stride; }

and the body satisfies four criteria: only whitelisted calls (length, get,
put), no control flow besides the canonical exit, no nested loops (only the
innermost loop of a nest is considered), and no assignments that create an
alias (reference-typed assignments; element writes are fine).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from .lang.ast import (
    Assign,
    Binary,
    Break,
    BoolLit,
    Call,
    Decl,
    Expr,
    ExprStmt,
    For,
    If,
    Index,
    IntLit,
    NewArray,
    NewMap,
    NormalizedProgram,
    Return,
    Type,
    Unary,
    Var,
    While,
)
from .lang.typecheck import function_var_types

WHITELISTED_CALLS = ("length", "get", "put")

REASON_UNSUPPORTED_CALL = "unsupported-call"
REASON_UNSTRUCTURED = "unstructured-control-flow"
REASON_NESTED = "nested-loop"
REASON_ALIASING = "aliasing-assignment"


class ClassificationError(Exception):
    """Raised when an admitted fragment cannot be classified; an analyzer bug."""


class NoOutputsError(Exception):
    """Admitted loop has no output variables, so there is nothing to summarize."""


@dataclass(frozen=True)
class RejectionReport:
    location: str
    reason: str
    detail: str = ""

    def diagnostic(self) -> str:
        return f"fragment={self.location} reason={self.reason}"


@dataclass(frozen=True)
class LoopFragment:
    id: str
    func: str
    stmt_index: int  # index of the loop in its function's top-level body, -1 if nested
    loop: While = field(compare=False)
    bindings: dict = field(compare=False)  # name -> Type, whole enclosing function
    decl_order: dict = field(compare=False)  # name -> declaration position
    pre_loop: tuple = field(compare=False)  # top-level stmts before the loop
    data_var: str = ""
    data_elem: Type = None
    stride: int = 1
    counter: str = ""

    @property
    def exit_check(self):
        return self.loop.body[0]

    @property
    def core_body(self) -> tuple:
        """Body statements without the canonical exit and the counter update."""
        return self.loop.body[1:-1]

    @property
    def counter_update(self):
        return self.loop.body[-1]


@dataclass(frozen=True)
class SyntheticInput:
    name: str
    array: str
    index: int
    elem: Type


@dataclass(frozen=True)
class VarRoles:
    inputs: tuple  # names in declaration order (synthetic element reads included)
    outputs: tuple  # names in declaration order
    locals: tuple
    read_written: tuple = ()
    synthetic: tuple = ()  # of SyntheticInput
    id_of: dict = field(default_factory=dict)

    def role_of(self, name: str) -> str:
        if name in self.outputs:
            return "output"
        if name in self.inputs:
            return "input"
        if name in self.locals:
            return "local"
        raise KeyError(name)


# ---------------------------------------------------------------------------
# Fragment extraction


def _contains_loop(stmts) -> bool:
    for s in stmts:
        match s:
            case While() | For():
                return True
            case If(then_body=tb, else_body=eb):
                if _contains_loop(tb) or _contains_loop(eb):
                    return True
            case _:
                pass
    return False


def _calls_in(stmts) -> list:
    found = []

    def walk_expr(e):
        match e:
            case Call(func=fn, args=args):
                found.append(fn)
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

    def walk(s):
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
                    walk(x)
                for x in eb:
                    walk(x)
            case While(cond=c, body=b):
                walk_expr(c)
                for x in b:
                    walk(x)
            case Return(value=v):
                if v is not None:
                    walk_expr(v)
            case ExprStmt(call=c):
                walk_expr(c)
            case _:
                pass

    for s in stmts:
        walk(s)
    return found


def _breaks_or_returns(stmts) -> bool:
    """True if any break/return occurs in stmts (nested loops not descended)."""
    for s in stmts:
        match s:
            case Break() | Return():
                return True
            case If(then_body=tb, else_body=eb):
                if _breaks_or_returns(tb) or _breaks_or_returns(eb):
                    return True
            case _:
                pass
    return False


def _reference_assignments(stmts) -> Optional[str]:
    """Name of the first reference-typed assignment or declaration, if any."""
    for s in stmts:
        match s:
            case Assign(target=Var(name=n) as v) if v.ty is not None and not v.ty.is_scalar:
                return n
            case Decl(decl_type=t, name=n) if not t.is_scalar:
                return n
            case If(then_body=tb, else_body=eb):
                hit = _reference_assignments(tb) or _reference_assignments(eb)
                if hit:
                    return hit
            case _:
                pass
    return None


def _match_canonical(loop: While):
    """Returns (counter, data_var, stride) for a canonical loop, else an error string."""
    body = loop.body
    if not body:
        return "empty loop body"
    exit_if = body[0]
    match exit_if:
        case If(
            cond=Unary(op="!", operand=Binary(op="<", left=Var(name=counter), right=bound)),
            then_body=(Break(),),
            else_body=(),
        ):
            pass
        case _:
            return "no canonical exit check at loop head"
    match bound:
        case Call(func="length", args=(Var(name=data_var),)):
            pass
        case _:
            return "loop bound is not length(<array>)"
    match body[-1]:
        case Assign(target=Var(name=n), value=Binary(op="+", left=Var(name=m), right=IntLit(value=k))) if n == counter and m == counter:
            stride = k
        case Assign(target=Var(name=n), value=Binary(op="+", left=IntLit(value=k), right=Var(name=m))) if n == counter and m == counter:
            stride = k
        case _:
            return "no literal counter update as the final statement"
    if stride < 1:
        return f"non-positive stride {stride}"
    # the counter may not be written anywhere else in the body
    for s in body[1:-1]:
        if _assigns_to(s, counter):
            return f"counter {counter!r} written inside the body"
    return (counter, data_var, stride)


def _assigns_to(s, name: str) -> bool:
    match s:
        case Assign(target=Var(name=n)):
            return n == name
        case Decl(name=n):
            return n == name
        case If(then_body=tb, else_body=eb):
            return any(_assigns_to(x, name) for x in tb) or any(
                _assigns_to(x, name) for x in eb
            )
        case While(body=b):
            return any(_assigns_to(x, name) for x in b)
        case _:
            return False


def _decl_positions(func) -> dict:
    order = {}
    pos = [0]

    def note(name):
        if name not in order:
            order[name] = pos[0]
        pos[0] += 1

    for q in func.params:
        note(q.name)

    def walk(stmts):
        for s in stmts:
            match s:
                case Decl(name=n):
                    note(n)
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

    walk(func.body)
    return order


def extract_fragments(p: NormalizedProgram):
    """All loops of p, split into admitted LoopFragments and RejectionReports.

    Every loop lands in exactly one of the two lists. Rejection is data, not
    failure.
    """
    fragments = []
    rejections = []

    def consider(loop: While, loc: str, func, idx: int, top_level: bool, pre_loop: tuple):
        bindings = function_var_types(func)
        body = loop.body
        bad_call = next((c for c in _calls_in(body) if c not in WHITELISTED_CALLS), None)
        if bad_call is not None:
            return RejectionReport(loc, REASON_UNSUPPORTED_CALL, f"call to {bad_call!r}")
        if not (isinstance(loop.cond, BoolLit) and loop.cond.value):
            return RejectionReport(loc, REASON_UNSTRUCTURED, "not a canonical while(true) loop")
        shape = _match_canonical(loop)
        if isinstance(shape, str):
            return RejectionReport(loc, REASON_UNSTRUCTURED, shape)
        counter, data_var, stride = shape
        if _breaks_or_returns(body[1:]):
            return RejectionReport(loc, REASON_UNSTRUCTURED, "break or return inside the body")
        alias = _reference_assignments(body[1:])
        if alias is not None:
            return RejectionReport(loc, REASON_ALIASING, f"reference assignment to {alias!r}")
        data_type = bindings.get(data_var)
        if data_type is None or data_type.kind != "array":
            return RejectionReport(loc, REASON_UNSTRUCTURED, f"{data_var!r} is not an array")
        return LoopFragment(
            id=loc,
            func=func.name,
            stmt_index=idx if top_level else -1,
            loop=loop,
            bindings=bindings,
            decl_order=_decl_positions(func),
            pre_loop=pre_loop if top_level else (),
            data_var=data_var,
            data_elem=data_type.elem,
            stride=stride,
            counter=counter,
        )

    for func in p.functions:
        counter_box = [0]

        def visit(stmts, top_level: bool):
            before = []
            for idx, s in enumerate(stmts):
                match s:
                    case While():
                        loc = f"{func.name}:loop{counter_box[0]}"
                        counter_box[0] += 1
                        if _contains_loop(s.body):
                            rejections.append(
                                RejectionReport(loc, REASON_NESTED, "only innermost loops are lifted")
                            )
                            visit(s.body, False)
                        else:
                            out = consider(s, loc, func, idx, top_level, tuple(before))
                            if isinstance(out, RejectionReport):
                                rejections.append(out)
                            else:
                                fragments.append(out)
                    case For():
                        raise ClassificationError("For loop survived normalization")
                    case If(then_body=tb, else_body=eb):
                        visit(tb, False)
                        visit(eb, False)
                    case _:
                        pass
                if top_level:
                    before.append(s)

        visit(func.body, True)

    return fragments, rejections


# ---------------------------------------------------------------------------
# Variable classification


def _walk_reads(e: Expr, reads: list, literal_index_reads: list):
    """Record variable reads; Index(Var, IntLit) is noted separately."""
    match e:
        case Var(name=n):
            reads.append(n)
        case Index(array=Var(name=a), index=IntLit(value=k)):
            literal_index_reads.append((a, k))
        case Index(array=a, index=i):
            _walk_reads(a, reads, literal_index_reads)
            _walk_reads(i, reads, literal_index_reads)
        case Binary(left=l, right=r):
            _walk_reads(l, reads, literal_index_reads)
            _walk_reads(r, reads, literal_index_reads)
        case Unary(operand=x):
            _walk_reads(x, reads, literal_index_reads)
        case Call(args=args):
            for a in args:
                _walk_reads(a, reads, literal_index_reads)
        case NewArray(size=sz):
            _walk_reads(sz, reads, literal_index_reads)
        case _:
            pass


def classify_vars(f: LoopFragment) -> VarRoles:
    """Split the fragment's variables into inputs, outputs and locals.

    Assignment targets declared outside the loop become outputs; variables
    read by the body become inputs unless they are already outputs (those are
    tracked as read-written); body-declared variables and the counter are
    locals. Arrays read only at literal indices turn into one synthetic input
    per element.
    """
    writes = []
    reads = []
    literal_reads = []
    declared = []

    def walk(stmts):
        for s in stmts:
            match s:
                case Decl(name=n, init=init):
                    declared.append(n)
                    if init is not None:
                        _walk_reads(init, reads, literal_reads)
                case Assign(target=Var(name=n), value=v):
                    writes.append(n)
                    _walk_reads(v, reads, literal_reads)
                case Assign(target=Index(array=Var(name=a), index=i), value=v):
                    writes.append(a)
                    _walk_reads(i, reads, literal_reads)
                    _walk_reads(v, reads, literal_reads)
                case If(cond=c, then_body=tb, else_body=eb):
                    _walk_reads(c, reads, literal_reads)
                    walk(tb)
                    walk(eb)
                case ExprStmt(call=Call(func="put", args=(Var(name=m), k, v))):
                    writes.append(m)
                    _walk_reads(k, reads, literal_reads)
                    _walk_reads(v, reads, literal_reads)
                case ExprStmt(call=c):
                    _walk_reads(c, reads, literal_reads)
                case _:
                    raise ClassificationError(f"unexpected statement in fragment: {s!r}")

    # the exit check reads the counter and the data array; the final counter
    # update reads and writes only the counter
    _walk_reads(f.exit_check.cond, reads, literal_reads)
    walk(f.core_body)
    _walk_reads(f.counter_update.value, reads, literal_reads)

    declared_set = set(declared)
    outputs = []
    for n in writes:
        if n in declared_set or n == f.counter:
            continue
        if n not in f.bindings:
            raise ClassificationError(f"write to unknown variable {n!r}")
        if n not in outputs:
            outputs.append(n)

    written_arrays = set(outputs)
    dyn_read = set(reads)
    synthetic = []
    literal_only = {}
    for a, k in literal_reads:
        if a in dyn_read or a in written_arrays or a in declared_set:
            dyn_read.add(a)
        else:
            literal_only.setdefault(a, set()).add(k)
    for a, ks in sorted(literal_only.items()):
        if a in dyn_read:
            continue
        elem = f.bindings[a].elem
        for k in sorted(ks):
            synthetic.append(SyntheticInput(f"{a}[{k}]", a, k, elem))

    inputs = []
    order = f.decl_order
    candidates = sorted(
        (n for n in dyn_read if n not in declared_set and n != f.counter and n not in outputs),
        key=lambda n: order.get(n, 1 << 30),
    )
    for n in candidates:
        if n not in f.bindings:
            raise ClassificationError(f"read of unknown variable {n!r}")
        if n not in inputs:
            inputs.append(n)
    inputs.extend(s.name for s in synthetic)

    outputs.sort(key=lambda n: order.get(n, 1 << 30))
    read_written = tuple(n for n in outputs if n in dyn_read)
    locals_ = sorted(declared_set | {f.counter}, key=lambda n: order.get(n, 1 << 30))

    roles = VarRoles(
        inputs=tuple(inputs),
        outputs=tuple(outputs),
        locals=tuple(locals_),
        read_written=read_written,
        synthetic=tuple(synthetic),
    )
    # totality: everything occurring must be classified (literal-only arrays
    # are represented by their synthetic per-element inputs)
    occurring = set(reads) | set(writes) | declared_set | {f.counter}
    classified = set(roles.inputs) | set(roles.outputs) | set(roles.locals) | set(literal_only)
    unaccounted = sorted(occurring - classified)
    if unaccounted:
        raise ClassificationError(f"unclassified variables: {unaccounted}")
    return roles


def assign_var_ids(roles: VarRoles) -> VarRoles:
    """Give each output its stable id: 0..n-1 in declaration order."""
    if not roles.outputs:
        raise NoOutputsError("fragment has no output variables")
    return replace(roles, id_of={name: i for i, name in enumerate(roles.outputs)})
