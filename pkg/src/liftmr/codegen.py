"""Summary serialization, job binding, host-program rewriting and rendering.

The SummaryDoc format is a single-file, line-oriented canonical text with a
`liftmr-summary v1` header; expression trees are written in parenthesized
prefix form. Serialization is byte-stable and round-trips to an equal
Summary.
"""

from __future__ import annotations

import re
from dataclasses import replace

from .analyzer import LoopFragment
from .lang.ast import (
    Binary,
    BoolLit,
    Call,
    CounterFixStmt,
    Expr,
    FunctionDecl,
    If,
    IntLit,
    MRJobStmt,
    Program,
    ReconStmt,
    RewrittenProgram,
    StrLit,
    Unary,
    Var,
    While,
    BOOL,
    INT,
    STR,
    expr_source,
)
from .runtime import Job, OutputShape
from .specgen import (
    ArrayShape,
    BoolInit,
    EmptyMap,
    IntInit,
    MapShape,
    Precondition,
    ScalarShape,
    OutputSpec,
    SummaryTemplate,
    ZeroArray,
)
from .synth.candidates import Candidate, CounterExp, Emit, Fold, expr_text
from .synth.domain import BoundedDomain
from .synth.engine import Summary

DOC_HEADER = "liftmr-summary v1"


class SummaryDocError(Exception):
    pass


class UnknownDialectError(Exception):
    pass


class BindError(Exception):
    pass


_TYPE_NAMES = {INT: "int", BOOL: "bool", STR: "str"}
_NAME_TYPES = {"int": INT, "bool": BOOL, "str": STR}


def _init_text(init) -> str:
    match init:
        case IntInit(value=v):
            return str(v)
        case BoolInit(value=v):
            return "true" if v else "false"
    raise SummaryDocError(f"cannot serialize init {init!r}")


# ---------------------------------------------------------------------------
# emit_summary


def emit_summary(s: Summary) -> str:
    """Canonical text for a verified summary; parse_summary inverts it."""
    t = s.template
    d = s.domain
    lines = [DOC_HEADER]
    lines.append(f"fragment {s.fragment_id}")
    lines.append(
        f"domain maxlen={d.max_len} intrange={d.int_range[0]}:{d.int_range[1]}"
        f" alphabet={d.alphabet} maxctx={d.max_contexts} seed={d.seed}"
    )
    lines.append(f"iteration {s.iteration}")
    lines.append(f"examined {s.candidates_examined}")
    lines.append(f"data {t.data_var} {_TYPE_NAMES[t.data_elem]}")
    lines.append(f"counter {t.counter} init {_init_text(t.counter_init)} stride {t.stride}")
    for spec in t.outputs:
        match spec.shape:
            case ScalarShape(value_type=vt):
                lines.append(
                    f"output {spec.var_id} {spec.name} scalar {_TYPE_NAMES[vt]}"
                    f" init {_init_text(spec.init)}"
                )
            case ArrayShape(length=n):
                lines.append(f"output {spec.var_id} {spec.name} array int len {n}")
            case MapShape(key=kt, val=vt):
                lines.append(
                    f"output {spec.var_id} {spec.name} map {_TYPE_NAMES[kt]} {_TYPE_NAMES[vt]}"
                )
    for name, ty in t.scalar_inputs:
        lines.append(f"input {name} {_TYPE_NAMES[ty]}")
    c = s.candidate
    for e in c.emits:
        guard = "true" if e.guard is None else expr_text(e.guard)
        if len(e.key) == 1:
            key = expr_text(e.key[0])
        else:
            key = "(tuple " + " ".join(expr_text(k) for k in e.key) + ")"
        lines.append(f"emit guard {guard} key {key} value {expr_text(e.value)}")
    for f in c.folds:
        init = "true" if f.init is True else "false" if f.init is False else str(f.init)
        lines.append(f"fold {f.value_type} init {init} expr {expr_text(f.expr)}")
    ce = c.counter_exp
    lines.append(
        f"counterexp (<= {expr_text(ce.lo)} {expr_text(ce.mid)} {expr_text(ce.hi)})"
    )
    lines.append("end")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# parse_summary


def _tokenize_sexpr(text: str) -> list:
    return re.findall(r'\(|\)|"[^"]*"|[^\s()]+', text)


def _parse_sexpr(tokens: list, pos: int):
    tok = tokens[pos]
    if tok == "(":
        head = tokens[pos + 1]
        args = []
        pos += 2
        while tokens[pos] != ")":
            node, pos = _parse_sexpr(tokens, pos)
            args.append(node)
        pos += 1
        return _build_expr(head, args), pos
    return _atom(tok), pos + 1


_OPS = set("+ - * / % < <= > >= == != && ||".split())


def _build_expr(head: str, args: list) -> Expr:
    if head == "<=" and len(args) == 3:  # counter range chain lo <= mid <= hi
        return Binary("<=", args[0], Binary("<=", args[1], args[2]))
    if head in _OPS and len(args) == 2:
        return Binary(head, args[0], args[1])
    if head == "!" and len(args) == 1:
        return Unary("!", args[0])
    if head == "-" and len(args) == 1:
        return Unary("-", args[0])
    if head == "index" and len(args) == 2:
        from .lang.ast import Index

        return Index(args[0], args[1])
    if head == "length" and len(args) == 1:
        return Call("length", tuple(args))
    if head == "tuple":
        return _TupleMarker(args)
    raise SummaryDocError(f"unknown expression head {head!r}")


class _TupleMarker:
    def __init__(self, items):
        self.items = items


def _atom(tok: str) -> Expr:
    if tok.startswith('"'):
        return StrLit(tok[1:-1])
    if tok == "true":
        return BoolLit(True)
    if tok == "false":
        return BoolLit(False)
    if re.fullmatch(r"-?\d+", tok):
        return IntLit(int(tok))
    return Var(tok)


def _read_expr(text: str):
    tokens = _tokenize_sexpr(text)
    node, pos = _parse_sexpr(tokens, 0)
    if pos != len(tokens):
        raise SummaryDocError(f"trailing tokens in expression: {text!r}")
    return node


def parse_summary(text: str) -> Summary:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != DOC_HEADER:
        raise SummaryDocError(f"missing {DOC_HEADER!r} header")
    if lines[-1].strip() != "end":
        raise SummaryDocError("missing end marker")
    fields: dict = {"outputs": [], "inputs": [], "emits": [], "folds": []}
    for ln in lines[1:-1]:
        word, _, rest = ln.strip().partition(" ")
        if word == "fragment":
            fields["fragment"] = rest
        elif word == "domain":
            kv = dict(item.split("=", 1) for item in rest.split())
            lo, hi = kv["intrange"].split(":")
            fields["domain"] = BoundedDomain(
                max_len=int(kv["maxlen"]),
                int_range=(int(lo), int(hi)),
                alphabet=int(kv["alphabet"]),
                max_contexts=int(kv.get("maxctx", 200_000)),
                seed=int(kv.get("seed", 0)),
            )
        elif word == "iteration":
            fields["iteration"] = int(rest)
        elif word == "examined":
            fields["examined"] = int(rest)
        elif word == "data":
            name, ty = rest.split()
            fields["data"] = (name, _NAME_TYPES[ty])
        elif word == "counter":
            m = re.fullmatch(r"(\S+) init (\S+) stride (\d+)", rest)
            if not m:
                raise SummaryDocError(f"bad counter line: {ln!r}")
            fields["counter"] = (m.group(1), int(m.group(2)), int(m.group(3)))
        elif word == "output":
            fields["outputs"].append(rest.split())
        elif word == "input":
            name, ty = rest.split()
            fields["inputs"].append((name, _NAME_TYPES[ty]))
        elif word == "emit":
            m = re.fullmatch(r"guard (.+) key (.+) value (.+)", rest)
            if not m:
                raise SummaryDocError(f"bad emit line: {ln!r}")
            fields["emits"].append((m.group(1), m.group(2), m.group(3)))
        elif word == "fold":
            m = re.fullmatch(r"(int|bool) init (\S+) expr (.+)", rest)
            if not m:
                raise SummaryDocError(f"bad fold line: {ln!r}")
            fields["folds"].append((m.group(1), m.group(2), m.group(3)))
        elif word == "counterexp":
            fields["counterexp"] = rest
        else:
            raise SummaryDocError(f"unknown line {ln!r}")

    for needed in ("fragment", "domain", "iteration", "examined", "data", "counter", "counterexp"):
        if needed not in fields:
            raise SummaryDocError(f"missing {needed} line")
    if not fields["outputs"]:
        raise SummaryDocError("no outputs")

    counter, counter_init, stride = fields["counter"]
    data_var, data_elem = fields["data"]

    outputs = []
    bindings = []
    for parts in fields["outputs"]:
        var_id, name, kind = int(parts[0]), parts[1], parts[2]
        if kind == "scalar":
            vt = _NAME_TYPES[parts[3]]
            raw = parts[5]
            init = (
                BoolInit(raw == "true") if vt == BOOL else IntInit(int(raw))
            )
            shape = ScalarShape(vt)
        elif kind == "array":
            length = int(parts[5])
            init = ZeroArray(length)
            shape = ArrayShape(length, INT)
        elif kind == "map":
            kt, vt = _NAME_TYPES[parts[3]], _NAME_TYPES[parts[4]]
            init = EmptyMap(kt, vt)
            shape = MapShape(kt, vt)
        else:
            raise SummaryDocError(f"unknown output kind {kind!r}")
        outputs.append(OutputSpec(name, var_id, shape, init))
        bindings.append((name, init))
    bindings.append((counter, IntInit(counter_init)))

    template = SummaryTemplate(
        fragment_id=fields["fragment"],
        data_var=data_var,
        data_elem=data_elem,
        counter=counter,
        counter_init=IntInit(counter_init),
        stride=stride,
        outputs=tuple(sorted(outputs, key=lambda o: o.var_id)),
        scalar_inputs=tuple(fields["inputs"]),
        collection_inputs=(),
        precondition=Precondition(bindings=tuple(bindings)),
    )

    emits = []
    for guard_s, key_s, value_s in fields["emits"]:
        guard = None if guard_s == "true" else _read_expr(guard_s)
        key_node = _read_expr(key_s)
        if isinstance(key_node, _TupleMarker):
            key = tuple(key_node.items)
        else:
            key = (key_node,)
        emits.append(Emit(guard, key, _read_expr(value_s)))
    folds = []
    for kind, init_s, expr_s in fields["folds"]:
        init = (init_s == "true") if kind == "bool" else int(init_s)
        folds.append(Fold(kind, init, _read_expr(expr_s)))
    ce = _read_expr(fields["counterexp"])
    match ce:
        case Binary(op="<=", left=lo, right=Binary(op="<=", left=mid, right=hi)):
            counter_exp = CounterExp(lo, mid, hi)
        case _:
            raise SummaryDocError(f"bad counterexp {fields['counterexp']!r}")

    candidate = Candidate(
        emits=tuple(emits),
        folds=tuple(folds),
        counter_exp=counter_exp,
        counter=counter,
        data_var=data_var,
    )
    return Summary(
        fragment_id=fields["fragment"],
        candidate=candidate,
        template=template,
        domain=fields["domain"],
        iteration=fields["iteration"],
        candidates_examined=fields["examined"],
    )


# ---------------------------------------------------------------------------
# bind_job


def bind_job(s: Summary) -> Job:
    """Bind a verified summary to a runtime job.

    The combiner is enabled exactly when every fold's input value type equals
    its output value type (ours are endomorphic by construction). Array output
    lengths must be statically known.
    """
    shapes = []
    for spec in s.template.outputs:
        match spec.shape:
            case ScalarShape(value_type=vt):
                shapes.append(OutputShape(spec.var_id, spec.name, "scalar", vt.kind))
            case ArrayShape(length=n):
                if n is None:
                    raise BindError(f"array output {spec.name!r} has no static length")
                shapes.append(OutputShape(spec.var_id, spec.name, "array", "int", length=n))
            case MapShape(key=kt, val=vt):
                shapes.append(
                    OutputShape(spec.var_id, spec.name, "map", vt.kind, key_kind=kt.kind)
                )
    combiner = all(_fold_endomorphic(f) for f in s.candidate.folds)
    return Job(
        fragment_id=s.fragment_id,
        candidate=s.candidate,
        output_shapes=tuple(shapes),
        input_names=tuple(n for n, _ in s.template.scalar_inputs),
        combiner_enabled=combiner,
    )


def _fold_endomorphic(f: Fold) -> bool:
    """Input and output value types coincide; our fold grammar only builds
    such folds, so this is a structural sanity check."""
    return f.value_type in ("int", "bool")


# ---------------------------------------------------------------------------
# rewrite_program


class RewriteError(Exception):
    pass


def rewrite_program(p: Program, f: LoopFragment, s: Summary, workers: int = 1) -> RewrittenProgram:
    """Replace the fragment's loop with a job invocation plus per-output
    reconstruction assignments; all other statements are untouched."""
    job = bind_job(s)
    result = "__mr0"
    replacement = [
        MRJobStmt(
            result_name=result,
            job=job,
            data_var=f.data_var,
            input_vars=job.input_names,
            workers=workers,
        )
    ]
    for spec in s.template.outputs:
        replacement.append(ReconStmt(spec.name, result, spec.var_id))
    match s.template.counter_init:
        case IntInit(value=i0):
            replacement.append(CounterFixStmt(f.counter, i0, f.stride, f.data_var))

    replaced = [0]

    def rewrite_stmts(stmts) -> tuple:
        out = []
        for st in stmts:
            if st is f.loop:
                out.extend(replacement)
                replaced[0] += 1
                continue
            match st:
                case While(cond=c, body=b):
                    out.append(While(c, rewrite_stmts(b), pos=st.pos))
                case If(cond=c, then_body=tb, else_body=eb):
                    out.append(If(c, rewrite_stmts(tb), rewrite_stmts(eb), pos=st.pos))
                case _:
                    out.append(st)
        return tuple(out)

    functions = []
    for fn in p.functions:
        if fn.name == f.func:
            functions.append(
                FunctionDecl(fn.name, fn.params, fn.return_type, rewrite_stmts(fn.body), pos=fn.pos)
            )
        else:
            functions.append(fn)
    if replaced[0] != 1:
        raise RewriteError(f"fragment loop matched {replaced[0]} times in {f.func}")
    return RewrittenProgram(functions=tuple(functions))


# ---------------------------------------------------------------------------
# render_target_source


def _java_class_name(fragment_id: str) -> str:
    return "".join(part.capitalize() for part in re.split(r"[^0-9A-Za-z]+", fragment_id)) + "Job"


def render_target_source(s: Summary, dialect: str = "hadoop-java-sketch") -> str:
    """Readable mapper/reducer/execute skeleton; documentation, not compiled."""
    if dialect != "hadoop-java-sketch":
        raise UnknownDialectError(f"unknown dialect {dialect!r}")
    t = s.template
    cls = _java_class_name(s.fragment_id)
    elem = "int" if t.data_elem == INT else "String"
    lines = [f"public class {cls} {{"]
    lines.append(f"    static class {cls}Mapper extends Mapper {{")
    lines.append(f"        void map(long key, {elem}[] {t.data_var}) {{")
    lines.append(f"            for (int {t.counter} = 0; {t.counter} < {t.data_var}.length; {t.counter} += 1) {{")
    for e in s.candidate.emits:
        if len(e.key) == 1:
            key = expr_source(e.key[0])
        else:
            key = "(" + ", ".join(expr_source(k) for k in e.key) + ")"
        stmt = f"emit({key}, {expr_source(e.value)});"
        if e.guard is None:
            lines.append(f"                {stmt}")
        else:
            lines.append(f"                if ({expr_source(e.guard)}) {{ {stmt} }}")
    lines.append("            }")
    lines.append("        }")
    lines.append("    }")
    for f in s.candidate.folds:
        jt = "int" if f.value_type == "int" else "boolean"
        init = expr_source(IntLit(f.init)) if f.value_type == "int" else ("true" if f.init else "false")
        fold_src = expr_source(f.expr)
        lines.append(f"    static class {cls}Reducer extends Reducer {{")
        lines.append(f"        void reduce(Object key, {jt}[] values) {{")
        lines.append(f"            {jt} value = {init};")
        lines.append(f"            for ({jt} v : values) {{ value = {fold_src}; }}")
        lines.append("            emit(key, value);")
        lines.append("        }")
        lines.append("    }")
    inputs = ", ".join(f"{'int' if ty == INT else 'String'} {n}" for n, ty in t.scalar_inputs)
    lines.append(f"    static Map execute({inputs}) {{")
    lines.append("        Job job = Job.getInstance();")
    lines.append(f"        job.setMapper({cls}Mapper);")
    if bind_job(s).combiner_enabled:
        lines.append(f"        job.setCombiner({cls}Reducer);")
    lines.append(f"        job.setReducer({cls}Reducer);")
    lines.append("        return job.execute();")
    lines.append("    }")
    lines.append("}")
    return "\n".join(lines) + "\n"
