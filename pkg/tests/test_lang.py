"""Frontend tests: parser, typechecker, normalizer, interpreter."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liftmr import corpus
from liftmr.lang import (
    MJSyntaxError,
    MJTrap,
    MJTypeError,
    frontend,
    interpret,
    normalize,
    parse,
    program_source,
    typecheck,
)
from liftmr.lang.ast import (
    Assign,
    Binary,
    BoolLit,
    Break,
    Decl,
    For,
    If,
    IntLit,
    NewArray,
    Unary,
    Var,
    While,
)

SUMMATION = corpus.source("summation")
HISTOGRAM = corpus.source("histogram3d")


# ---------------------------------------------------------------------------
# parser


def test_parse_summation_loop():
    p = parse("int main(int[] data) { int sum = 0; for (int i = 0; i < data.length; i++) sum = sum + data[i]; return sum; }")
    (main,) = p.functions
    kinds = [type(s).__name__ for s in main.body]
    assert kinds == ["Decl", "For", "Return"]


def test_parse_histogram_has_three_array_decls():
    p = parse(HISTOGRAM)
    decls = [s for s in p.main.body if isinstance(s, Decl) and isinstance(s.init, NewArray)]
    assert [d.name for d in decls] == ["hR", "hG", "hB"]
    loops = [s for s in p.main.body if isinstance(s, For)]
    assert len(loops) == 1


def test_parse_error_position():
    with pytest.raises(MJSyntaxError) as exc:
        parse("int main(int x) {\n    int y = ;\n}")
    assert exc.value.line == 2
    assert exc.value.col == 13


@pytest.mark.parametrize(
    "src",
    [
        "int main() { float x = 1; }",  # unknown type
        "int main() { map<int[],int> m = new map<int,int>(); }",  # non-scalar key
        "int main( { }",
        "int main() { if (true) { } else }",
    ],
)
def test_parse_rejects(src):
    with pytest.raises(MJSyntaxError):
        parse(src)


def test_parse_sugar_forms():
    p = parse(
        "int main(int[] a) { int x = 0; x += 2; x++; x--; x *= 3;"
        " while (x < a.length) { x = x + 1; } return x; }"
    )
    body = p.main.body
    assert isinstance(body[1], Assign) and body[1].value.op == "+"
    assert isinstance(body[2], Assign) and body[2].value == Binary("+", Var("x"), IntLit(1))


def test_pretty_print_fixpoint_on_corpus():
    for name in corpus.BENCHMARK_NAMES:
        src = program_source(typecheck(parse(corpus.source(name))))
        assert program_source(typecheck(parse(src))) == src
        # and for the normalized form
        nsrc = program_source(frontend(corpus.source(name)))
        assert program_source(typecheck(parse(nsrc))) == nsrc


# ---------------------------------------------------------------------------
# typechecker


def test_typecheck_summation():
    p = typecheck(parse(SUMMATION))
    decl = p.main.body[0]
    assert decl.name == "sum" and decl.decl_type.kind == "int"


def test_typecheck_histogram_arrays():
    p = typecheck(parse(HISTOGRAM))
    for d in p.main.body[:3]:
        assert d.decl_type.kind == "array" and d.decl_type.elem.kind == "int"


@pytest.mark.parametrize(
    "src,fragment",
    [
        ("int main(int[] data) { bool b = data[0]; return 0; }", "cannot initialize"),
        ("int main() { return x; }", "undeclared"),
        ("int main() { int x = 0; int x = 1; return x; }", "duplicate"),
        ("int main() { int x = 0; } int main() { return 1; }", "duplicate function"),
        ("int f(int x) { return g(x); } int g(int x) { return f(x); } int main() { return 0; }", "recursion"),
        ("int main(map<string,int> m) { int x = put(m, \"a\", 1); return x; }", "statement"),
        ("int main() { int x = 1 + true; return x; }", "needs int operands"),
        ("int main() { if (1) { } return 0; }", "must be bool"),
        ("int main() { break; }", "break outside loop"),
        ("int main() { bool b = true; return b; }", "return type"),
        ("int main(int[] a) { int x = length(5); return x; }", "needs an array"),
        ("int main() { int[] a; return 0; }", "requires an initializer"),
        ("int main() { int y = new int[3]; return y; }", "cannot initialize"),
    ],
)
def test_typecheck_rejects(src, fragment):
    with pytest.raises(MJTypeError) as exc:
        typecheck(parse(src))
    assert fragment in str(exc.value)


def test_block_scoping_hides_loop_locals():
    src = "int main(int[] a) { for (int i = 0; i < length(a); i++) { int r = a[i]; } return r; }"
    with pytest.raises(MJTypeError):
        typecheck(parse(src))


# ---------------------------------------------------------------------------
# normalizer


def test_normalize_for_to_canonical_while():
    p = frontend("int main(int[] d) { int s = 0; for (int i = 0; i < length(d); i += 3) { s = s + 1; } return s; }")
    loop = next(s for s in p.main.body if isinstance(s, While))
    assert isinstance(loop.cond, BoolLit) and loop.cond.value
    head = loop.body[0]
    assert isinstance(head, If) and isinstance(head.cond, Unary) and head.cond.op == "!"
    assert isinstance(head.then_body[0], Break)
    last = loop.body[-1]
    assert isinstance(last, Assign) and last.value == Binary("+", Var("i"), IntLit(3))


def test_normalize_lowers_to_binary():
    p = frontend("int main() { int a = 1; int b = 2; int c = 3; int x = 0; x = a + b + c; return x; }")
    assign = [s for s in p.main.body if isinstance(s, Assign)]
    # a + b + c becomes a temp plus a final binary assignment
    assert any(isinstance(s, Decl) and s.name.startswith("__t") for s in p.main.body)
    final = assign[-1]
    assert isinstance(final.value, Binary)
    assert isinstance(final.value.left, Var) and isinstance(final.value.right, Var)


def test_normalize_no_loops_keeps_structure():
    p = frontend("int main() { int x = 1 + 2; return x; }")
    assert [type(s).__name__ for s in p.main.body] == ["Decl", "Return"]


def _random_env(rng, program):
    env = {}
    for q in program.main.params:
        t = q.param_type
        if t.kind == "array":
            n = rng.randint(0, 12)
            if t.elem.kind == "int":
                env[q.name] = [rng.randint(-30, 30) for _ in range(n)]
            else:
                env[q.name] = [rng.choice("abcde") for _ in range(n)]
        elif t.kind == "int":
            env[q.name] = rng.randint(-30, 30)
        elif t.kind == "bool":
            env[q.name] = rng.random() < 0.5
        elif t.kind == "str":
            env[q.name] = rng.choice("abcde")
        else:
            env[q.name] = {}
    return env


@pytest.mark.parametrize("name", corpus.BENCHMARK_NAMES)
def test_normalization_preserves_semantics(name):
    src = corpus.source(name)
    typed = typecheck(parse(src))
    normalized = normalize(typed)
    rng = random.Random(name)
    for trial in range(100):
        env = _random_env(rng, typed)
        if name == "histogram3d":
            env["data"] = [abs(v) % 256 for v in env["data"]]
            env["data"] = env["data"][: len(env["data"]) - len(env["data"]) % 3]
        try:
            want = interpret(typed, env)
        except MJTrap:
            continue
        got = interpret(normalized, env)
        assert got == want, (name, trial, env)


# ---------------------------------------------------------------------------
# interpreter


def test_interpret_histogram_by_hand():
    p = frontend(HISTOGRAM)
    env = interpret(p, {"data": [1, 0, 2]})
    assert env["hR"][1] == 1 and sum(env["hR"]) == 1
    assert env["hG"][0] == 1 and sum(env["hG"]) == 1
    assert env["hB"][2] == 1 and sum(env["hB"]) == 1


def test_interpret_summation_empty():
    assert interpret(frontend(SUMMATION), {"data": []})["sum"] == 0


def test_interpret_wordcount():
    p = frontend(corpus.source("wordcount"))
    assert interpret(p, {"data": ["a", "b", "a"]})["counts"] == {"a": 2, "b": 1}


@pytest.mark.parametrize(
    "src,kind",
    [
        ("int main(int[] a) { int x = a[3]; return x; }", "index-out-of-bounds"),
        ("int main() { int x = 1 / 0; return x; }", "division-by-zero"),
        ("int main() { int x = 1 % 0; return x; }", "division-by-zero"),
        (
            "int main() { int x = 9223372036854775807; x = x + 1; return x; }",
            "overflow",
        ),
    ],
)
def test_interpret_traps(src, kind):
    with pytest.raises(MJTrap) as exc:
        interpret(frontend(src), {"a": [1]} if "a" in src else {})
    assert exc.value.kind == kind


def test_interpret_negative_array_size():
    p = frontend("int main(int n) { int[] a = new int[n]; return 0; }")
    with pytest.raises(MJTrap) as exc:
        interpret(p, {"n": -3})
    assert exc.value.kind == "negative-array-size"


def test_interpret_fuel_exhaustion():
    src = "int main() { int x = 0; while (true) { x = x + 0; } return x; }"
    with pytest.raises(MJTrap) as exc:
        interpret(frontend(src), {}, fuel=5000)
    assert exc.value.kind == "fuel-exhausted"


def test_java_division_semantics():
    p = frontend("int main(int a, int b) { int q = a / b; int r = a % b; return q; }")
    env = interpret(p, {"a": -7, "b": 2})
    assert env["q"] == -3 and env["r"] == -1
    env = interpret(p, {"a": 7, "b": -2})
    assert env["q"] == -3 and env["r"] == 1


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(min_value=-1000, max_value=1000), max_size=50))
def test_interpret_deterministic(data):
    p = frontend(SUMMATION)
    assert interpret(p, {"data": data}) == interpret(p, {"data": data})
    assert interpret(p, {"data": data})["sum"] == sum(data)
