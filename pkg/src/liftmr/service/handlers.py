"""Service operations over the core package.

Each handler is a plain function from a request model to a response model;
the FastAPI routes and the CLI both call these.
"""

from __future__ import annotations

import random
import statistics
import time

from .. import codegen, corpus, runtime
from ..analyzer import NoOutputsError, assign_var_ids, classify_vars, extract_fragments
from ..lang import MJError, frontend, interpret
from ..lang.ast import STR
from ..lang.errors import MJTrap
from ..specgen import gen_grammar, gen_precondition, gen_template
from ..synth import BoundedDomain, GiveUp, SynthConfig, synthesize
from . import models


def synth_config(s: models.SynthSettings) -> SynthConfig:
    return SynthConfig(
        domain=BoundedDomain(
            max_len=s.bmc_max_len,
            int_range=tuple(s.bmc_int_range),
            alphabet=s.bmc_alphabet,
            seed=s.seed,
        ),
        recursion_bound=s.recursion_bound,
        max_emits=s.max_emits,
        timeout_s=s.timeout_s,
        workers=s.workers,
        seed=s.seed,
        max_iterations=s.max_iterations,
    )


def lift(req: models.LiftRequest) -> models.LiftResponse:
    try:
        program = frontend(req.source)
    except MJError as e:
        return models.LiftResponse(ok=False, error=f"{req.filename}:{e}")
    fragments, rejections = extract_fragments(program)
    cfg = synth_config(req.settings)
    summaries = []
    diagnostics = [r.diagnostic() for r in rejections]
    for f in fragments:
        try:
            roles = assign_var_ids(classify_vars(f))
        except NoOutputsError:
            diagnostics.append(f"fragment={f.id} skipped: no output variables")
            continue
        result = synthesize(f, roles, cfg)
        if isinstance(result, GiveUp):
            diagnostics.append(
                f"fragment={f.id} gave up: {result.reason}"
                + (f" ({result.detail})" if result.detail else "")
            )
            continue
        spec_text = None
        if req.emit_spec:
            pre = gen_precondition(f, roles)
            template = gen_template(f, roles, pre)
            grammar = gen_grammar(f, roles, result.iteration)
            spec_text = template.text() + "\n" + grammar.text()
        summaries.append(
            models.FragmentSummary(
                fragment=f.id,
                iterations=result.iteration,
                candidates_examined=result.candidates_examined,
                wall_ms=result.wall_ms,
                doc=codegen.emit_summary(result),
                sketch=codegen.render_target_source(result),
                spec_text=spec_text,
            )
        )
    return models.LiftResponse(
        ok=bool(summaries),
        summaries=summaries,
        rejections=[
            models.RejectionInfo(fragment=r.location, reason=r.reason, detail=r.detail)
            for r in rejections
        ],
        diagnostics=diagnostics,
    )


def _load_data(req: models.RunRequest, elem_kind: str):
    if req.data is not None:
        text = "\n".join(req.data)
    elif req.data_path is not None:
        with open(req.data_path) as fh:
            text = fh.read()
    else:
        raise ValueError("run request needs data or data_path")
    return corpus.parse_data_lines(text, elem_kind)


def _parse_binding(raw: str, ty) -> object:
    if ty == STR:
        return raw
    if ty.kind == "bool":
        return raw == "true"
    return int(raw)


def run(req: models.RunRequest) -> models.RunResponse:
    try:
        summary = codegen.parse_summary(req.doc)
        elem_kind = "int" if summary.template.data_elem.kind == "int" else "str"
        data = _load_data(req, elem_kind)
        job = codegen.bind_job(summary)
        inputs = {}
        for name, ty in summary.template.scalar_inputs:
            if name not in req.bindings:
                raise ValueError(f"missing --bind {name}=...")
            inputs[name] = _parse_binding(req.bindings[name], ty)
        cfg = runtime.RuntimeConfig(
            workers=req.workers, partition_size=req.partition_size, combiner=req.combiner
        )
        out = runtime.execute(job, data, cfg, inputs=inputs)
        return models.RunResponse(ok=True, lines=out.lines())
    except (codegen.SummaryDocError, runtime.JobError, ValueError, OSError) as e:
        return models.RunResponse(ok=False, error=str(e))


def _random_dataset(rng: random.Random, elem_kind: str, max_len: int):
    n = rng.randint(0, max_len)
    if elem_kind == "int":
        return [rng.randint(-100, 100) for _ in range(n)]
    vocab = [f"w{k:02d}" for k in range(20)]
    return [rng.choice(vocab) for _ in range(n)]


def check(req: models.CheckRequest) -> models.CheckResponse:
    """Differential testing: random datasets through the interpreter and the
    runtime, compared exactly. Stands in for full formal verification."""
    try:
        program = frontend(req.source)
        summary = codegen.parse_summary(req.doc)
    except (MJError, codegen.SummaryDocError) as e:
        return models.CheckResponse(ok=False, verdict="error", error=str(e))
    fragments, _ = extract_fragments(program)
    fragment = next((f for f in fragments if f.id == summary.fragment_id), None)
    if fragment is None:
        return models.CheckResponse(
            ok=False, verdict="error", error=f"fragment {summary.fragment_id!r} not in program"
        )
    if req.trials <= 0:
        return models.CheckResponse(
            ok=True,
            verdict="vacuous",
            trials_run=0,
            diagnostics=["warning: zero trials requested; vacuous pass"],
        )
    job = codegen.bind_job(summary)
    t = summary.template
    elem_kind = t.data_elem.kind
    rng = random.Random(req.seed)
    cfg = runtime.RuntimeConfig(workers=req.workers)
    skipped = 0
    for trial in range(req.trials):
        data = _random_dataset(rng, elem_kind, req.max_len)
        bindings = {}
        for name, ty in t.scalar_inputs:
            if ty == STR:
                bindings[name] = rng.choice(data) if data and rng.random() < 0.7 else f"k{rng.randint(0, 30)}"
            elif ty.kind == "bool":
                bindings[name] = rng.random() < 0.5
            else:
                bindings[name] = rng.randint(-100, 100)
        try:
            env = interpret(program, dict(bindings, **{t.data_var: data}))
        except MJTrap:
            skipped += 1
            continue
        try:
            out = runtime.execute(job, data, cfg, inputs=bindings)
        except runtime.JobError as e:
            return _mismatch(req, trial, data, bindings, f"job error: {e}")
        for spec in t.outputs:
            got = out.values[spec.var_id]
            want = env[spec.name]
            if got != want:
                return _mismatch(
                    req,
                    trial,
                    data,
                    bindings,
                    f"output {spec.name}: runtime {got!r} != sequential {want!r}",
                )
    return models.CheckResponse(
        ok=True, verdict="pass", trials_run=req.trials, skipped_traps=skipped
    )


def _mismatch(req, trial, data, bindings, detail) -> models.CheckResponse:
    return models.CheckResponse(
        ok=False,
        verdict="mismatch",
        trials_run=trial + 1,
        mismatch=models.MismatchInfo(
            trial=trial,
            data=[str(v) for v in data],
            bindings={k: str(v) for k, v in bindings.items()},
            detail=detail,
        ),
    )


def bench(req: models.BenchRequest) -> models.BenchResponse:
    rows = []
    for spec_model in req.specs:
        rows.append(_bench_row(spec_model, req))
    return models.BenchResponse(rows=rows)


def _bench_row(spec_model: models.BenchRowSpec, req: models.BenchRequest) -> models.BenchRow:
    try:
        spec = corpus.BenchSpec(spec_model.name, spec_model.size, spec_model.seed)
    except ValueError as e:
        return models.BenchRow(name=spec_model.name, size=spec_model.size, error=str(e))
    source = corpus.source(spec.name)
    t0 = time.perf_counter()
    lift_resp = lift(models.LiftRequest(source=source, settings=req.settings))
    lift_ms = int((time.perf_counter() - t0) * 1000)
    if not lift_resp.ok or not lift_resp.summaries:
        return models.BenchRow(
            name=spec.name, size=spec.size, error=f"lift failed: {lift_resp.error or lift_resp.diagnostics}"
        )
    frag = lift_resp.summaries[0]
    summary = codegen.parse_summary(frag.doc)
    job = codegen.bind_job(summary)
    program = frontend(source)
    data, bindings = corpus.generate(spec)
    t = summary.template

    seq_times = []
    env = None
    for _ in range(max(1, req.repeats)):
        t0 = time.perf_counter()
        env = interpret(program, dict(bindings, **{t.data_var: data}))
        seq_times.append((time.perf_counter() - t0) * 1000)

    job_ms = {}
    outs = {}
    for w in req.workers:
        times = []
        for _ in range(max(1, req.repeats)):
            t0 = time.perf_counter()
            out = runtime.execute(
                job, data, runtime.RuntimeConfig(workers=w, partition_size=262144), inputs=bindings
            )
            times.append((time.perf_counter() - t0) * 1000)
            outs[w] = out
        job_ms[str(w)] = round(statistics.median(times), 3)

    verdict = "pass"
    for w, out in outs.items():
        for spec_out in t.outputs:
            if out.values[spec_out.var_id] != env[spec_out.name]:
                verdict = "mismatch"
    return models.BenchRow(
        name=spec.name,
        size=spec.size,
        lift_ms=lift_ms,
        iterations=frag.iterations,
        candidates_examined=frag.candidates_examined,
        seq_ms=round(statistics.median(seq_times), 3),
        job_ms=job_ms,
        equivalence=verdict,
    )


def health() -> models.HealthResponse:
    from .. import __version__

    return models.HealthResponse(status="ok", version=__version__)
