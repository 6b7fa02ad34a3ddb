"""Shared fixtures: parsed corpus programs and their lifted summaries.

Lifting all five benchmarks takes ~20s on one core, so the results are
session-scoped and shared by the module tests and the acceptance suite.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import pytest

from liftmr import codegen, corpus, runtime
from liftmr.analyzer import assign_var_ids, classify_vars, extract_fragments
from liftmr.lang import frontend, interpret
from liftmr.synth import Summary, SynthConfig, synthesize


@dataclass
class Lifted:
    name: str
    program: object
    fragment: object
    roles: object
    summary: Summary
    job: object

    @property
    def template(self):
        return self.summary.template

    def run_sequential(self, data, inputs=None) -> dict:
        env = interpret(self.program, dict(inputs or {}, **{self.fragment.data_var: data}))
        return {spec.name: env[spec.name] for spec in self.template.outputs}

    def run_job(self, data, inputs=None, **cfg) -> dict:
        out = runtime.execute(
            self.job, data, runtime.RuntimeConfig(**cfg), inputs=inputs or {}
        )
        return {spec.name: out.values[spec.var_id] for spec in self.template.outputs}


def lift_benchmark(name: str, config: SynthConfig = SynthConfig()) -> Lifted:
    program = frontend(corpus.source(name))
    fragments, rejections = extract_fragments(program)
    assert fragments, f"{name}: no fragment admitted ({rejections})"
    fragment = fragments[0]
    roles = assign_var_ids(classify_vars(fragment))
    summary = synthesize(fragment, roles, config)
    assert isinstance(summary, Summary), f"{name}: synthesis gave up: {summary}"
    return Lifted(name, program, fragment, roles, summary, codegen.bind_job(summary))


@pytest.fixture(scope="session")
def lifted_all() -> dict:
    return {name: lift_benchmark(name) for name in corpus.BENCHMARK_NAMES}


@pytest.fixture(scope="session")
def lifted_summation(lifted_all) -> Lifted:
    return lifted_all["summation"]


@pytest.fixture(scope="session")
def lifted_histogram(lifted_all) -> Lifted:
    return lifted_all["histogram3d"]


def random_inputs(lifted: Lifted, rng: random.Random, data) -> dict:
    out = {}
    for name, ty in lifted.template.scalar_inputs:
        if ty.kind == "str":
            out[name] = rng.choice(data) if data and rng.random() < 0.7 else f"k{rng.randint(0, 30)}"
        elif ty.kind == "bool":
            out[name] = rng.random() < 0.5
        else:
            out[name] = rng.randint(-100, 100)
    return out
