"""The five-benchmark corpus and its deterministic dataset generators.

Datasets follow the runtime's line format: one element per line (decimal int
or token). Multi-field benchmarks are line-per-component: histogram data is
intensity triples (stride 3, values in [0, 256)), regression data is (x, y)
pairs (stride 2).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from importlib import resources
from typing import Optional

BENCHMARK_NAMES = ("summation", "wordcount", "stringmatch", "histogram3d", "linregress")

_WORDS = tuple(f"w{i:02d}" for i in range(40))


def source(name: str) -> str:
    """MJ source text of a corpus benchmark."""
    if name not in BENCHMARK_NAMES:
        raise KeyError(f"unknown benchmark {name!r}")
    return resources.files("liftmr.corpus").joinpath(f"{name}.mj").read_text()


@dataclass(frozen=True)
class BenchSpec:
    name: str
    size: int
    seed: int = 0

    def __post_init__(self):
        if self.name not in BENCHMARK_NAMES:
            raise ValueError(f"unknown benchmark {self.name!r}")
        if self.size < 0:
            raise ValueError("size must be non-negative")


def generate(spec: BenchSpec):
    """(data, inputs) for the spec; deterministic under the seed."""
    rng = random.Random(f"{spec.name}:{spec.size}:{spec.seed}")
    name, n = spec.name, spec.size
    if name == "summation":
        return [rng.randint(-100, 100) for _ in range(n)], {}
    if name == "wordcount":
        return [rng.choice(_WORDS) for _ in range(n)], {}
    if name == "stringmatch":
        data = [rng.choice(_WORDS) for _ in range(n)]
        k1 = rng.choice(_WORDS)
        k2 = f"missing{rng.randint(0, 9)}"
        if rng.random() < 0.5:
            k2 = rng.choice(_WORDS)
        return data, {"k1": k1, "k2": k2}
    if name == "histogram3d":
        n -= n % 3
        return [rng.randint(0, 255) for _ in range(n)], {}
    if name == "linregress":
        n -= n % 2
        return [rng.randint(-50, 50) for _ in range(n)], {}
    raise KeyError(name)


def data_lines(data, inputs: Optional[dict] = None) -> str:
    """Serialize a dataset in the one-element-per-line file format."""
    body = "".join(f"{_line(v)}\n" for v in data)
    return body


def _line(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def parse_data_lines(text: str, elem: str):
    """Read a dataset file body; elem is 'int' or 'str'."""
    values = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if elem == "int":
            try:
                values.append(int(line))
            except ValueError:
                raise ValueError(f"line {lineno}: not an integer: {line!r}")
        else:
            values.append(line)
    return values
