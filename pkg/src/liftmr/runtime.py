"""In-process parallel MapReduce engine for verified summaries.

Pipeline: partitioned map -> optional per-partition combine -> shuffle
(grouping by key in (partition, emission order)) -> per-key reduce ->
output reconstruction. Results are exactly independent of worker count:
partition boundaries depend only on partition_size, and every fold a job
carries has passed the commutativity/associativity check, so per-partition
combining cannot change any output.

Workers are separate processes (fork). Small inputs go through a persistent
pool with the partition shipped in the task; large inputs are published as a
module global before the pool forks so children share the pages copy-on-write.
"""

from __future__ import annotations

import multiprocessing
from dataclasses import dataclass
from typing import Optional

from .lang.errors import MJTrap
from .pycompile import compile_fold, compile_mapper
from .synth.candidates import Candidate, Fold

DEFAULT_PARTITION_SIZE = 65536


class JobError(Exception):
    """Trap or shape mismatch while executing a job."""


@dataclass(frozen=True)
class OutputShape:
    var_id: int
    name: str
    kind: str  # 'scalar' | 'array' | 'map'
    value_kind: str  # 'int' | 'bool'
    length: Optional[int] = None  # arrays
    key_kind: Optional[str] = None  # maps: 'int' | 'str'


@dataclass(frozen=True)
class Job:
    fragment_id: str
    candidate: Candidate
    output_shapes: tuple  # of OutputShape
    input_names: tuple  # loop-constant scalars fm references
    combiner_enabled: bool

    def fold_for_kind(self, kind: str) -> Fold:
        for f in self.candidate.folds:
            if f.value_type == kind:
                return f
        raise JobError(f"job has no {kind} fold")


@dataclass(frozen=True)
class RuntimeConfig:
    workers: int = 1
    partition_size: int = DEFAULT_PARTITION_SIZE
    combiner: bool = True  # effective only when the job allows it


@dataclass
class OutputEnv:
    values: dict  # var_id -> scalar | list | dict
    shapes: tuple = ()

    def __getitem__(self, var_id: int):
        return self.values[var_id]

    def lines(self) -> list:
        """Canonical `id <TAB> index-or-key <TAB> value` dump, sorted."""
        by_id = {s.var_id: s for s in self.shapes}
        out = []
        for var_id in sorted(self.values):
            v = self.values[var_id]
            shape = by_id.get(var_id)
            if shape and shape.kind == "array":
                for j, x in enumerate(v):
                    out.append(f"{var_id}\t{j}\t{_fmt(x)}")
            elif shape and shape.kind == "map":
                for k in sorted(v):
                    out.append(f"{var_id}\t{k}\t{_fmt(v[k])}")
            else:
                out.append(f"{var_id}\t-\t{_fmt(v)}")
        return out


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


# ---------------------------------------------------------------------------
# Phases


def partition_ranges(n: int, partition_size: int) -> list:
    size = max(1, partition_size)
    return [(lo, min(lo + size, n)) for lo in range(0, n, size)]


def _map_range(job: Job, data, lo: int, hi: int, inputs: dict) -> list:
    mapper = _compiled_mapper(job)
    try:
        return mapper(data, lo, hi, inputs)
    except MJTrap as t:
        raise JobError(f"map trap in [{lo}, {hi}): {t}") from t


def run_map(job: Job, data, cfg: RuntimeConfig, inputs: Optional[dict] = None) -> list:
    """Apply fm at every global index; one KV list per partition, in index
    then emit order."""
    inputs = inputs or {}
    parts = partition_ranges(len(data), cfg.partition_size)
    return [_map_range(job, data, lo, hi, inputs) for lo, hi in parts]


def combine(job: Job, partition_kvs: list, enabled: bool = True) -> list:
    """Fold each key's values locally within one partition's output."""
    if not enabled:
        return partition_kvs
    return _combine_list(job.candidate, partition_kvs)


def _combine_list(candidate: Candidate, kvs: list) -> list:
    groups: dict = {}
    for k, v in kvs:
        groups.setdefault(k, []).append(v)
    out = []
    for k, vals in groups.items():
        fold = candidate.fold_for(vals[0])
        fn = _compiled_fold(fold)
        acc = fold.init
        try:
            for v in vals:
                acc = fn(acc, v)
        except MJTrap as t:
            raise JobError(f"combine trap at key {k!r}: {t}") from t
        out.append((k, acc))
    return out


def shuffle(partitions: list) -> dict:
    """Group the key-value multiset by key. Within a group, values appear in
    (partition index, emission order)."""
    if partitions and not isinstance(partitions[0], list):
        partitions = [partitions]  # a single flat KV list
    grouped: dict = {}
    types: dict = {}
    for kvs in partitions:
        for k, v in kvs:
            t = type(v)
            prev = types.get(k)
            if prev is None:
                types[k] = t
            elif prev is not t:
                raise JobError(f"heterogeneous value types under key {k!r}")
            grouped.setdefault(k, []).append(v)
    return grouped


def run_reduce(job: Job, grouped: dict, cfg: RuntimeConfig) -> dict:
    """Fold each group from the fold's init, in group order."""
    out = {}
    for k, vals in grouped.items():
        fold = job.candidate.fold_for(vals[0])
        fn = _compiled_fold(fold)
        acc = fold.init
        try:
            for v in vals:
                acc = fn(acc, v)
        except MJTrap as t:
            raise JobError(f"reduce trap at key {k!r}: {t}") from t
        out[k] = acc
    return out


def reconstruct_outputs(job: Job, reduced: dict) -> OutputEnv:
    """Scatter (id, index) keys into arrays, collect (id, key) maps, read
    scalars; strict about keys that fit no declared output."""
    by_id = {s.var_id: s for s in job.output_shapes}
    picked: dict = {s.var_id: {} for s in job.output_shapes}
    for key, value in reduced.items():
        if isinstance(key, tuple):
            d, rest = key[0], key[1:]
        else:
            d, rest = key, ()
        shape = None if isinstance(d, bool) else by_id.get(d)
        if shape is None:
            raise JobError(f"reduce key {key!r} does not name an output")
        if isinstance(value, bool):
            ok = shape.value_kind == "bool"
        else:
            ok = shape.value_kind == "int" and isinstance(value, int)
        if not ok:
            raise JobError(f"value {value!r} does not fit output {shape.name}")
        if shape.kind == "scalar":
            if rest != ():
                raise JobError(f"key {key!r}: scalar output takes a bare id")
            picked[d][()] = value
        elif shape.kind == "array":
            if (
                len(rest) != 1
                or isinstance(rest[0], bool)
                or not isinstance(rest[0], int)
                or not 0 <= rest[0] < (shape.length or 0)
            ):
                raise JobError(f"key {key!r} is outside array output {shape.name}")
            picked[d][rest[0]] = value
        else:
            if len(rest) != 1:
                raise JobError(f"key {key!r}: map output takes (id, key)")
            k = rest[0]
            if shape.key_kind == "int" and (isinstance(k, bool) or not isinstance(k, int)):
                raise JobError(f"map key {k!r} is not int")
            if shape.key_kind == "str" and not isinstance(k, str):
                raise JobError(f"map key {k!r} is not a token")
            picked[d][k] = value
    values = {}
    for shape in job.output_shapes:
        init = job.fold_for_kind(shape.value_kind).init
        cells = picked[shape.var_id]
        if shape.kind == "scalar":
            values[shape.var_id] = cells.get((), init)
        elif shape.kind == "array":
            arr = [init] * (shape.length or 0)
            for j, v in cells.items():
                arr[j] = v
            values[shape.var_id] = arr
        else:
            values[shape.var_id] = cells
    return OutputEnv(values=values, shapes=job.output_shapes)


# ---------------------------------------------------------------------------
# Compiled-artifact caches (per process)

_MAPPER_CACHE: dict = {}
_FOLD_CACHE: dict = {}


def _job_key(job: Job) -> int:
    return id(job.candidate)


def _compiled_mapper(job: Job):
    key = _job_key(job)
    fn = _MAPPER_CACHE.get(key)
    if fn is None:
        fn = compile_mapper(job.candidate, job.input_names)
        _MAPPER_CACHE[key] = fn
    return fn


def _compiled_fold(fold: Fold):
    key = id(fold)
    fn = _FOLD_CACHE.get(key)
    if fn is None:
        fn = compile_fold(fold)
        _FOLD_CACHE[key] = fn
    return fn


# ---------------------------------------------------------------------------
# Worker pool plumbing
#
# The whole collection is published as a module global before the pool forks,
# so child processes share it copy-on-write and map tasks carry only index
# ranges. Index expressions may reach anywhere in the collection, exactly as
# in the sequential semantics.

_CTX = multiprocessing.get_context("fork")
_SHARED: dict = {}


def _map_task(args):
    lo, hi, do_combine = args
    job = _SHARED["job"]
    kvs = _map_range(job, _SHARED["data"], lo, hi, _SHARED["inputs"])
    if do_combine:
        kvs = _combine_list(job.candidate, kvs)
    return kvs


def _reduce_task(items):
    job = _SHARED["job"]
    return [(k, v) for k, v in run_reduce(job, dict(items), RuntimeConfig()).items()]


PARALLEL_REDUCE_MIN_VALUES = 500_000


# ---------------------------------------------------------------------------
# execute


def execute(job: Job, data, cfg: RuntimeConfig = RuntimeConfig(), inputs: Optional[dict] = None) -> OutputEnv:
    """Run the full job; the OutputEnv is bitwise independent of workers."""
    inputs = inputs or {}
    missing = [n for n in job.input_names if n not in inputs]
    if missing:
        raise JobError(f"missing job inputs: {missing}")
    do_combine = job.combiner_enabled and cfg.combiner
    parts = partition_ranges(len(data), cfg.partition_size)

    pool = None
    try:
        if cfg.workers > 1 and len(parts) > 1:
            _SHARED.update(job=job, data=data, inputs=inputs)
            pool = _CTX.Pool(cfg.workers)
            per_part = pool.map(_map_task, [(lo, hi, do_combine) for lo, hi in parts])
        else:
            per_part = []
            for lo, hi in parts:
                kvs = _map_range(job, data, lo, hi, inputs)
                if do_combine:
                    kvs = _combine_list(job.candidate, kvs)
                per_part.append(kvs)

        grouped = shuffle(per_part)
        total_values = sum(len(v) for v in grouped.values())
        if (
            pool is not None
            and len(grouped) >= 2 * cfg.workers
            and total_values >= PARALLEL_REDUCE_MIN_VALUES
        ):
            items = list(grouped.items())
            step = (len(items) + cfg.workers - 1) // cfg.workers
            chunks = [items[k : k + step] for k in range(0, len(items), step)]
            reduced = {}
            for part in pool.map(_reduce_task, chunks):
                reduced.update(part)
        else:
            reduced = run_reduce(job, grouped, cfg)
    finally:
        if pool is not None:
            pool.terminate()
            pool.join()
            _SHARED.clear()
    return reconstruct_outputs(job, reduced)


# Combiner/scheduling admissibility for folds lives with the candidate types;
# re-exported here because jobs are what it gates.
from .synth.candidates import check_commutative_associative  # noqa: E402,F401
