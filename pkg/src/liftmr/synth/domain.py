"""The finite input domain used for bounded checking.

All collections up to max_len over a small value range, crossed with every
valuation of the fragment's loop-constant scalar inputs and any fresh
precondition symbols. When the product grows past max_contexts, a seeded
deterministic sample is drawn instead (the empty collection is always kept).
"""

from __future__ import annotations

import random
import string
from dataclasses import dataclass, field
from itertools import product

from ..lang.ast import BOOL, INT, STR, Type
from ..specgen import FreshSymbol, SummaryTemplate


@dataclass(frozen=True)
class BoundedDomain:
    max_len: int = 4
    int_range: tuple = (-2, 2)
    alphabet: int = 3
    max_contexts: int = 200_000
    seed: int = 0

    def tokens(self) -> tuple:
        letters = string.ascii_lowercase
        return tuple(
            letters[i] if i < len(letters) else f"t{i}" for i in range(self.alphabet)
        )

    def scalar_values(self, t: Type) -> tuple:
        if t == INT:
            lo, hi = self.int_range
            return tuple(range(lo, hi + 1))
        if t == BOOL:
            return (False, True)
        if t == STR:
            return self.tokens()
        raise TypeError(f"not a scalar type: {t}")

    def collections(self, elem: Type) -> list:
        """Every tuple of length 0..max_len over the element values, ordered
        by length then lexicographically."""
        values = self.scalar_values(elem)
        out = []
        for n in range(self.max_len + 1):
            out.extend(product(values, repeat=n))
        return out

    def describe(self) -> str:
        lo, hi = self.int_range
        return f"maxlen={self.max_len} intrange={lo}:{hi} alphabet={self.alphabet}"


@dataclass(frozen=True)
class Context:
    """One point of the bounded domain: a data collection plus values for the
    scalar inputs and fresh precondition symbols."""

    data: tuple
    inputs: tuple = ()  # of (name, value)
    syms: tuple = ()  # of (symbol-name, value)

    @property
    def inputs_dict(self) -> dict:
        return dict(self.inputs)

    @property
    def syms_dict(self) -> dict:
        return dict(self.syms)


def contexts(template: SummaryTemplate, domain: BoundedDomain) -> list:
    """Materialize the checking contexts for a fragment, deterministically."""
    datas = domain.collections(template.data_elem)
    input_axes = [
        (name, domain.scalar_values(t)) for name, t in template.scalar_inputs
    ]
    sym_axes = []
    for _, init in template.precondition.bindings:
        if isinstance(init, FreshSymbol) and init.sym_type.is_scalar:
            sym_axes.append((init.name, domain.scalar_values(init.sym_type)))

    total = len(datas)
    for _, vals in input_axes + sym_axes:
        total *= len(vals)

    def build(data, combo):
        k = len(input_axes)
        return Context(
            data=data,
            inputs=tuple((name, v) for (name, _), v in zip(input_axes, combo[:k])),
            syms=tuple((name, v) for (name, _), v in zip(sym_axes, combo[k:])),
        )

    axes = [vals for _, vals in input_axes + sym_axes]
    if total <= domain.max_contexts:
        return [build(d, combo) for d in datas for combo in product(*axes)]

    # seeded sample; keep the empty collection with a default valuation
    rng = random.Random(domain.seed)
    per_data = 1
    for vals in axes:
        per_data *= len(vals)
    picked = sorted(rng.sample(range(total), domain.max_contexts - 1))
    out = [build((), tuple(vals[0] for vals in axes))]
    for idx in picked:
        d_idx, r = divmod(idx, per_data)
        combo = []
        for vals in axes:
            combo.append(vals[r % len(vals)])
            r //= len(vals)
        out.append(build(datas[d_idx], tuple(combo)))
    return out


def search_contexts(
    template: SummaryTemplate, base: BoundedDomain, effective: BoundedDomain, samples: int = 240
) -> list:
    """Contexts the synthesis search runs against: the base domain
    exhaustively, plus a seeded sample of the longer collections the
    effective domain adds (full coverage of those lengths is left to the
    final bounded check, whose counterexamples feed back into the search)."""
    out = contexts(template, base)
    if effective.max_len <= base.max_len:
        return out
    rng = random.Random(base.seed ^ 0x5EED)
    values = effective.scalar_values(template.data_elem)
    input_axes = [(name, effective.scalar_values(t)) for name, t in template.scalar_inputs]
    sym_axes = []
    for _, init in template.precondition.bindings:
        if isinstance(init, FreshSymbol) and init.sym_type.is_scalar:
            sym_axes.append((init.name, effective.scalar_values(init.sym_type)))
    lengths = list(range(base.max_len + 1, effective.max_len + 1))
    for k in range(samples):
        n = effective.max_len if k % 4 else lengths[k % len(lengths)]
        data = tuple(rng.choice(values) for _ in range(n))
        out.append(
            Context(
                data=data,
                inputs=tuple((name, rng.choice(vals)) for name, vals in input_axes),
                syms=tuple((name, rng.choice(vals)) for name, vals in sym_axes),
            )
        )
    return out
