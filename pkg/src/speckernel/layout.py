"""Layouts, placement of stores into memory, randomization and the δ bound."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial
from typing import Iterator, Mapping

import numpy as np

from .lang import StructuralError
from .system import Report, Store, System, syscall_refs


class Layout(Mapping):
    """Immutable map from identifiers to base addresses."""

    __slots__ = ("_d", "_h")

    def __init__(self, bases: Mapping[str, int]):
        self._d = dict(sorted(bases.items()))
        self._h = None

    def __getitem__(self, k):
        return self._d[k]

    def __iter__(self):
        return iter(self._d)

    def __len__(self):
        return len(self._d)

    def __hash__(self):
        if self._h is None:
            self._h = hash(tuple(self._d.items()))
        return self._h

    def __eq__(self, other):
        if isinstance(other, Layout):
            return self._d == other._d
        return NotImplemented

    def __repr__(self):
        return f"Layout({self._d})"

    def to_json(self) -> dict:
        return dict(self._d)


def footprint(lay: Mapping[str, int], sys: System, ident: str) -> range:
    base = lay[ident]
    return range(base, base + sys.size(ident))


def footprint_set(lay: Mapping[str, int], sys: System, idents) -> frozenset:
    out: set[int] = set()
    for i in idents:
        out.update(footprint(lay, sys, i))
    return frozenset(out)


def place(lay: Mapping[str, int], sys: System, store: Store) -> tuple:
    """``λ ∘ σ``: the memory holding the store's objects at their bases."""
    mem: list = [None] * (sys.kappa_u + sys.kappa_k)
    for name, cells in store.arrays:
        base = lay[name]
        for k, v in enumerate(cells):
            if mem[base + k] is not None:
                raise StructuralError(f"layout overlaps at address {base + k}")
            mem[base + k] = v
    for name, body in store.procs:
        a = lay[name]
        if mem[a] is not None:
            raise StructuralError(f"layout overlaps at address {a}")
        mem[a] = body
    return tuple(mem)


def read_back(lay: Mapping[str, int], sys: System, mem: tuple, like: Store) -> Store:
    """Reconstruct the store whose placement is ``mem``; procedures come from ``like``."""
    arrays = {}
    for name, cells in like.arrays:
        base = lay[name]
        arrays[name] = tuple(mem[base:base + len(cells)])
    return Store.make(arrays, like.proc_map)


def validate_layout(lay: Mapping[str, int], sys: System) -> Report:
    rep = Report()
    for i in sys.ids:
        if i not in lay:
            rep.add("unplaced", i)
    for i in lay:
        if i not in sys.array_decl and i not in sys.proc_decl:
            rep.add("unknown", i)
    if not rep.ok:
        return rep
    owner: dict[int, str] = {}
    for i in sys.ids:
        lo, hi = (sys.kappa_u, sys.kappa_u + sys.kappa_k) if sys.is_kernel(i) else (0, sys.kappa_u)
        fp = footprint(lay, sys, i)
        if fp.start < lo or fp.stop > hi:
            rep.add("separation", f"{i} at {fp.start}..{fp.stop - 1}")
        for a in fp:
            if a in owner:
                rep.add("overlap", f"{owner[a]} and {i} at {a}")
            else:
                owner[a] = i
    return rep


def user_layout(sys: System) -> dict:
    """The fixed user part: user objects packed from address 0 in declaration order."""
    out, nxt = {}, 0
    for i in sys.user_ids:
        out[i] = nxt
        nxt += sys.size(i)
    return out


def default_layout(sys: System) -> Layout:
    """Kernel objects packed from κ_u in declaration order."""
    out, nxt = user_layout(sys), sys.kappa_u
    for i in sys.kernel_ids:
        out[i] = nxt
        nxt += sys.size(i)
    return Layout(out)


def count_layouts(sys: System) -> int:
    """Number of valid layouts with the fixed user part.

    Placing n kernel objects of total size S in κ_k cells: choose the order
    of objects (n!) and the gap distribution (C(κ_k − S + n, n)).
    """
    sizes = [sys.size(i) for i in sys.kernel_ids]
    free = sys.kappa_k - sum(sizes)
    if free < 0:
        return 0
    return factorial(len(sizes)) * comb(free + len(sizes), len(sizes))


def enumerate_layouts(sys: System, bound: int = 100_000) -> Iterator[Layout]:
    """Every valid layout exactly once (refuses when there are more than ``bound``)."""
    n = count_layouts(sys)
    if sum(sys.size(i) for i in sys.kernel_ids) > sys.kappa_k:
        raise StructuralError("kernel objects do not fit in the kernel address space")
    if n > bound:
        raise StructuralError(f"{n} layouts exceed the enumeration bound {bound}")
    user = user_layout(sys)
    kids = list(sys.kernel_ids)
    sizes = {i: sys.size(i) for i in kids}
    lo, hi = sys.kappa_u, sys.kappa_u + sys.kappa_k

    def rec(k: int, used: frozenset, acc: dict):
        if k == len(kids):
            yield Layout({**user, **acc})
            return
        name = kids[k]
        for base in range(lo, hi - sizes[name] + 1):
            cells = frozenset(range(base, base + sizes[name]))
            if cells & used:
                continue
            acc[name] = base
            yield from rec(k + 1, used | cells, acc)
            del acc[name]

    yield from rec(0, frozenset(), {})


# ----------------------------------------------------------- slot scheme


@dataclass(frozen=True)
class SlotScheme:
    kappa_u: int
    kappa_k: int
    slot_width: int

    @staticmethod
    def for_system(sys: System) -> "SlotScheme":
        width = max((sys.size(i) for i in sys.kernel_ids), default=1)
        return SlotScheme(sys.kappa_u, sys.kappa_k, width)

    @property
    def slots(self) -> int:
        return self.kappa_k // self.slot_width

    def check(self, sys: System) -> None:
        if self.kappa_k % self.slot_width:
            raise StructuralError("slot width must divide κ_k")
        if any(sys.size(i) > self.slot_width for i in sys.kernel_ids):
            raise StructuralError("an object is wider than a slot")
        if len(sys.kernel_ids) > self.slots:
            raise StructuralError("more kernel objects than slots")
        if sum(sys.size(i) for i in sys.kernel_ids) >= self.kappa_k:
            raise StructuralError("kernel objects must leave part of the kernel space free")

    def slot_base(self, slot: int) -> int:
        return self.kappa_u + slot * self.slot_width


def sample_slot_layout(scheme: SlotScheme, sys: System, rng: np.random.Generator) -> Layout:
    """Uniformly random injective assignment of kernel objects to slots."""
    kids = sys.kernel_ids
    if len(kids) > scheme.slots:
        raise StructuralError("more kernel objects than slots")
    chosen = rng.permutation(scheme.slots)[:len(kids)]
    out = user_layout(sys)
    for name, slot in zip(kids, chosen):
        out[name] = scheme.slot_base(int(slot))
    return Layout(out)


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for work item ``index`` of a run seeded with ``seed``."""
    return np.random.default_rng([seed, index])


def delta_bound_slots(sys: System, scheme: SlotScheme) -> Fraction:
    """Lower bound on the probability that a probe hits a free slot.

    ``min_s (N − |Id_k|) / (N − |refs(s) \\ Sys|)`` for N slots.
    """
    n = scheme.slots
    free = n - len(sys.kernel_ids)
    best = None
    for s in sys.syscalls:
        denom = n - len(syscall_refs(sys, s.name))
        if denom <= 0:
            raise StructuralError(f"syscall {s.name} references every slot")
        r = Fraction(free, denom)
        best = r if best is None else min(best, r)
    if best is None:
        return Fraction(1)
    return max(best, Fraction(0))


def all_slot_layouts(scheme: SlotScheme, sys: System) -> Iterator[Layout]:
    user = user_layout(sys)
    kids = sys.kernel_ids
    for slots in itertools.permutations(range(scheme.slots), len(kids)):
        yield Layout({**user, **{k: scheme.slot_base(s) for k, s in zip(kids, slots)}})


def free_cells(lay: Mapping[str, int], sys: System) -> list:
    used = footprint_set(lay, sys, sys.kernel_ids)
    return [a for a in range(sys.kappa_u, sys.kappa_u + sys.kappa_k) if a not in used]

