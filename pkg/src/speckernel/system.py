"""Stores, systems, capabilities, the refs closure and static well-formedness."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

from .lang import (
    ARG_REGS, NULL, Call, Cmd, StructuralError, Syscall, Value, expr_ids,
    ids_of, instr_exprs, sub_cmds, syscalls_of, walk,
)


@dataclass(frozen=True)
class ArrayDecl:
    name: str
    kernel: bool
    size: int
    init: tuple = ()

    def contents(self) -> tuple:
        """Initial cells: the initializer padded with Null."""
        return tuple(self.init) + (NULL,) * (self.size - len(self.init))


@dataclass(frozen=True)
class ProcDecl:
    name: str
    kernel: bool
    body: Cmd


@dataclass(frozen=True)
class SyscallDecl:
    name: str
    params: tuple
    caps: frozenset
    body: Cmd


@dataclass(frozen=True)
class Store:
    """Array contents and procedure bodies, keyed by identifier."""

    arrays: tuple  # ((name, values), ...) sorted by name
    procs: tuple   # ((name, cmd), ...) sorted by name

    @staticmethod
    def make(arrays: dict, procs: dict) -> "Store":
        return Store(tuple(sorted((k, tuple(v)) for k, v in arrays.items())),
                     tuple(sorted(procs.items())))

    @cached_property
    def array_map(self) -> dict:
        return dict(self.arrays)

    @cached_property
    def proc_map(self) -> dict:
        return dict(self.procs)

    def array(self, name: str) -> tuple:
        return self.array_map[name]

    def agrees_on(self, other: "Store", names: Iterable[str]) -> bool:
        for n in names:
            if n in self.array_map:
                if self.array_map[n] != other.array_map.get(n):
                    return False
            elif self.proc_map.get(n) != other.proc_map.get(n):
                return False
        return True


def store_update(store: Store, name: str, index: int, v: Value) -> Store:
    """``σ[(a, i) ↦ v]``."""
    if isinstance(v, tuple):
        raise StructuralError("only values can be written to arrays")
    cells = store.array_map.get(name)
    if cells is None:
        raise StructuralError(f"{name!r} is not an array")
    if not 0 <= index < len(cells):
        raise StructuralError(f"index {index} out of bounds for {name}[{len(cells)}]")
    arrays = dict(store.array_map)
    arrays[name] = cells[:index] + (v,) + cells[index + 1:]
    return Store.make(arrays, store.proc_map)


@dataclass(frozen=True)
class System:
    arrays: tuple   # ArrayDecl, declaration order
    procs: tuple    # ProcDecl, declaration order
    syscalls: tuple  # SyscallDecl, declaration order
    kappa_u: int
    kappa_k: int

    # -- lookups -------------------------------------------------------

    @cached_property
    def array_decl(self) -> dict:
        return {a.name: a for a in self.arrays}

    @cached_property
    def proc_decl(self) -> dict:
        return {p.name: p for p in self.procs}

    @cached_property
    def syscall_decl(self) -> dict:
        return {s.name: s for s in self.syscalls}

    @cached_property
    def ids(self) -> tuple:
        """All identifiers in declaration order, arrays first."""
        return tuple(a.name for a in self.arrays) + tuple(p.name for p in self.procs)

    @cached_property
    def user_ids(self) -> tuple:
        return tuple(i for i in self.ids if not self.is_kernel(i))

    @cached_property
    def kernel_ids(self) -> tuple:
        return tuple(i for i in self.ids if self.is_kernel(i))

    def is_kernel(self, name: str) -> bool:
        d = self.array_decl.get(name) or self.proc_decl.get(name)
        if d is None:
            raise StructuralError(f"unknown identifier {name!r}")
        return d.kernel

    def size(self, name: str) -> int:
        if name in self.array_decl:
            return self.array_decl[name].size
        if name in self.proc_decl:
            return 1
        raise StructuralError(f"unknown identifier {name!r}")

    def is_array(self, name: str) -> bool:
        return name in self.array_decl

    def body(self, syscall: str) -> Cmd:
        try:
            return self.syscall_decl[syscall].body
        except KeyError:
            raise StructuralError(f"unknown system call {syscall!r}") from None

    def caps(self, syscall: str) -> frozenset:
        return self.syscall_decl[syscall].caps

    @cached_property
    def store(self) -> Store:
        return Store.make({a.name: a.contents() for a in self.arrays},
                          {p.name: p.body for p in self.procs})

    def with_bodies(self, syscalls: dict | None = None, procs: dict | None = None) -> "System":
        """Copy with some syscall and procedure bodies replaced."""
        syscalls = syscalls or {}
        procs = procs or {}
        return System(
            self.arrays,
            tuple(ProcDecl(p.name, p.kernel, procs.get(p.name, p.body)) for p in self.procs),
            tuple(SyscallDecl(s.name, s.params, s.caps, syscalls.get(s.name, s.body))
                  for s in self.syscalls),
            self.kappa_u, self.kappa_k,
        )

    def commands(self):
        """Every (owner description, command) pair of the system."""
        for p in self.procs:
            yield f"proc {p.name}", p.body
        for s in self.syscalls:
            yield f"syscall {s.name}", s.body


# ---------------------------------------------------------------- refs


def refs(sys: System, c: Cmd) -> frozenset:
    """Identifiers and system-call names reachable from ``c``.

    Least set containing the literal identifiers and syscalls of ``c`` and
    closed under the bodies of referenced procedures and system calls.
    """
    out: set[str] = set()
    work: list[Cmd] = [c]
    while work:
        cmd = work.pop()
        for name in ids_of(cmd) | syscalls_of(cmd):
            if name in out:
                continue
            out.add(name)
            if name in sys.proc_decl:
                work.append(sys.proc_decl[name].body)
            elif name in sys.syscall_decl:
                work.append(sys.syscall_decl[name].body)
            elif name not in sys.array_decl:
                raise StructuralError(f"dangling identifier {name!r}")
    return frozenset(out)


def syscall_refs(sys: System, s: str) -> frozenset:
    """``refs(s(s)) \\ Sys``: identifiers reachable from the body of ``s``."""
    return frozenset(n for n in refs(sys, sys.body(s)) if n not in sys.syscall_decl)


# ---------------------------------------------------------- validation


@dataclass
class Report:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, kind: str, detail: str) -> None:
        self.violations.append((kind, detail))

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "; ".join(f"{k} {d}" for k, d in self.violations)


def _label_sites(c: Cmd, path: str):
    for i, ins in enumerate(c):
        here = f"{path}.{i}"
        label = getattr(ins, "label", None)
        if label is not None:
            yield label, here
        subs = sub_cmds(ins)
        names = ("then", "else") if len(subs) == 2 else ("body",)
        for name, sub in zip(names, subs):
            yield from _label_sites(sub, f"{here}.{name}")


def label_check(sys: System) -> Report:
    """Every load/if/while label must be unique across the whole system."""
    seen: dict[str, str] = {}
    rep = Report()
    for owner, c in sys.commands():
        for label, site in _label_sites(c, owner):
            if label in seen:
                rep.add("duplicate-label", f"{label} at {seen[label]} and {site}")
            else:
                seen[label] = site
    return rep


def validate_system(sys: System) -> Report:
    rep = Report()
    names = [a.name for a in sys.arrays] + [p.name for p in sys.procs]
    for n in {n for n in names if names.count(n) > 1}:
        rep.add("duplicate-id", n)
    sc_names = [s.name for s in sys.syscalls]
    for n in {n for n in sc_names if sc_names.count(n) > 1}:
        rep.add("duplicate-syscall", n)
    for n in set(names) & set(sc_names):
        rep.add("name-clash", n)
    for a in sys.arrays:
        if a.size < 1:
            rep.add("bad-size", a.name)
        if len(a.init) > a.size:
            rep.add("bad-initializer", a.name)
    for space, kappa in (("user", sys.kappa_u), ("kernel", sys.kappa_k)):
        kernel = space == "kernel"
        total = sum(sys.size(i) for i in sys.ids if sys.is_kernel(i) == kernel)
        if total > kappa:
            rep.add("space-overflow", f"{space} needs {total} > {kappa}")

    known = set(names) | set(sc_names)
    for owner, c in sys.commands():
        for ins in walk(c):
            if type(ins).__name__ in ("Spec", "Poison", "Observe"):
                rep.add("attacker-instr", owner)
            if type(ins) in (Call, Syscall) and len(ins.args) > len(ARG_REGS):
                rep.add("too-many-args", owner)
            if type(ins) is Syscall and ins.name not in sys.syscall_decl:
                rep.add("dangling", f"{ins.name} in {owner}")
            for e in instr_exprs(ins):
                for i in expr_ids(e):
                    if i not in known:
                        rep.add("dangling", f"{i} in {owner}")
    if not rep.ok:
        return rep

    for p in sys.procs:
        if not p.kernel:
            bad = sorted(i for i in ids_of(p.body) if sys.is_kernel(i))
            for i in bad:
                rep.add("privileged-user-code", f"{p.name} mentions {i}")
    for s in sys.syscalls:
        for i in sorted(s.caps):
            if i not in sys.array_decl and i not in sys.proc_decl:
                rep.add("caps-unknown", f"{i} in caps({s.name})")
            elif not sys.is_kernel(i):
                rep.add("caps-not-kernel", f"{i} in caps({s.name})")
        if tuple(s.params) != ARG_REGS[:len(s.params)]:
            rep.add("bad-params", s.name)
        for i in sorted(syscall_refs(sys, s.name) - s.caps):
            rep.add("caps-missing", f"{i} in caps({s.name})")
    rep.violations.extend(label_check(sys).violations)
    return rep


def require_valid(sys: System) -> None:
    rep = validate_system(sys)
    if not rep.ok:
        raise StructuralError(f"invalid system: {rep}")
