"""Seeded random generators for programs and systems (fuzzing and property tests)."""
from __future__ import annotations

import random

from .lang import (
    FALSE, NULL, TRUE, Assign, Call, Const, Fence, Ident, If, Int, Load, OpApp, Reg, Skip,
    Store, Syscall, While,
)
from .system import ArrayDecl, ProcDecl, SyscallDecl, System, syscall_refs

REGS = ("x1", "x2", "r", "t", "ret")


def rng_for(seed: int, index: int = 0) -> random.Random:
    return random.Random(seed * 1_000_003 + index)


class _Labels:
    def __init__(self, prefix: str):
        self.prefix = prefix
        self.n = 0

    def __call__(self) -> str:
        self.n += 1
        return f"{self.prefix}{self.n}"


def random_expr(rng: random.Random, ids, regs=REGS, depth: int = 2, ints=(0, 1, 2, 3)):
    roll = rng.random()
    if depth <= 0 or roll < 0.45:
        leaf = rng.random()
        if leaf < 0.35:
            return Reg(rng.choice(regs))
        if leaf < 0.6 and ids:
            return Ident(rng.choice(ids))
        if leaf < 0.9:
            return Const(Int(rng.choice(ints)))
        return Const(rng.choice((TRUE, FALSE, NULL)))
    if roll < 0.55:
        return OpApp("not", (random_expr(rng, ids, regs, depth - 1, ints),))
    op = rng.choice(("add", "add", "add", "sub", "mul", "eq", "neq", "lt", "le", "and", "or"))
    return OpApp(op, (random_expr(rng, ids, regs, depth - 1, ints),
                      random_expr(rng, ids, regs, depth - 1, ints)))


def _addr_expr(rng, arrays, procs, sizes, regs):
    """Mostly in-bounds address arithmetic, sometimes anything."""
    pool = arrays if arrays else procs
    if pool and rng.random() < 0.8:
        base = rng.choice(pool)
        size = sizes.get(base, 1)
        off = rng.randrange(size) if rng.random() < 0.85 else size
        e = Ident(base)
        if off or rng.random() < 0.3:
            e = OpApp("add", (e, Const(Int(off)) if rng.random() < 0.9 else Reg(rng.choice(regs))))
        return e
    return random_expr(rng, tuple(arrays) + tuple(procs), regs)


def random_cmd(rng: random.Random, *, arrays=(), procs=(), syscalls=(), sizes=None,
               labels=None, size: int = 6, depth: int = 2, regs=REGS, fences=True,
               loop_regs=("i0", "i1", "i2")) -> tuple:
    """Random command over the given identifiers.

    Loops always count a dedicated register up to a small bound, so every
    generated program terminates unless it recurses through procedures.
    """
    sizes = sizes or {}
    labels = labels or _Labels("lg")
    ids = tuple(arrays) + tuple(procs)
    out = []
    for _ in range(rng.randint(1, size)):
        k = rng.random()
        if k < 0.18:
            out.append(Assign(rng.choice(regs), random_expr(rng, ids, regs)))
        elif k < 0.36:
            out.append(Load(labels(), rng.choice(regs), _addr_expr(rng, arrays, procs, sizes, regs)))
        elif k < 0.52:
            out.append(Store(_addr_expr(rng, arrays, procs, sizes, regs), random_expr(rng, ids, regs)))
        elif k < 0.60 and procs:
            target = Ident(rng.choice(procs)) if rng.random() < 0.85 else Reg(rng.choice(regs))
            out.append(Call(target, tuple(random_expr(rng, ids, regs, 1)
                                          for _ in range(rng.randint(0, 2)))))
        elif k < 0.68 and syscalls:
            name, arity = rng.choice(syscalls)
            out.append(Syscall(name, tuple(random_expr(rng, ids, regs, 1) for _ in range(arity))))
        elif k < 0.80 and depth > 0:
            out.append(If(labels(), random_expr(rng, ids, regs),
                          random_cmd(rng, arrays=arrays, procs=procs, syscalls=syscalls,
                                     sizes=sizes, labels=labels, size=size // 2 + 1,
                                     depth=depth - 1, regs=regs, fences=fences,
                                     loop_regs=loop_regs),
                          random_cmd(rng, arrays=arrays, procs=procs, syscalls=syscalls,
                                     sizes=sizes, labels=labels, size=size // 2 + 1,
                                     depth=depth - 1, regs=regs, fences=fences,
                                     loop_regs=loop_regs)))
        elif k < 0.88 and depth > 0 and loop_regs:
            i = loop_regs[0]
            body = random_cmd(rng, arrays=arrays, procs=procs, syscalls=syscalls, sizes=sizes,
                              labels=labels, size=size // 2 + 1, depth=depth - 1, regs=regs,
                              fences=fences, loop_regs=loop_regs[1:])
            bound = rng.randint(1, 3)
            out.append(Assign(i, Const(Int(0))))
            out.append(While(labels(), OpApp("lt", (Reg(i), Const(Int(bound)))),
                             body + (Assign(i, OpApp("add", (Reg(i), Const(Int(1))))),)))
        elif k < 0.94 and fences:
            out.append(Fence())
        else:
            out.append(Skip())
    return tuple(out)


# ---------------------------------------------------------------- systems


def random_system(rng: random.Random, *, max_arrays: int = 3, max_procs: int = 2,
                  max_syscalls: int = 3) -> System:
    """A valid random system: caps are set to the refs closure plus extras."""
    labels = _Labels("lq")
    arrays = []
    for k in range(rng.randint(1, max_arrays)):
        kernel = rng.random() < 0.7
        size = rng.randint(1, 3)
        init = tuple(Int(rng.randint(-2, 5)) for _ in range(rng.randint(0, size)))
        arrays.append(ArrayDecl(f"{'k' if kernel else 'u'}arr{k}", kernel, size, init))
    proc_names = [(f"kp{k}", True) if rng.random() < 0.6 else (f"up{k}", False)
                  for k in range(rng.randint(0, max_procs))]
    sizes = {a.name: a.size for a in arrays}
    k_arrays = [a.name for a in arrays if a.kernel]
    u_arrays = [a.name for a in arrays if not a.kernel]
    k_procs = [n for n, kern in proc_names if kern]
    u_procs = [n for n, kern in proc_names if not kern]
    procs = []
    for name, kernel in proc_names:
        if kernel:
            body = random_cmd(rng, arrays=k_arrays, procs=(), sizes=sizes, labels=labels, size=3,
                              depth=1)
        else:
            body = random_cmd(rng, arrays=u_arrays, procs=(), sizes=sizes, labels=labels, size=3,
                              depth=1)
        procs.append(ProcDecl(name, kernel, body))
    syscalls = []
    for k in range(rng.randint(1, max_syscalls)):
        arity = rng.randint(0, 3)
        body = random_cmd(rng, arrays=k_arrays, procs=k_procs, sizes=sizes, labels=labels,
                          size=4, depth=2)
        syscalls.append(SyscallDecl(f"sc{k}", tuple(f"x{i + 1}" for i in range(arity)),
                                    frozenset(), body))
    ku = sum(a.size for a in arrays if not a.kernel) + len(u_procs) + rng.randint(0, 2)
    kk = sum(a.size for a in arrays if a.kernel) + len(k_procs) + rng.randint(1, 4)
    sys = System(tuple(arrays), tuple(procs), tuple(syscalls), ku, kk)
    kernel_ids = list(sys.kernel_ids)
    fixed = []
    for s in syscalls:
        caps = set(syscall_refs(sys, s.name))
        if kernel_ids and rng.random() < 0.3:
            caps.add(rng.choice(kernel_ids))
        fixed.append(SyscallDecl(s.name, s.params, frozenset(caps), s.body))
    return System(sys.arrays, sys.procs, tuple(fixed), ku, kk)


# ------------------------------------------------------- program families


def user_program(rng: random.Random, sys: System, size: int = 6) -> tuple:
    """Random unprivileged program for ``sys``: user objects and every syscall."""
    u_arrays = [a.name for a in sys.arrays if not a.kernel]
    u_procs = [p.name for p in sys.procs if not p.kernel]
    sizes = {a.name: a.size for a in sys.arrays}
    syscalls = [(s.name, len(s.params)) for s in sys.syscalls]
    return random_cmd(rng, arrays=u_arrays, procs=u_procs, syscalls=syscalls, sizes=sizes,
                      labels=_Labels("lu"), size=size, depth=2)


def kernel_program(rng: random.Random, sys: System, syscall: str, size: int = 8) -> tuple:
    """Random command meant to run in kernel mode on behalf of ``syscall``.

    It may touch any kernel object, so capability violations are reachable.
    """
    k_arrays = [a.name for a in sys.arrays if a.kernel]
    k_procs = [p.name for p in sys.procs if p.kernel]
    sizes = {a.name: a.size for a in sys.arrays}
    syscalls = [(s.name, len(s.params)) for s in sys.syscalls]
    return random_cmd(rng, arrays=k_arrays, procs=k_procs, syscalls=syscalls, sizes=sizes,
                      labels=_Labels("lk"), size=size, depth=2)


PLAYGROUND = """
system {
  user array u[2];
  kernel array k0[3] = [1, 2, 3];
  kernel array k1[2];
  kernel array k2[1] = [5];
  kernel proc p0() { load r <- k0 + x1 @p0l; ret := r + 1; }
  kernel proc p1() { store k1 -> x1; ret := x1; }
  syscall s0(x1, x2) caps {k0, k1, p0, p1} { call p0(x1); }
  syscall s1(x1) caps {k0, k1, k2, p0, p1} { store k2 -> x1; }
  space user 3 kernel 12;
}
"""


def syscall_program(rng: random.Random, sys: System, calls: int = 6) -> tuple:
    """Unprivileged program centred on system calls whose results stay visible.

    Arguments are mostly 0 and 1, sometimes other small integers, Null or
    user addresses.  Each result is folded into ``acc`` (Null folds as a
    fixed marker so it does not wipe earlier results) or stored into a user
    array cell, and ``ret`` ends up holding the accumulator.
    """
    labels = _Labels("ls")
    u_cells = [(a.name, k) for a in sys.arrays if not a.kernel for k in range(a.size)]
    pool = [Const(Int(n)) for n in (0, 0, 0, 1, 1, 1, 2, 3, 5, -1)] + [Const(NULL)]
    pool += [Ident(a.name) for a in sys.arrays if not a.kernel]
    out = [Assign("acc", Const(Int(0)))]
    for _ in range(rng.randint(2, calls)):
        s = rng.choice(sys.syscalls)
        out.append(Syscall(s.name, tuple(rng.choice(pool) for _ in s.params)))
        if u_cells and rng.random() < 0.3:
            name, k = rng.choice(u_cells)
            addr = OpApp("add", (Ident(name), Const(Int(k)))) if k else Ident(name)
            out.append(Store(addr, Reg("ret")))
        else:
            scaled = OpApp("mul", (Reg("acc"), Const(Int(31))))
            out.append(If(labels(), OpApp("eq", (Reg("ret"), Const(NULL))),
                          (Assign("acc", OpApp("add", (scaled, Const(Int(17))))),),
                          (Assign("acc", OpApp("add", (scaled, Reg("ret")))),)))
    out.append(Assign("ret", Reg("acc")))
    return tuple(out)
