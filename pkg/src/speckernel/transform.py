"""Fence insertion: the per-instruction transformation, a coalesced variant, and their lifting to systems."""
from __future__ import annotations

from .classic import USER, Done, Machine, eval_cmd, outcome_kind
from .gen import rng_for, syscall_program, user_program
from .lang import FENCE, Call, Fence, Ident, If, Load, Regs, Store, While, walk
from .layout import Layout, default_layout
from .syntax import show_cmd
from .system import ProcDecl, System, SyscallDecl, require_valid


def fence_cmd(c: tuple) -> tuple:
    """Put a fence before every load, store and call, recursively."""
    out = []
    for ins in c:
        t = type(ins)
        if t is Load or t is Store or t is Call:
            out += [FENCE, ins]
        elif t is If:
            out.append(If(ins.label, ins.cond, fence_cmd(ins.then), fence_cmd(ins.orelse)))
        elif t is While:
            out.append(While(ins.label, ins.cond, fence_cmd(ins.body)))
        else:
            out.append(ins)
    return tuple(out)


def fence_coalesced(c: tuple) -> tuple:
    """One fence per maximal run of loads/stores; direct calls are left unfenced."""
    out = []
    in_run = False
    for ins in c:
        t = type(ins)
        if t is Load or t is Store:
            if not in_run:
                out.append(FENCE)
            in_run = True
            out.append(ins)
            continue
        in_run = False
        if t is Call:
            if type(ins.target) is not Ident:
                out.append(FENCE)
            out.append(ins)
        elif t is If:
            out.append(If(ins.label, ins.cond, fence_coalesced(ins.then), fence_coalesced(ins.orelse)))
        elif t is While:
            out.append(While(ins.label, ins.cond, fence_coalesced(ins.body)))
        else:
            out.append(ins)
    return tuple(out)


def collapse_fences(c: tuple) -> tuple:
    """Drop a fence that directly follows another fence."""
    out = []
    for ins in c:
        t = type(ins)
        if t is Fence and out and type(out[-1]) is Fence:
            continue
        if t is If:
            ins = If(ins.label, ins.cond, collapse_fences(ins.then), collapse_fences(ins.orelse))
        elif t is While:
            ins = While(ins.label, ins.cond, collapse_fences(ins.body))
        out.append(ins)
    return tuple(out)


def erase_fences(c: tuple) -> tuple:
    out = []
    for ins in c:
        t = type(ins)
        if t is Fence:
            continue
        if t is If:
            ins = If(ins.label, ins.cond, erase_fences(ins.then), erase_fences(ins.orelse))
        elif t is While:
            ins = While(ins.label, ins.cond, erase_fences(ins.body))
        out.append(ins)
    return tuple(out)


def count_fences(c: tuple) -> int:
    return sum(1 for ins in walk(c) if type(ins) is Fence)


def fence_system(sys: System, coalesced: bool = False, skip=(), normalize: bool = False) -> System:
    """Transform every syscall body and kernel procedure; user code is untouched.

    Syscalls named in ``skip`` are left as they are (their safety is then the
    caller's responsibility).
    """
    f = fence_coalesced if coalesced else fence_cmd

    def tr(c):
        c = f(c)
        return collapse_fences(c) if normalize else c

    procs = tuple(ProcDecl(p.name, p.kernel, tr(p.body) if p.kernel else p.body) for p in sys.procs)
    syscalls = tuple(SyscallDecl(s.name, s.params, s.caps, s.body if s.name in skip else tr(s.body))
                     for s in sys.syscalls)
    return System(sys.arrays, procs, syscalls, sys.kappa_u, sys.kappa_k)


def fence_counts(before: System, after: System) -> dict:
    """Fences added per syscall and kernel procedure."""
    out = {}
    for (owner, c0), (_, c1) in zip(before.commands(), after.commands()):
        out[owner] = count_fences(c1) - count_fences(c0)
    return out


def same_user_view(o1, o2, user_ids) -> bool:
    """Done results must agree on the value and the user part of the store; others exactly."""
    if type(o1) is Done and type(o2) is Done:
        return o1.value == o2.value and o1.store.agrees_on(o2.store, user_ids)
    return type(o1) is type(o2)


def check_sem_preservation(sys: System, trials: int = 1000, fuel: int = 500, seed: int = 0,
                           transformed: System | None = None, layout=None):
    """Differential runs of random unprivileged programs on ``sys`` and its transform.

    Even trials use general user programs, odd trials syscall-centred ones.
    """
    from .analysis import HOLDS, VIOLATED, Verdict, outcome_json

    require_valid(sys)
    other = transformed if transformed is not None else fence_system(sys)
    lay = layout if layout is not None else default_layout(sys)
    m1, m2 = Machine(sys, lay), Machine(other, lay)
    tally: dict = {}
    for i in range(trials):
        rng = rng_for(seed, i)
        prog = user_program(rng, sys) if i % 2 == 0 else syscall_program(rng, sys)
        o1 = eval_cmd(sys, lay, prog, Regs(), USER, fuel=fuel, machine=m1)
        o2 = eval_cmd(other, lay, prog, Regs(), USER, fuel=fuel, machine=m2)
        kind = outcome_kind(o1)
        tally[kind] = tally.get(kind, 0) + 1
        if not same_user_view(o1, o2, sys.user_ids):
            return Verdict(VIOLATED, "random unprivileged programs",
                           {"trials_run": i + 1, "outcomes": tally},
                           {"kind": "semantics", "trial": i, "seed": seed, "fuel": fuel,
                            "program": show_cmd(prog), "layout": Layout(lay).to_json(),
                            "outcomes": [outcome_json(o1), outcome_json(o2)]})
    return Verdict(HOLDS, "random unprivileged programs",
                   {"trials_run": trials, "outcomes": dict(sorted(tally.items())),
                    "seed": seed, "fuel": fuel})
