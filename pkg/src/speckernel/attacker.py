"""Attacker programs: poisoning, observation reads and speculative victim blocks."""
from __future__ import annotations

from dataclasses import dataclass, field

from . import classic
from .classic import ERR, UNSAFE, Frame, Machine, Running
from .lang import NULL, ObsVal, Regs, StructuralError, ids_of, walk
from .layout import read_back
from .speculative import (
    STEP, BT, SErr, SUnsafe, flush, is_spec_terminal, singleton, spec_step,
)
from .system import Store


@dataclass(frozen=True, slots=True)
class Spec:
    """``spec { c }``: run victim command ``c`` speculatively."""

    body: tuple


@dataclass(frozen=True, slots=True)
class Poison:
    directive: object


@dataclass(frozen=True, slots=True)
class Observe:
    reg: str


@dataclass(frozen=True)
class ARunning:
    frames: tuple
    mem: tuple
    ds: tuple  # directive stack, head first
    os: tuple  # observation stack, head first


@dataclass(frozen=True)
class Hybrid:
    stack: tuple
    saved: tuple
    ds: tuple
    os: tuple


class AErr:
    def __repr__(self):
        return "AErr"


class AUnsafe:
    def __repr__(self):
        return "AUnsafe"


class AStuck:
    def __repr__(self):
        return "AStuck"


A_ERR, A_UNSAFE, A_STUCK = AErr(), AUnsafe(), AStuck()


def attacker_step(m: Machine, ac):
    """One transition; returns ``(config', rule, pushed observation or None)``."""
    if type(ac) is Hybrid:
        return _hybrid_step(m, ac)
    frames = ac.frames
    top = frames[0]
    if top.cmd:
        ins = top.cmd[0]
        t = type(ins)
        rest = top.cmd[1:]
        if t is Poison:
            nxt = ARunning((Frame(rest, top.regs, top.mode),) + frames[1:], ac.mem,
                           (ins.directive,) + ac.ds, ac.os)
            return nxt, "Poison", None
        if t is Observe:
            if ac.os:
                v, os_ = ObsVal(ac.os[0]), ac.os[1:]
                rule = "Observe"
            else:
                v, os_ = NULL, ()
                rule = "Observe-End"
            nxt = ARunning((Frame(rest, top.regs.set(ins.reg, v), top.mode),) + frames[1:],
                           ac.mem, ac.ds, os_)
            return nxt, rule, None
        if t is Spec:
            saved = (Frame(rest, top.regs, top.mode),) + frames[1:]
            stack = singleton(ins.body, top.regs, top.mode, ac.mem)
            return Hybrid(stack, saved, ac.ds, ac.os), "Spec-Init", None
    cfg, rule = classic.step(m, Running(frames, ac.mem))
    if cfg is ERR:
        return A_ERR, rule, None
    if cfg is UNSAFE:
        return A_UNSAFE, rule, None
    return ARunning(cfg.frames, cfg.mem, ac.ds, ac.os), rule, None


def _hybrid_step(m: Machine, h: Hybrid):
    stack = h.stack
    if len(stack) == 1:
        k = stack[0]
        if type(k) is SUnsafe:
            return A_UNSAFE, "Spec-Unsafe", None
        if type(k) is SErr and not k.ms:
            return A_ERR, "Spec-Error", None
        if is_spec_terminal(stack):
            return ARunning(h.saved, flush(k.buf, k.mem), h.ds, h.os), "Spec-Term", None
    if h.ds:
        r = spec_step(m, stack, h.ds[0])
        if r is not None:
            new, o = r
            return Hybrid(new, h.saved, h.ds[1:], (o,) + h.os), "Spec-D", o
    r = spec_step(m, stack, STEP)
    if r is not None:
        new, o = r
        return Hybrid(new, h.saved, h.ds, (o,) + h.os), "Spec-S", o
    r = spec_step(m, stack, BT)
    if r is not None:
        new, o = r
        return Hybrid(new, h.saved, h.ds, (o,) + h.os), "Spec-BT", o
    return A_STUCK, "Stuck", None


def is_final(ac) -> bool:
    if type(ac) is ARunning:
        return len(ac.frames) == 1 and not ac.frames[0].cmd
    return type(ac) is not Hybrid


@dataclass
class AttackResult:
    outcome: object
    log: list            # every observation ever pushed, in emission order
    residual_ds: tuple
    rules: list = field(default_factory=list)
    regs: Regs | None = None


def attacker_run(m: Machine, prog, regs: Regs | None = None, fuel: int = 10_000,
                 store: Store | None = None, keep_rules: bool = False) -> AttackResult:
    """Run an attacker program in user mode from the placed store."""
    store = store if store is not None else m.sys.store
    ac = ARunning((Frame(tuple(prog), regs or Regs(), None),), m.initial_memory(store), (), ())
    log: list = []
    rules: list = []
    used = 0
    ds: tuple = ()
    while not is_final(ac):
        if used >= fuel:
            break
        ac, rule, o = attacker_step(m, ac)
        if rule != "Fence":
            used += 1
        if o is not None:
            log.append(o)
        ds = getattr(ac, "ds", ds)
        if keep_rules:
            rules.append(rule)
    if ac is A_ERR:
        out = classic.Err()
    elif ac is A_UNSAFE:
        out = classic.Unsafe()
    elif ac is A_STUCK:
        out = classic.Stuck()
    elif type(ac) is ARunning and is_final(ac):
        out = classic.Done(ac.frames[0].regs.get("ret"), read_back(m.lay, m.sys, ac.mem, store))
    else:
        out = classic.FuelExhausted()
    final_regs = ac.frames[0].regs if type(ac) is ARunning else None
    return AttackResult(out, log, ds, rules, final_regs)


def check_unprivileged(sys, prog) -> None:
    """Attacker code may only mention user identifiers, and spec bodies are victim commands."""
    for i in ids_of(prog):
        if sys.is_kernel(i):
            raise StructuralError(f"attacker mentions kernel identifier {i!r}")
    for ins in walk(prog):
        if type(ins) is Spec:
            for inner in walk(ins.body):
                if type(inner) in (Spec, Poison, Observe):
                    raise StructuralError("spec bodies cannot contain attacker instructions")
