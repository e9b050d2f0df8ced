"""Instrumented non-speculative small-step semantics and the evaluation function."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

from .lang import (
    RET, Assign, Call, Fence, If, Load, Regs, Skip, Store as StoreI,
    StructuralError, Syscall, Value, While, eval_expr, to_addr, to_bool, with_args,
)
from .layout import footprint_set, place, read_back, validate_layout
from .system import Store, System

# A mode is None for user mode or the name of the system call that entered
# kernel mode.
Mode = Optional[str]
USER: Mode = None


def mode_str(mode: Mode) -> str:
    return "user" if mode is None else f"kernel[{mode}]"


@dataclass(frozen=True, slots=True)
class Frame:
    cmd: tuple
    regs: Regs
    mode: Mode


class Machine:
    """A system under a fixed layout, with the address sets the rules consult."""

    def __init__(self, sys: System, lay: Mapping[str, int], check: bool = True):
        if check:
            rep = validate_layout(lay, sys)
            if not rep.ok:
                raise StructuralError(f"invalid layout: {rep}")
        self.sys = sys
        self.lay = lay
        self.size = sys.kappa_u + sys.kappa_k
        arrays = {a.name for a in sys.arrays}
        procs = {p.name for p in sys.procs}
        kern = set(sys.kernel_ids)
        self.ar_user = footprint_set(lay, sys, arrays - kern)
        self.ar_kernel = footprint_set(lay, sys, arrays & kern)
        self.fn_user = footprint_set(lay, sys, procs - kern)
        self.fn_kernel = footprint_set(lay, sys, procs & kern)
        self.cap_addrs = {s.name: footprint_set(lay, sys, s.caps) for s in sys.syscalls}

    def arrays_in(self, mode: Mode) -> frozenset:
        return self.ar_user if mode is None else self.ar_kernel

    def procs_in(self, mode: Mode) -> frozenset:
        return self.fn_user if mode is None else self.fn_kernel

    def allowed(self, mode: Mode, a) -> bool:
        """The capability guard: user mode is unrestricted, kernel[s] needs caps(s)."""
        return mode is None or a in self.cap_addrs[mode]

    def addr(self, e, regs: Regs):
        return to_addr(eval_expr(e, regs, self.lay), self.size)

    def initial_memory(self, store: Store | None = None) -> tuple:
        return place(self.lay, self.sys, store if store is not None else self.sys.store)

    def syscall_mode(self, outer: Mode, name: str) -> Mode:
        return name if outer is None else outer


# -------------------------------------------------------- configurations


@dataclass(frozen=True, slots=True)
class Running:
    frames: tuple  # top first
    mem: tuple


@dataclass(frozen=True, slots=True)
class ErrState:
    def __repr__(self):
        return "Err"


@dataclass(frozen=True, slots=True)
class UnsafeState:
    def __repr__(self):
        return "Unsafe"


ERR = ErrState()
UNSAFE = UnsafeState()


def is_terminal(cfg) -> bool:
    if type(cfg) is not Running:
        return True
    return len(cfg.frames) == 1 and not cfg.frames[0].cmd


def step(m: Machine, cfg: Running):
    """One transition; returns ``(next_config, rule_name)``.

    A terminal configuration (single frame, empty command) is a fixpoint.
    """
    frames = cfg.frames
    top = frames[0]
    cmd, regs, mode = top.cmd, top.regs, top.mode
    if not cmd:
        if len(frames) == 1:
            return cfg, "Terminal"
        caller = frames[1]
        new = Frame(caller.cmd, caller.regs.set(RET, regs.get(RET)), caller.mode)
        return Running((new,) + frames[2:], cfg.mem), "Pop"
    ins, rest = cmd[0], cmd[1:]
    below = frames[1:]
    t = type(ins)
    if t is Skip:
        return Running((Frame(rest, regs, mode),) + below, cfg.mem), "Skip"
    if t is Fence:
        return Running((Frame(rest, regs, mode),) + below, cfg.mem), "Fence"
    if t is Assign:
        v = eval_expr(ins.expr, regs, m.lay)
        return Running((Frame(rest, regs.set(ins.reg, v), mode),) + below, cfg.mem), "Op"
    if t is If:
        branch = ins.then if to_bool(eval_expr(ins.cond, regs, m.lay)) else ins.orelse
        return Running((Frame(branch + rest, regs, mode),) + below, cfg.mem), "If"
    if t is While:
        if to_bool(eval_expr(ins.cond, regs, m.lay)):
            nxt = ins.body + cmd
        else:
            nxt = rest
        return Running((Frame(nxt, regs, mode),) + below, cfg.mem), "While"
    if t is Load:
        a = m.addr(ins.addr, regs)
        if a not in m.arrays_in(mode):
            return ERR, "Load-Error"
        if not m.allowed(mode, a):
            return UNSAFE, "Load-Unsafe"
        return Running((Frame(rest, regs.set(ins.reg, cfg.mem[a]), mode),) + below, cfg.mem), "Load"
    if t is StoreI:
        a = m.addr(ins.addr, regs)
        if a not in m.arrays_in(mode):
            return ERR, "Store-Error"
        if not m.allowed(mode, a):
            return UNSAFE, "Store-Unsafe"
        v = eval_expr(ins.value, regs, m.lay)
        mem = cfg.mem[:a] + (v,) + cfg.mem[a + 1:]
        return Running((Frame(rest, regs, mode),) + below, mem), "Store"
    if t is Call:
        a = m.addr(ins.target, regs)
        if a not in m.procs_in(mode):
            return ERR, "Call-Error"
        if not m.allowed(mode, a):
            return UNSAFE, "Call-Unsafe"
        args = with_args(eval_expr(e, regs, m.lay) for e in ins.args)
        callee = Frame(cfg.mem[a], args, mode)
        return Running((callee, Frame(rest, regs, mode)) + below, cfg.mem), "Call"
    if t is Syscall:
        args = with_args(eval_expr(e, regs, m.lay) for e in ins.args)
        callee = Frame(m.sys.body(ins.name), args, m.syscall_mode(mode, ins.name))
        return Running((callee, Frame(rest, regs, mode)) + below, cfg.mem), "SystemCall"
    raise StructuralError(f"instruction {ins!r} has no classic semantics")


# -------------------------------------------------------------- outcomes


@dataclass(frozen=True)
class Done:
    value: Value
    store: Store


@dataclass(frozen=True)
class Err:
    def __repr__(self):
        return "Err"


@dataclass(frozen=True)
class Unsafe:
    def __repr__(self):
        return "Unsafe"


@dataclass(frozen=True)
class FuelExhausted:
    def __repr__(self):
        return "FuelExhausted"


@dataclass(frozen=True)
class Stuck:
    """Attacker runs only: speculation reached a stack no rule can reduce."""

    def __repr__(self):
        return "Stuck"


Outcome = Done | Err | Unsafe | FuelExhausted | Stuck


def outcome_kind(o) -> str:
    return type(o).__name__


def initial(m: Machine, c, regs: Regs, mode: Mode, store: Store | None = None) -> Running:
    return Running((Frame(tuple(c), regs, mode),), m.initial_memory(store))


def finish(m: Machine, cfg, store: Store):
    """Outcome of a configuration that stopped (terminal or not)."""
    if cfg is ERR:
        return Err()
    if cfg is UNSAFE:
        return Unsafe()
    if is_terminal(cfg):
        return Done(cfg.frames[0].regs.get(RET), read_back(m.lay, m.sys, cfg.mem, store))
    return FuelExhausted()


def run(m: Machine, cfg, fuel: int, record=None):
    """Iterate ``step`` until terminal or out of fuel; Fence steps are free."""
    used = 0
    while type(cfg) is Running and not is_terminal(cfg):
        top = cfg.frames[0]
        fence = bool(top.cmd) and type(top.cmd[0]) is Fence
        if not fence:
            if used >= fuel:
                break
            used += 1
        nxt, rule = step(m, cfg)
        if record is not None:
            record.append((rule, top, cfg))
        cfg = nxt
    return cfg


def eval_cmd(sys: System, lay, c, regs: Regs, mode: Mode, store: Store | None = None,
             fuel: int = 10_000, machine: Machine | None = None):
    """The evaluation function; FuelExhausted stands in for divergence."""
    m = machine or Machine(sys, lay)
    store = store if store is not None else sys.store
    cfg = run(m, initial(m, c, regs, mode, store), fuel)
    return finish(m, cfg, store)


def eval_syscall(sys: System, lay, name: str, regs: Regs, store: Store | None = None,
                 fuel: int = 10_000, machine: Machine | None = None):
    return eval_cmd(sys, lay, sys.body(name), regs, name, store, fuel, machine)


@dataclass
class TraceStep:
    step: int
    rule: str
    mode: str
    instr: str

    def to_json(self) -> dict:
        return {"step": self.step, "rule": self.rule, "mode": self.mode, "instr": self.instr}


def trace(sys: System, lay, c, regs: Regs, mode: Mode, store: Store | None = None,
          fuel: int = 10_000, machine: Machine | None = None):
    """Run and record ``(rule, top instruction, mode)`` per step plus the outcome."""
    from .syntax import show_instr

    m = machine or Machine(sys, lay)
    store = store if store is not None else sys.store
    rec: list = []
    cfg = run(m, initial(m, c, regs, mode, store), fuel, rec)
    steps = []
    for n, (rule, top, _) in enumerate(rec):
        instr = show_instr(top.cmd[0]) if top.cmd else "(return)"
        steps.append(TraceStep(n, rule, mode_str(top.mode), instr))
    return steps, finish(m, cfg, store)


def equivalent(o1, o2) -> bool:
    """Outcome equivalence: equality, except that Err and Unsafe are identified."""
    bad = (Err, Unsafe)
    if isinstance(o1, bad) and isinstance(o2, bad):
        return True
    return o1 == o2
