"""Buffered memories and the directive-driven speculative semantics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from .classic import Frame, Machine, Mode
from .lang import (
    RET, Assign, Call, Fence, If, Load, Regs, Skip, Store as StoreI, StructuralError,
    Syscall, While, eval_expr, to_bool, with_args,
)

# ---------------------------------------------------------- directives


@dataclass(frozen=True, slots=True)
class Step:
    def __str__(self):
        return "step"


@dataclass(frozen=True, slots=True)
class Backtrack:
    def __str__(self):
        return "bt"


@dataclass(frozen=True, slots=True)
class Branch:
    label: str
    taken: bool

    def __str__(self):
        return f"branch({self.label},{'true' if self.taken else 'false'})"


@dataclass(frozen=True, slots=True)
class LoadIdx:
    label: str
    index: int

    def __str__(self):
        return f"load({self.label},{self.index})"


STEP = Step()
BT = Backtrack()

# ---------------------------------------------------------- observations


@dataclass(frozen=True, slots=True)
class NoneObs:
    def __str__(self):
        return "none"


@dataclass(frozen=True, slots=True)
class BranchObs:
    taken: bool

    def __str__(self):
        return f"branch {'true' if self.taken else 'false'}"


@dataclass(frozen=True, slots=True)
class MemObs:
    addr: int

    def __str__(self):
        return f"mem {self.addr}"


@dataclass(frozen=True, slots=True)
class JumpObs:
    addr: int

    def __str__(self):
        return f"jmp {self.addr}"


@dataclass(frozen=True, slots=True)
class BtObs:
    flag: bool

    def __str__(self):
        return f"bt {'true' if self.flag else 'false'}"


NONE_OBS = NoneObs()

# ---------------------------------------------------------- buffered memory


class _NotAValue:
    def __repr__(self):
        return "NotAValue"


NOT_A_VALUE = _NotAValue()


def buf_read(buf: tuple, mem: tuple, a: int, i: int):
    """Read address ``a`` skipping ``i`` newer matching entries.

    Returns ``(value, stale)``; ``stale`` is True when a newer write to ``a``
    was skipped.  Cells holding code or nothing give ``(NOT_A_VALUE, stale)``.
    """
    stale = False
    for addr, v in buf:
        if addr != a:
            continue
        if i == 0:
            return v, stale
        i -= 1
        stale = True
    cell = mem[a]
    if cell is None or isinstance(cell, tuple):
        return NOT_A_VALUE, stale
    return cell, stale


def buf_write(buf: tuple, a: int, v) -> tuple:
    if isinstance(v, tuple):
        raise StructuralError("code cannot be written through the buffer")
    return ((a, v),) + buf


def flush(buf: tuple, mem: tuple) -> tuple:
    """Commit the buffer, oldest entry first, so the newest write wins."""
    if not buf:
        return mem
    out = list(mem)
    for a, v in reversed(buf):
        if isinstance(out[a], tuple):
            raise StructuralError(f"flush would overwrite code at {a}")
        out[a] = v
    return tuple(out)


def matching_entries(buf: tuple, a) -> int:
    return sum(1 for addr, _ in buf if addr == a)


# ---------------------------------------------------------- configurations


@dataclass(frozen=True, slots=True)
class SRunning:
    frames: tuple
    buf: tuple
    mem: tuple
    ms: bool


@dataclass(frozen=True, slots=True)
class SErr:
    ms: bool


@dataclass(frozen=True, slots=True)
class SUnsafe:
    def __repr__(self):
        return "SUnsafe"


S_UNSAFE = SUnsafe()
UNSAFE_STACK = (S_UNSAFE,)


def singleton(c, regs: Regs, mode: Mode, mem: tuple, buf: tuple = ()) -> tuple:
    return (SRunning((Frame(tuple(c), regs, mode),), buf, mem, False),)


def is_spec_terminal(stack: tuple) -> bool:
    """A ⊥ singleton whose only frame has finished."""
    if len(stack) != 1:
        return False
    k = stack[0]
    return (type(k) is SRunning and not k.ms and len(k.frames) == 1
            and not k.frames[0].cmd)


def spec_step(m: Machine, stack: tuple, d):
    """Apply directive ``d``; returns ``(stack', observation)`` or None if irreducible."""
    if not stack:
        return None
    top = stack[0]
    tail = stack[1:]
    tt = type(top)
    if tt is SUnsafe:
        return None
    if type(d) is Backtrack:
        if top.ms:
            return tail, BtObs(True)
        if tail:
            return (top,), BtObs(False)
        return None
    if tt is SErr:
        return None

    frames, buf, mem, ms = top.frames, top.buf, top.mem, top.ms
    fr = frames[0]
    cmd, regs, mode = fr.cmd, fr.regs, fr.mode
    below = frames[1:]
    dt = type(d)

    def cont(new_frames, new_buf=buf, new_mem=mem, new_ms=ms):
        return (SRunning(new_frames, new_buf, new_mem, new_ms),) + tail

    if not cmd:
        if dt is Step and below:
            caller = below[0]
            new = Frame(caller.cmd, caller.regs.set(RET, regs.get(RET)), caller.mode)
            return cont((new,) + below[1:]), NONE_OBS
        return None

    ins, rest = cmd[0], cmd[1:]
    t = type(ins)

    if t is Load:
        if dt is LoadIdx:
            if d.label != ins.label:
                return None
        elif dt is not Step:
            return None
        a = m.addr(ins.addr, regs)
        if a not in m.arrays_in(mode):
            return (SErr(ms),) + tail, NONE_OBS
        if not m.allowed(mode, a):
            return UNSAFE_STACK, MemObs(a)
        if dt is Step:
            v, stale = buf_read(buf, mem, a, 0)
            assert not stale
            return cont((Frame(rest, regs.set(ins.reg, v), mode),) + below), MemObs(a)
        v, stale = buf_read(buf, mem, a, d.index)
        new_top = SRunning((Frame(rest, regs.set(ins.reg, v), mode),) + below, buf, mem, ms or stale)
        return (new_top, top) + tail, MemObs(a)

    if t is If or t is While:
        guard = to_bool(eval_expr(ins.cond, regs, m.lay))
        if dt is Step:
            taken, new_ms, checkpoint = guard, ms, ()
        elif dt is Branch and d.label == ins.label:
            taken, new_ms, checkpoint = d.taken, ms or (d.taken != guard), (top,)
        else:
            return None
        if t is If:
            nxt = (ins.then if taken else ins.orelse) + rest
        else:
            nxt = ins.body + cmd if taken else rest
        new_top = SRunning((Frame(nxt, regs, mode),) + below, buf, mem, new_ms)
        return (new_top,) + checkpoint + tail, BranchObs(taken)

    if dt is not Step:
        return None

    if t is Skip:
        return cont((Frame(rest, regs, mode),) + below), NONE_OBS
    if t is Assign:
        v = eval_expr(ins.expr, regs, m.lay)
        return cont((Frame(rest, regs.set(ins.reg, v), mode),) + below), NONE_OBS
    if t is Fence:
        if ms:
            return None
        return cont((Frame(rest, regs, mode),) + below, (), flush(buf, mem)), NONE_OBS
    if t is StoreI:
        a = m.addr(ins.addr, regs)
        if a not in m.arrays_in(mode):
            return (SErr(ms),) + tail, NONE_OBS
        if not m.allowed(mode, a):
            return UNSAFE_STACK, MemObs(a)
        v = eval_expr(ins.value, regs, m.lay)
        return cont((Frame(rest, regs, mode),) + below, buf_write(buf, a, v)), MemObs(a)
    if t is Call:
        a = m.addr(ins.target, regs)
        if a not in m.procs_in(mode):
            return (SErr(ms),) + tail, NONE_OBS
        if not m.allowed(mode, a):
            return UNSAFE_STACK, JumpObs(a)
        args = with_args(eval_expr(e, regs, m.lay) for e in ins.args)
        callee = Frame(mem[a], args, mode)
        return cont((callee, Frame(rest, regs, mode)) + below), JumpObs(a)
    if t is Syscall:
        args = with_args(eval_expr(e, regs, m.lay) for e in ins.args)
        callee = Frame(m.sys.body(ins.name), args, m.syscall_mode(mode, ins.name))
        return cont((callee, Frame(rest, regs, mode)) + below), NONE_OBS
    raise StructuralError(f"instruction {ins!r} has no speculative semantics")


def reducible(m: Machine, stack: tuple, d) -> bool:
    return spec_step(m, stack, d) is not None


def candidate_directives(stack: tuple) -> list:
    """Directives worth trying at ``stack``; all others are irreducible or redundant.

    Load indices beyond the number of matching buffer entries read the same
    cell as the last one, so they are not enumerated.
    """
    if not stack:
        return []
    top = stack[0]
    out = [STEP, BT]
    if type(top) is not SRunning or not top.frames[0].cmd:
        return out
    ins = top.frames[0].cmd[0]
    t = type(ins)
    if t is If or t is While:
        out += [Branch(ins.label, True), Branch(ins.label, False)]
    elif t is Load:
        # the address is only known under a layout; bound by the whole buffer
        n = len(top.buf)
        out += [LoadIdx(ins.label, i) for i in range(n + 1)]
    return out


def load_candidates(m: Machine, stack: tuple) -> list:
    """Like ``candidate_directives`` but with load indices cut to the matching entries."""
    out = candidate_directives(stack)
    if not stack or type(stack[0]) is not SRunning or not stack[0].frames[0].cmd:
        return out
    top = stack[0]
    ins = top.frames[0].cmd[0]
    if type(ins) is Load:
        a = m.addr(ins.addr, top.frames[0].regs)
        k = matching_entries(top.buf, a)
        out = [d for d in out if type(d) is not LoadIdx or d.index <= k]
    return out


@dataclass
class SpecRun:
    stack: tuple
    observations: list
    consumed: int
    status: str  # "done", "unsafe", "stuck", "fuel"

    @property
    def stuck_at(self) -> Optional[int]:
        return self.consumed if self.status == "stuck" else None


def spec_run(m: Machine, stack: tuple, directives: Iterable, fuel: int = 10_000) -> SpecRun:
    """Consume directives left to right until unsafe, stuck, or out of fuel."""
    obs: list = []
    n = 0
    for d in directives:
        if stack == UNSAFE_STACK:
            return SpecRun(stack, obs, n, "unsafe")
        if n >= fuel:
            return SpecRun(stack, obs, n, "fuel")
        r = spec_step(m, stack, d)
        if r is None:
            return SpecRun(stack, obs, n, "stuck")
        stack, o = r
        obs.append(o)
        n += 1
    return SpecRun(stack, obs, n, "unsafe" if stack == UNSAFE_STACK else "done")


def step_only_run(m: Machine, stack: tuple, fuel: int) -> SpecRun:
    """Apply Step until it no longer applies (or fuel runs out)."""
    obs: list = []
    n = 0
    while n < fuel:
        r = spec_step(m, stack, STEP)
        if r is None:
            return SpecRun(stack, obs, n, "unsafe" if stack == UNSAFE_STACK else "done")
        stack, o = r
        obs.append(o)
        n += 1
    return SpecRun(stack, obs, n, "fuel")
