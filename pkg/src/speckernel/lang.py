"""Values, expressions, instructions and pure expression evaluation.

Every interpreter in the package shares these definitions.  Syntax trees are
immutable (frozen dataclasses, commands are tuples) so configurations built
from them can be hashed, compared and snapshotted freely.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping, Union

INT_MIN = -(2 ** 63)
INT_MAX = 2 ** 63 - 1

#: Argument registers filled by Call and Syscall, in order.
ARG_REGS = tuple(f"x{i}" for i in range(1, 9))
RET = "ret"


class StructuralError(Exception):
    """The input is ill-formed (unknown identifier, bad arity, ...).

    Distinct from the runtime ``err`` outcome of the semantics: a structural
    error means the system or program should never have been evaluated.
    """


# ---------------------------------------------------------------- values


@dataclass(frozen=True, slots=True)
class Int:
    n: int

    def __repr__(self) -> str:
        return f"Int({self.n})"


@dataclass(frozen=True, slots=True)
class Bool:
    b: bool

    def __repr__(self) -> str:
        return f"Bool({self.b})"


@dataclass(frozen=True, slots=True)
class Null:
    def __repr__(self) -> str:
        return "Null"


@dataclass(frozen=True, slots=True)
class ObsVal:
    """An observation stored in a register by ``x := observe``."""

    obs: object

    def __repr__(self) -> str:
        return f"ObsVal({self.obs!r})"


Value = Union[Int, Bool, Null, ObsVal]

NULL = Null()
TRUE = Bool(True)
FALSE = Bool(False)


def wrap64(n: int) -> int:
    return (n - INT_MIN) % (2 ** 64) + INT_MIN


def mk_int(n: int) -> Int:
    return Int(wrap64(n))


class _Invalid:
    """Address of every value that does not name a cell of the address space."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INVALID"

    def __reduce__(self):
        return (_Invalid, ())


INVALID = _Invalid()


def to_addr(v: Value, size: int) -> int | _Invalid:
    """Cast a value to an address of a space with ``size`` cells."""
    if type(v) is Int and 0 <= v.n < size:
        return v.n
    return INVALID


def to_bool(v: Value) -> bool:
    t = type(v)
    if t is Bool:
        return v.b
    if t is Int:
        return v.n != 0
    if t is Null:
        return False
    return True


# ------------------------------------------------------------- operators

OP_ARITY = {
    "add": 2, "sub": 2, "mul": 2,
    "eq": 2, "neq": 2, "lt": 2, "le": 2,
    "and": 2, "or": 2, "not": 1,
}


def apply_op(op: str, args: tuple[Value, ...] | list[Value]) -> Value:
    """Total interpretation of the fixed operator set."""
    if OP_ARITY.get(op) != len(args):
        raise StructuralError(f"operator {op!r} applied to {len(args)} operands")
    if op == "not":
        return Bool(not to_bool(args[0]))
    a, b = args
    if op == "eq":
        return Bool(a == b)
    if op == "neq":
        return Bool(a != b)
    if op == "and":
        return Bool(to_bool(a) and to_bool(b))
    if op == "or":
        return Bool(to_bool(a) or to_bool(b))
    if type(a) is not Int or type(b) is not Int:
        if op in ("lt", "le"):
            return FALSE
        return NULL
    x, y = a.n, b.n
    if op == "add":
        return mk_int(x + y)
    if op == "sub":
        return mk_int(x - y)
    if op == "mul":
        return mk_int(x * y)
    if op == "lt":
        return Bool(x < y)
    return Bool(x <= y)


# ------------------------------------------------------------ expressions


@dataclass(frozen=True, slots=True)
class Const:
    value: Value


@dataclass(frozen=True, slots=True)
class Reg:
    name: str


@dataclass(frozen=True, slots=True)
class Ident:
    """An array or procedure identifier; evaluates to its base address."""

    name: str


@dataclass(frozen=True, slots=True)
class OpApp:
    op: str
    args: tuple

    def __post_init__(self):
        if OP_ARITY.get(self.op) != len(self.args):
            raise StructuralError(f"operator {self.op!r} expects {OP_ARITY.get(self.op)} operands")


Expr = Union[Const, Reg, Ident, OpApp]


def eval_expr(e: Expr, regs: "Regs", layout: Mapping[str, int]) -> Value:
    t = type(e)
    if t is Const:
        return e.value
    if t is Reg:
        return regs.get(e.name)
    if t is Ident:
        try:
            return Int(layout[e.name])
        except KeyError:
            raise StructuralError(f"identifier {e.name!r} is not placed by the layout") from None
    return apply_op(e.op, [eval_expr(a, regs, layout) for a in e.args])


def expr_ids(e: Expr) -> set[str]:
    t = type(e)
    if t is Ident:
        return {e.name}
    if t is OpApp:
        out: set[str] = set()
        for a in e.args:
            out |= expr_ids(a)
        return out
    return set()


def expr_regs(e: Expr) -> set[str]:
    t = type(e)
    if t is Reg:
        return {e.name}
    if t is OpApp:
        out: set[str] = set()
        for a in e.args:
            out |= expr_regs(a)
        return out
    return set()


# ---------------------------------------------------------- instructions


@dataclass(frozen=True, slots=True)
class Skip:
    pass


@dataclass(frozen=True, slots=True)
class Assign:
    reg: str
    expr: Expr


@dataclass(frozen=True, slots=True)
class Load:
    label: str
    reg: str
    addr: Expr


@dataclass(frozen=True, slots=True)
class Store:
    addr: Expr
    value: Expr


@dataclass(frozen=True, slots=True)
class Call:
    target: Expr
    args: tuple


@dataclass(frozen=True, slots=True)
class Syscall:
    name: str
    args: tuple


@dataclass(frozen=True, slots=True)
class If:
    label: str
    cond: Expr
    then: tuple
    orelse: tuple


@dataclass(frozen=True, slots=True)
class While:
    label: str
    cond: Expr
    body: tuple


@dataclass(frozen=True, slots=True)
class Fence:
    pass


SKIP = Skip()
FENCE = Fence()

Instr = Union[Skip, Assign, Load, Store, Call, Syscall, If, While, Fence]
Cmd = tuple  # tuple[Instr, ...]


def instr_exprs(ins) -> tuple:
    t = type(ins)
    if t is Assign:
        return (ins.expr,)
    if t is Load:
        return (ins.addr,)
    if t is Store:
        return (ins.addr, ins.value)
    if t is Call:
        return (ins.target,) + tuple(ins.args)
    if t is Syscall:
        return tuple(ins.args)
    if t is If or t is While:
        return (ins.cond,)
    return ()


def sub_cmds(ins) -> tuple:
    t = type(ins)
    if t is If:
        return (ins.then, ins.orelse)
    if t is While:
        return (ins.body,)
    body = getattr(ins, "body", None)
    if body is not None and t.__name__ == "Spec":
        return (body,)
    return ()


def walk(c: Cmd) -> Iterator:
    """Preorder traversal of every instruction in ``c``, nested ones included."""
    for ins in c:
        yield ins
        for sub in sub_cmds(ins):
            yield from walk(sub)


def ids_of(c: Cmd) -> set[str]:
    out: set[str] = set()
    for ins in walk(c):
        for e in instr_exprs(ins):
            out |= expr_ids(e)
    return out


def syscalls_of(c: Cmd) -> set[str]:
    return {ins.name for ins in walk(c) if type(ins) is Syscall}


def labels_of(c: Cmd) -> list[str]:
    return [ins.label for ins in walk(c) if type(ins) in (Load, If, While)]


# ---------------------------------------------------------- register maps


class Regs:
    """Immutable total register map; unset registers read as Null."""

    __slots__ = ("_d", "_h")

    def __init__(self, d: Mapping[str, Value] | None = None):
        self._d = {k: v for k, v in (d or {}).items() if v != NULL}
        self._h = None

    def get(self, name: str) -> Value:
        return self._d.get(name, NULL)

    def set(self, name: str, v: Value) -> "Regs":
        r = Regs.__new__(Regs)
        d = dict(self._d)
        if v == NULL:
            d.pop(name, None)
        else:
            d[name] = v
        r._d = d
        r._h = None
        return r

    def items(self):
        return self._d.items()

    def __eq__(self, other) -> bool:
        return isinstance(other, Regs) and self._d == other._d

    def __hash__(self) -> int:
        if self._h is None:
            self._h = hash(frozenset(self._d.items()))
        return self._h

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}={v!r}" for k, v in sorted(self._d.items()))
        return f"Regs({inner})"


RHO0 = Regs()


def with_args(values) -> Regs:
    """``ρ0[x1..xn ↦ values]``."""
    values = list(values)
    if len(values) > len(ARG_REGS):
        raise StructuralError(f"{len(values)} arguments exceed the {len(ARG_REGS)} argument registers")
    return Regs(dict(zip(ARG_REGS, values)))
