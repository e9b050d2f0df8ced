"""Text format for systems and attacker programs: parser and printer.

Grammar sketch::

    system {
      user|kernel array NAME[N] (= [LIT, ..])?;
      user|kernel proc NAME() { CMD }
      syscall NAME(x1, ..) caps {ID, ..} { CMD }
      space user K_U kernel K_K;
    }

Statements are ``skip; x := E; load x <- E; store E -> E; call E(E, ..);
syscall NAME(E, ..); if E {..} else {..}; while E {..}; fence;``.  Loads,
ifs and whiles take an optional ``@label`` right after their expression;
unlabeled ones get ``l1, l2, ...`` in preorder.  Attacker programs add
``poison DIRECTIVE; x := observe; spec { CMD }``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .attacker import Observe, Poison, Spec
from .lang import (
    FALSE, NULL, TRUE, Assign, Bool, Call, Const, Fence, Ident, If, Int, Load, Null, OpApp,
    Reg, Skip, Store, Syscall, While, mk_int, sub_cmds,
)
from .speculative import BT, STEP, Branch, LoadIdx
from .system import ArrayDecl, ProcDecl, SyscallDecl, System, label_check, validate_system


class ParseError(Exception):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {msg}" if line else msg)
        self.line, self.col = line, col


KEYWORDS = {
    "skip", "load", "store", "call", "syscall", "if", "else", "while", "fence", "true",
    "false", "null", "poison", "spec", "observe", "system", "user", "kernel", "array",
    "proc", "caps", "space",
}

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*|//[^\n]*)
  | (?P<int>\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<sym>:=|<-|->|==|!=|<=|&&|\|\||[-+*<!(){}\[\],;@=])
""", re.VERBOSE)


@dataclass
class Tok:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list:
    out, pos, line, line_start = [], 0, 1, 0
    while pos < len(text):
        mt = _TOKEN.match(text, pos)
        if not mt:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = mt.lastgroup
        if kind != "ws":
            out.append(Tok(kind, mt.group(), line, pos - line_start + 1))
        for k, ch in enumerate(mt.group()):
            if ch == "\n":
                line += 1
                line_start = pos + k + 1
        pos = mt.end()
    out.append(Tok("eof", "", line, pos - line_start + 1))
    return out


_BINOPS = [
    {"||": "or"},
    {"&&": "and"},
    {"==": "eq", "!=": "neq"},
    {"<": "lt", "<=": "le"},
    {"+": "add", "-": "sub"},
    {"*": "mul"},
]


class Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # -- token helpers --------------------------------------------------

    @property
    def tok(self) -> Tok:
        return self.toks[self.i]

    def error(self, msg: str):
        t = self.tok
        raise ParseError(f"{msg}, found {t.text or 'end of input'!r}", t.line, t.col)

    def at(self, text: str) -> bool:
        t = self.tok
        return t.text == text and t.kind in ("sym", "name")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Tok:
        if not self.at(text):
            self.error(f"expected {text!r}")
        t = self.tok
        self.i += 1
        return t

    def name(self) -> str:
        t = self.tok
        if t.kind != "name" or t.text in KEYWORDS:
            self.error("expected a name")
        self.i += 1
        return t.text

    def integer(self) -> int:
        neg = self.accept("-")
        t = self.tok
        if t.kind != "int":
            self.error("expected an integer")
        self.i += 1
        return -int(t.text) if neg else int(t.text)

    # -- expressions ----------------------------------------------------

    def expr(self, level: int = 0):
        if level == len(_BINOPS):
            return self.unary()
        left = self.expr(level + 1)
        ops = _BINOPS[level]
        while self.tok.kind == "sym" and self.tok.text in ops:
            op = ops[self.tok.text]
            self.i += 1
            right = self.expr(level + 1)
            left = OpApp(op, (left, right))
        return left

    def unary(self):
        if self.accept("!"):
            return OpApp("not", (self.unary(),))
        if self.at("-") and self.toks[self.i + 1].kind == "int":
            return Const(mk_int(self.integer()))
        return self.primary()

    def primary(self):
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return Const(mk_int(int(t.text)))
        if self.accept("true"):
            return Const(TRUE)
        if self.accept("false"):
            return Const(FALSE)
        if self.accept("null"):
            return Const(NULL)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        return Reg(self.name())

    def literal(self):
        if self.accept("true"):
            return TRUE
        if self.accept("false"):
            return FALSE
        if self.accept("null"):
            return NULL
        return mk_int(self.integer())

    def args(self) -> tuple:
        self.expect("(")
        out = []
        if not self.at(")"):
            out.append(self.expr())
            while self.accept(","):
                out.append(self.expr())
        self.expect(")")
        return tuple(out)

    # -- commands -------------------------------------------------------

    def label(self):
        if self.accept("@"):
            return self.name()
        return None

    def block(self, attacker: bool = False) -> tuple:
        self.expect("{")
        out = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.error("unterminated block")
            out.append(self.stmt(attacker))
        self.expect("}")
        return tuple(out)

    def stmt(self, attacker: bool):
        if self.accept("skip"):
            self.expect(";")
            return Skip()
        if self.accept("fence"):
            self.expect(";")
            return Fence()
        if self.accept("load"):
            reg = self.name()
            self.expect("<-")
            e = self.expr()
            lbl = self.label()
            self.expect(";")
            return Load(lbl, reg, e)
        if self.accept("store"):
            a = self.expr()
            self.expect("->")
            v = self.expr()
            self.expect(";")
            return Store(a, v)
        if self.accept("call"):
            target = self.expr()
            args = self.args()
            self.expect(";")
            return Call(target, args)
        if self.accept("syscall"):
            name = self.name()
            args = self.args()
            self.expect(";")
            return Syscall(name, args)
        if self.accept("if"):
            cond = self.expr()
            lbl = self.label()
            then = self.block(attacker)
            orelse = self.block(attacker) if self.accept("else") else ()
            self.accept(";")
            return If(lbl, cond, then, orelse)
        if self.accept("while"):
            cond = self.expr()
            lbl = self.label()
            body = self.block(attacker)
            self.accept(";")
            return While(lbl, cond, body)
        if self.at("poison") or self.at("spec"):
            if not attacker:
                self.error("attacker instruction in victim code")
            if self.accept("poison"):
                d = self.directive()
                self.expect(";")
                return Poison(d)
            self.expect("spec")
            body = self.block(attacker=False)
            self.accept(";")
            return Spec(body)
        reg = self.name()
        self.expect(":=")
        if self.at("observe"):
            if not attacker:
                self.error("attacker instruction in victim code")
            self.i += 1
            self.expect(";")
            return Observe(reg)
        e = self.expr()
        self.expect(";")
        return Assign(reg, e)

    def directive(self):
        if self.accept("step"):
            return STEP
        if self.accept("bt"):
            return BT
        if self.accept("branch"):
            self.expect("(")
            lbl = self.name()
            self.expect(",")
            if self.accept("true"):
                b = True
            else:
                self.expect("false")
                b = False
            self.expect(")")
            return Branch(lbl, b)
        if self.at("load"):
            self.i += 1
            self.expect("(")
            lbl = self.name()
            self.expect(",")
            t = self.tok
            if t.kind != "int":
                self.error("expected a load index")
            self.i += 1
            self.expect(")")
            return LoadIdx(lbl, int(t.text))
        self.error("expected a directive")

    # -- systems ----------------------------------------------------------

    def system(self) -> System:
        self.expect("system")
        self.expect("{")
        arrays, procs, syscalls, space = [], [], [], None
        while not self.accept("}"):
            if self.at("user") or self.at("kernel"):
                kernel = self.tok.text == "kernel"
                self.i += 1
                if self.accept("array"):
                    name = self.name()
                    self.expect("[")
                    size = self.integer()
                    self.expect("]")
                    init = []
                    if self.accept("="):
                        self.expect("[")
                        if not self.at("]"):
                            init.append(self.literal())
                            while self.accept(","):
                                init.append(self.literal())
                        self.expect("]")
                    self.expect(";")
                    arrays.append(ArrayDecl(name, kernel, size, tuple(init)))
                else:
                    self.expect("proc")
                    name = self.name()
                    self.expect("(")
                    self.expect(")")
                    procs.append(ProcDecl(name, kernel, self.block()))
                    self.accept(";")
            elif self.accept("syscall"):
                name = self.name()
                self.expect("(")
                params = []
                if not self.at(")"):
                    params.append(self.name())
                    while self.accept(","):
                        params.append(self.name())
                self.expect(")")
                self.expect("caps")
                self.expect("{")
                caps = []
                if not self.at("}"):
                    caps.append(self.name())
                    while self.accept(","):
                        caps.append(self.name())
                self.expect("}")
                syscalls.append(SyscallDecl(name, tuple(params), frozenset(caps), self.block()))
                self.accept(";")
            elif self.accept("space"):
                self.expect("user")
                ku = self.integer()
                self.expect("kernel")
                kk = self.integer()
                self.expect(";")
                space = (ku, kk)
            else:
                self.error("expected a declaration")
        if self.tok.kind != "eof":
            self.error("trailing input after system")
        if space is None:
            raise ParseError("missing 'space user K_U kernel K_K;' declaration")
        return System(tuple(arrays), tuple(procs), tuple(syscalls), *space)


# ------------------------------------------------------ post-processing


def _map_expr(e, ids):
    t = type(e)
    if t is Reg and e.name in ids:
        return Ident(e.name)
    if t is OpApp:
        return OpApp(e.op, tuple(_map_expr(a, ids) for a in e.args))
    return e


def _map_cmd(c: tuple, ids, fresh) -> tuple:
    out = []
    for ins in c:
        t = type(ins)
        if t is Assign:
            ins = Assign(ins.reg, _map_expr(ins.expr, ids))
        elif t is Load:
            ins = Load(ins.label or fresh(), ins.reg, _map_expr(ins.addr, ids))
        elif t is Store:
            ins = Store(_map_expr(ins.addr, ids), _map_expr(ins.value, ids))
        elif t is Call:
            ins = Call(_map_expr(ins.target, ids), tuple(_map_expr(a, ids) for a in ins.args))
        elif t is Syscall:
            ins = Syscall(ins.name, tuple(_map_expr(a, ids) for a in ins.args))
        elif t is If:
            lbl = ins.label or fresh()
            ins = If(lbl, _map_expr(ins.cond, ids), _map_cmd(ins.then, ids, fresh),
                     _map_cmd(ins.orelse, ids, fresh))
        elif t is While:
            lbl = ins.label or fresh()
            ins = While(lbl, _map_expr(ins.cond, ids), _map_cmd(ins.body, ids, fresh))
        elif t is Spec:
            ins = Spec(_map_cmd(ins.body, ids, fresh))
        out.append(ins)
    return tuple(out)


def _explicit_labels(c: tuple, acc: list) -> None:
    for ins in c:
        lbl = getattr(ins, "label", None)
        if lbl is not None:
            acc.append(lbl)
        for sub in sub_cmds(ins):
            _explicit_labels(sub, acc)


def _label_source(taken: set):
    counter = [0]

    def fresh():
        while True:
            counter[0] += 1
            name = f"l{counter[0]}"
            if name not in taken:
                taken.add(name)
                return name

    return fresh


def parse_system(text: str, validate: bool = True) -> System:
    raw = Parser(text).system()
    explicit: list = []
    for _, c in raw.commands():
        _explicit_labels(c, explicit)
    dups = sorted({lbl for lbl in explicit if explicit.count(lbl) > 1})
    if dups:
        raise ParseError(f"duplicate label(s): {', '.join(dups)}")
    ids = set(raw.ids)
    fresh = _label_source(set(explicit))
    procs = tuple(ProcDecl(p.name, p.kernel, _map_cmd(p.body, ids, fresh)) for p in raw.procs)
    syscalls = tuple(SyscallDecl(s.name, s.params, s.caps, _map_cmd(s.body, ids, fresh))
                     for s in raw.syscalls)
    sys = System(raw.arrays, procs, syscalls, raw.kappa_u, raw.kappa_k)
    if validate:
        rep = validate_system(sys)
        if not rep.ok:
            raise ParseError(f"invalid system: {rep}")
    else:
        rep = label_check(sys)
        if not rep.ok:
            raise ParseError(str(rep))
    return sys


def parse_attacker(text: str, sys: System | None = None) -> tuple:
    """Parse an attacker program; names declared by ``sys`` become identifiers."""
    p = Parser("{" + text + "}")
    prog = p.block(attacker=True)
    if p.tok.kind != "eof":
        p.error("trailing input after attacker program")
    ids = set(sys.ids) if sys is not None else set()
    explicit: list = []
    _explicit_labels(prog, explicit)
    if sys is not None:
        for _, c in sys.commands():
            _explicit_labels(c, explicit)
    fresh = _label_source(set(explicit))
    fresh_a = lambda: "a" + fresh()  # noqa: E731  keep attacker labels apart from victim ones
    return _map_cmd(prog, ids, fresh_a)


def parse_directives(text: str) -> list:
    """Comma/semicolon/space separated directives, e.g. ``branch(l1,true) step bt``."""
    p = Parser(text)
    out = []
    while p.tok.kind != "eof":
        out.append(p.directive())
        p.accept(",") or p.accept(";")
    return out


# ------------------------------------------------------------- printing

_OP_TEXT = {op: sym for level in _BINOPS for sym, op in level.items()}
_OP_LEVEL = {op: k for k, level in enumerate(_BINOPS) for op in level.values()}
_UNARY = len(_BINOPS)
_ATOM = _UNARY + 1


def show_value(v) -> str:
    t = type(v)
    if t is Int:
        return str(v.n)
    if t is Bool:
        return "true" if v.b else "false"
    if t is Null:
        return "null"
    return f"<{v.obs}>"


def _level(e) -> int:
    if type(e) is OpApp:
        return _UNARY if e.op == "not" else _OP_LEVEL[e.op]
    if type(e) is Const and type(e.value) is Int and e.value.n < 0:
        return _UNARY
    return _ATOM


def show_expr(e) -> str:
    t = type(e)
    if t is Const:
        return show_value(e.value)
    if t is Reg or t is Ident:
        return e.name
    if e.op == "not":
        inner = e.args[0]
        s = show_expr(inner)
        return "!" + (s if _level(inner) >= _UNARY else f"({s})")
    lvl = _OP_LEVEL[e.op]
    left, right = e.args
    ls, rs = show_expr(left), show_expr(right)
    if _level(left) < lvl:
        ls = f"({ls})"
    if _level(right) <= lvl:
        rs = f"({rs})"
    return f"{ls} {_OP_TEXT[e.op]} {rs}"


def _args(args) -> str:
    return "(" + ", ".join(show_expr(a) for a in args) + ")"


def show_instr(ins) -> str:
    """One-line rendering (nested blocks elided)."""
    t = type(ins)
    if t is Skip:
        return "skip;"
    if t is Fence:
        return "fence;"
    if t is Assign:
        return f"{ins.reg} := {show_expr(ins.expr)};"
    if t is Load:
        return f"load {ins.reg} <- {show_expr(ins.addr)} @{ins.label};"
    if t is Store:
        return f"store {show_expr(ins.addr)} -> {show_expr(ins.value)};"
    if t is Call:
        return f"call {show_expr(ins.target)}{_args(ins.args)};"
    if t is Syscall:
        return f"syscall {ins.name}{_args(ins.args)};"
    if t is If:
        return f"if {show_expr(ins.cond)} @{ins.label} {{..}} else {{..}}"
    if t is While:
        return f"while {show_expr(ins.cond)} @{ins.label} {{..}}"
    if t is Poison:
        return f"poison {ins.directive};"
    if t is Observe:
        return f"{ins.reg} := observe;"
    if t is Spec:
        return "spec {..}"
    raise TypeError(ins)


def show_cmd(c: tuple, indent: int = 0) -> str:
    pad = "  " * indent
    lines = []
    for ins in c:
        t = type(ins)
        if t is If:
            lines.append(f"{pad}if {show_expr(ins.cond)} @{ins.label} {{")
            lines.append(show_cmd(ins.then, indent + 1))
            lines.append(f"{pad}}} else {{")
            lines.append(show_cmd(ins.orelse, indent + 1))
            lines.append(f"{pad}}}")
        elif t is While:
            lines.append(f"{pad}while {show_expr(ins.cond)} @{ins.label} {{")
            lines.append(show_cmd(ins.body, indent + 1))
            lines.append(f"{pad}}}")
        elif t is Spec:
            lines.append(f"{pad}spec {{")
            lines.append(show_cmd(ins.body, indent + 1))
            lines.append(f"{pad}}}")
        else:
            lines.append(pad + show_instr(ins))
    return "\n".join(line for line in lines if line)


def show_system(sys: System) -> str:
    out = ["system {"]
    for a in sys.arrays:
        space = "kernel" if a.kernel else "user"
        init = ""
        if a.init:
            init = " = [" + ", ".join(show_value(v) for v in a.init) + "]"
        out.append(f"  {space} array {a.name}[{a.size}]{init};")
    for p in sys.procs:
        space = "kernel" if p.kernel else "user"
        out.append(f"  {space} proc {p.name}() {{")
        out.append(show_cmd(p.body, 2))
        out.append("  }")
    for s in sys.syscalls:
        caps = ", ".join(sorted(s.caps))
        out.append(f"  syscall {s.name}({', '.join(s.params)}) caps {{{caps}}} {{")
        out.append(show_cmd(s.body, 2))
        out.append("  }")
    out.append(f"  space user {sys.kappa_u} kernel {sys.kappa_k};")
    out.append("}")
    return "\n".join(line for line in out if line) + "\n"


def show_attacker(prog: tuple) -> str:
    return show_cmd(prog) + "\n"


def show_directives(ds) -> str:
    return " ".join(str(d) for d in ds)
