"""Named example systems and attacker programs."""
from __future__ import annotations

from functools import lru_cache

from .syntax import parse_attacker, parse_system

_MSG_TEMPLATE = """
system {
  user array umsg[2];
  kernel array buf[4];
  kernel array secret[2] = [42, 7];
  kernel proc nwcr4() { skip; }
  kernel proc notify() { skip; }
  syscall recv(x1, x2) caps {buf} {
    if VALID @v_recv {
      load ret <- buf + x1 * 2 + x2 @ld_recv;
    } else {
      ret := 0;
    }
  }
  syscall send(x1, x2, x3) caps {buf, notify} {
    if VALID @v_send {
      store buf + x1 * 2 + x2 -> x3;
      load cb <- buf + 2 @ld_hook;
      if cb != null @v_hook {
        call cb(x1, x2);
      } else {
        skip;
      }
    } else {
      skip;
    }
    ret := 0;
  }
  space user 4 kernel 16;
}
"""

# message passing: one socket of two slots, callback hook at buf[2]
MSG_SAFE = _MSG_TEMPLATE.replace("VALID", "0 <= x1 && x1 < 1 && 0 <= x2 && x2 < 2")
# the bounds check on the slot index is missing
MSG_VULN = _MSG_TEMPLATE.replace("VALID", "0 <= x1 && x1 < 1")

SCOPE = """
system {
  kernel array a[1];
  kernel proc f() { skip; }
  syscall s1() caps {a, f} { store a -> f; }
  syscall s2() caps {a} { load x <- a @ld_s2; call x(); }
  space user 2 kernel 4;
}
"""

PROBE = """
system {
  kernel array tbl[1];
  kernel array cfg[1];
  kernel proc f1() { skip; }
  kernel proc f2() { skip; }
  syscall probe(x1) caps {tbl, cfg} {
    load t <- tbl @ld_tbl;
    load c <- cfg @ld_cfg;
    call x1();
  }
  space user 4 kernel 10;
}
"""

LEAK = """
system {
  kernel proc nwcr4() { skip; }
  syscall sc_leak(x1) caps {nwcr4} {
    if x1 == nwcr4 @leak {
      i := 0;
      while i < 4 @spin { i := i + 1; }
    } else {
      skip;
    }
    ret := 0;
  }
  space user 2 kernel 4;
}
"""

FF = """
system {
  kernel proc f() { skip; }
  syscall s() caps {f} { call f(); }
  space user 2 kernel 4;
}
"""

RETF = """
system {
  kernel proc f() { skip; }
  syscall leakf() caps {f} { ret := f; }
  syscall zero() caps {} { ret := 0; }
  space user 2 kernel 6;
}
"""

TINY = """
system {
  kernel array k[1];
  syscall calc(x1) caps {} {
    if x1 < 3 @c {
      ret := x1 + 1;
    } else {
      ret := 0;
    }
  }
  space user 2 kernel 3;
}
"""

SOURCES = {
    "s_msg": MSG_SAFE,
    "s_msg_vuln": MSG_VULN,
    "s_scope": SCOPE,
    "s_probe": PROBE,
    "s_leak": LEAK,
    "s_ff": FF,
    "s_retf": RETF,
    "s_tiny": TINY,
}


@lru_cache(maxsize=None)
def system(name: str):
    try:
        return parse_system(SOURCES[name])
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; known: {', '.join(SOURCES)}") from None


# attacker programs ------------------------------------------------------

SCOPE_ATTACK = "syscall s1(); syscall s2();"


def probe_attack(address: int) -> str:
    """Call the probing gadget on a guessed kernel address."""
    return f"syscall probe({address});"


def speculative_probe(offset: int) -> str:
    """Mistrain the bounds check of recv, then read the result of the side channel."""
    return (
        "poison branch(v_recv, true);\n"
        f"spec {{ syscall recv(1, {offset}); }}\n"
        "x := observe;\n"
    )


def attacker(src: str, sys_name: str):
    return parse_attacker(src, system(sys_name))
