import pytest

from speckernel import analysis as A
from speckernel import fixtures
from speckernel.gen import random_system, rng_for
from speckernel.lang import (
    FENCE, Assign, Call, Const, Fence, If, Int, Load, Store, While, walk,
)
from speckernel.syntax import parse_system, show_system
from speckernel.transform import (
    check_sem_preservation, collapse_fences, count_fences, erase_fences, fence_cmd,
    fence_coalesced, fence_counts, fence_system,
)

EXAMPLE = parse_system("""
system {
  kernel array a[2];
  kernel proc f() { skip; }
  syscall s(x1) caps {a, f} {
    load r <- a @l1;
    store a + 1 -> r;
    if r == 0 @l2 { call f(); } else { while x1 < 2 @l3 { x1 := x1 + 1; } }
    call r();
  }
  space user 1 kernel 4;
}
""")
BODY = EXAMPLE.body("s")


def test_fence_before_every_access():
    out = fence_cmd(BODY)
    for c in [out, out[4].then, out[4].orelse]:
        for i, ins in enumerate(c):
            if type(ins) in (Load, Store, Call):
                assert i > 0 and type(c[i - 1]) is Fence
    assert count_fences(out) == 4


def test_erase_recovers_the_input():
    for i in range(200):
        sys = random_system(rng_for(7, i))
        for sc in sys.syscalls:
            # random bodies may contain fences of their own
            assert erase_fences(fence_cmd(sc.body)) == erase_fences(sc.body)
            assert erase_fences(fence_coalesced(sc.body)) == erase_fences(sc.body)
    assert erase_fences(fence_cmd(BODY)) == BODY


def test_not_idempotent_unless_normalized():
    once = fence_cmd(BODY)
    twice = fence_cmd(once)
    assert twice != once and count_fences(twice) == 2 * count_fences(once)
    assert collapse_fences(twice) == once


def test_coalesced_variant():
    out = fence_coalesced(BODY)
    # one fence for the load/store run, none before the direct call, one before call r()
    assert out[:3] == (FENCE, BODY[0], BODY[1])
    assert not any(type(x) is Fence for x in out[3].then)
    assert out[-2:] == (FENCE, BODY[-1])


def test_user_code_untouched_and_skip():
    src = ("system { user array u[1]; user proc up() { load r <- u; } kernel array a[1]; "
           "syscall s() caps {a} { load r <- a; } syscall t() caps {a} { store a -> 1; } "
           "space user 2 kernel 2; }")
    sys = parse_system(src)
    out = fence_system(sys, skip=("t",))
    assert out.proc_decl["up"].body == sys.proc_decl["up"].body
    assert out.body("t") == sys.body("t")
    assert count_fences(out.body("s")) == 1
    assert fence_counts(sys, out) == {"proc up": 0, "syscall s": 1, "syscall t": 0}


def test_transformed_system_stays_valid_and_prints():
    for name in fixtures.SOURCES:
        out = fence_system(fixtures.system(name))
        assert parse_system(show_system(out)) == out


@pytest.mark.parametrize("name", ["s_msg", "s_msg_vuln", "s_scope", "s_probe"])
def test_semantics_preserved(name):
    v = check_sem_preservation(fixtures.system(name), trials=300)
    assert v.status == A.HOLDS, v.witness


def _deep(fn):
    """Apply an instruction rewrite at every nesting level."""
    def go(c):
        out = []
        for x in c:
            if type(x) is If:
                x = If(x.label, x.cond, go(x.then), go(x.orelse))
            elif type(x) is While:
                x = While(x.label, x.cond, go(x.body))
            out.extend(fn(x))
        return tuple(out)
    return go


def _mutate(sys, fn):
    return sys.with_bodies(syscalls={s.name: _deep(fn)(fence_cmd(s.body)) for s in sys.syscalls})


def test_broken_transforms_are_caught():
    sys = fixtures.system("s_msg")

    def zero_loads(x):
        return [Assign(x.reg, Const(Int(0)))] if type(x) is Load else [x]

    def drop_stores(x):
        return [] if type(x) is Store else [x]

    def swap_branches(x):
        return [If(x.label, x.cond, x.orelse, x.then) if type(x) is If else x]

    def ret_one(x):
        return [Assign("ret", Const(Int(1)))] if x == Assign("ret", Const(Int(0))) else [x]

    for mutant in (zero_loads, drop_stores, swap_branches, ret_one):
        v = check_sem_preservation(sys, trials=1000, transformed=_mutate(sys, mutant))
        assert v.status == A.VIOLATED, mutant.__name__
        assert v.witness["kind"] == "semantics"


def test_fences_remove_transient_observation():
    sys = fixtures.system("s_msg_vuln")
    out = fence_system(sys)
    assert A.directive_search(sys, "recv", depth=8).status == A.VIOLATED
    assert A.directive_search(out, "recv", depth=8).status == A.HOLDS
    assert A.check_imposes_sks(fence_system(fixtures.system("s_msg")), depth=8).status == A.HOLDS


def test_every_access_in_fixtures_is_fenced():
    for name in fixtures.SOURCES:
        out = fence_system(fixtures.system(name))
        for _, c in out.commands():
            n_access = sum(1 for x in walk(c) if type(x) in (Load, Store, Call))
            assert count_fences(c) >= n_access
