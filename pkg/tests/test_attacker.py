from speckernel import classic, fixtures
from speckernel.attacker import attacker_run
from speckernel.classic import Machine
from speckernel.gen import random_system, rng_for, user_program
from speckernel.lang import NULL, Int, ObsVal, Regs
from speckernel.layout import default_layout
from speckernel.speculative import MemObs
from speckernel.syntax import parse_attacker

MSG = fixtures.system("s_msg_vuln")
LAY = default_layout(MSG)
M = Machine(MSG, LAY)


def run(src, m=M, **kw):
    return attacker_run(m, parse_attacker(src, m.sys), keep_rules=True, **kw)


def test_observe_pops_newest_observation_then_ends():
    r = run("spec { syscall recv(0, 1); } a := observe; b := observe; c := observe; "
            "d := observe; e := observe;")
    assert r.rules.count("Observe") >= 2 and "Observe-End" in r.rules
    first = r.regs.get("a")
    assert isinstance(first, ObsVal)
    assert r.regs.get("e") == NULL
    assert MemObs(LAY["buf"] + 1) in [v.obs for v in (r.regs.get(x) for x in "abcd")
                                       if isinstance(v, ObsVal)]


def test_observe_on_empty_stack():
    r = run("x := observe;")
    assert r.rules == ["Observe-End"] and r.regs.get("x") == NULL


def test_speculative_probe_runs_to_completion():
    r = run(fixtures.speculative_probe(1))
    assert isinstance(r.outcome, classic.Done) and r.outcome.value == NULL
    assert MemObs(LAY["buf"] + 3) in r.log
    assert r.residual_ds == ()
    assert "Spec-D" in r.rules and "Spec-BT" in r.rules and "Spec-Term" in r.rules


def test_unconsumed_poison_stays_pending():
    r = run("poison branch(v_send, true); spec { syscall recv(0, 0); }")
    assert isinstance(r.outcome, classic.Done) and len(r.residual_ds) == 1


def test_transient_unsafe_ends_the_run():
    r = run("poison branch(v_recv, true); spec { syscall recv(1, 2); }")
    assert isinstance(r.outcome, classic.Unsafe)
    assert r.rules[-1] == "Spec-Unsafe"


def test_spec_commits_flushed_memory():
    r = run("spec { syscall send(0, 1, 5); } syscall recv(0, 1);")
    assert r.outcome.value == Int(5)
    assert r.outcome.store.array("buf")[1] == Int(5)


def test_attacker_agrees_with_classic_without_speculation():
    checked = 0
    for i in range(500):
        rng = rng_for(21, i)
        sys = random_system(rng)
        lay = default_layout(sys)
        prog = user_program(rng, sys)
        want = classic.eval_cmd(sys, lay, prog, Regs(), None, fuel=300)
        got = attacker_run(Machine(sys, lay), prog, fuel=300).outcome
        assert got == want, (i, prog)
        checked += 1
    assert checked == 500
