from fractions import Fraction

import pytest

from speckernel import analysis as A
from speckernel import fixtures
from speckernel.classic import Machine
from speckernel.lang import NULL, TRUE, Int, ObsVal
from speckernel.layout import SlotScheme, default_layout, enumerate_layouts
from speckernel.speculative import MemObs
from speckernel.syntax import parse_directives
from speckernel.transform import fence_system


def test_values_json_round_trip():
    for v in (Int(-3), TRUE, NULL):
        assert A.value_from_json(A.value_to_json(v)) == v
    assert A.value_to_json(ObsVal(MemObs(4))) == {"observation": "mem 4"}


def test_vector_json_and_store():
    sys = fixtures.system("s_msg")
    v = A.Vector((Int(1), NULL), (("buf", 2, Int(9)),))
    assert A.Vector.from_json(v.to_json()) == v
    assert v.store(sys).array("buf")[2] == Int(9)
    assert v.regs().get("x1") == Int(1)


def test_default_vectors_respect_budget_and_arity():
    sys = fixtures.system("s_msg")
    vs = A.default_vectors(sys, "send", budget=40)
    assert 0 < len(vs) <= 40 and len(set(vs)) == len(vs)
    assert all(len(v.args) == 3 for v in vs)


def test_verdict_exit_codes():
    assert [A.Verdict(s, "r").exit_code for s in (A.HOLDS, A.VIOLATED, A.UNKNOWN)] == [0, 1, 2]


def test_layout_ni_retf():
    sys = fixtures.system("s_retf")
    lays = list(enumerate_layouts(sys))
    v = A.check_layout_ni(sys, "leakf", lays)
    assert v.status == A.VIOLATED and v.witness["kind"] == "ni"
    a, b = v.witness["outcomes"]
    assert a != b
    assert A.check_layout_ni(sys, "zero", lays).status == A.HOLDS


def test_layout_ni_probe_errors_are_equivalent():
    # Err and Unsafe are identified, so probing every address is still non-interfering
    sys = fixtures.system("s_probe")
    lays = A.layouts_for(sys, samples=30, seed=1)
    assert A.check_layout_ni(sys, "probe", lays).status == A.HOLDS


def test_slni_ff_witness_replays():
    sys = fixtures.system("s_ff")
    v = A.check_slni(sys, "s", list(enumerate_layouts(sys)), depth=4)
    assert v.status == A.VIOLATED
    w = v.witness
    lay1, lay2 = (A.Layout(d) for d in w["layouts"])
    r1, r2 = A.replay_slni(sys, "s", lay1, lay2, A.Vector.from_json(w["vector"]),
                           parse_directives(" ".join(w["directives"])))
    assert A.slni_differs(r1, r2)


def test_slni_leak_via_branch():
    sys = fixtures.system("s_leak")
    v = A.check_slni(sys, "sc_leak", list(enumerate_layouts(sys)), depth=4)
    assert v.status == A.VIOLATED
    assert any(o.startswith("branch") for side in v.witness["observations"] for o in side)


def test_slni_tiny_holds():
    sys = fixtures.system("s_tiny")
    assert A.check_slni(sys, "calc", list(enumerate_layouts(sys)), depth=6).status == A.HOLDS


def test_slni_node_cap_gives_unknown():
    sys = fixtures.system("s_tiny")
    v = A.check_slni(sys, "calc", list(enumerate_layouts(sys)), depth=6, node_cap=5)
    assert v.status == A.UNKNOWN


def test_search_finds_transient_read():
    sys = fixtures.system("s_msg_vuln")
    v = A.directive_search(sys, "recv", depth=8)
    assert v.status == A.VIOLATED
    w = v.witness
    assert w["kind"] == "search" and any(d.startswith("branch(v_recv") for d in w["directives"])
    out = A.replay_search(sys, w)
    assert out is not None


def test_bounds_check_alone_does_not_stop_speculation():
    # s_msg is architecturally safe, but a mistrained check still reads out of bounds
    safe = fixtures.system("s_msg")
    assert A.search_all(safe, depth=8).status == A.VIOLATED
    assert A.search_all(fence_system(safe), depth=8).status == A.HOLDS
    assert A.search_all(fence_system(fixtures.system("s_msg_vuln")), depth=8).status == A.HOLDS


def test_architectural_unsafes_only_count_when_asked():
    sys = fixtures.system("s_probe")
    lay = default_layout(sys)
    vecs = [A.Vector((Int(lay["f1"]),))]
    assert A.directive_search(sys, "probe", depth=6, vectors=vecs).status == A.HOLDS
    assert A.directive_search(sys, "probe", depth=6, vectors=vecs,
                              include_architectural=True).status == A.VIOLATED


def test_imposes_sks():
    assert A.check_imposes_sks(fence_system(fixtures.system("s_msg")), depth=8).status == A.HOLDS
    assert A.check_imposes_sks(fixtures.system("s_msg_vuln"), depth=8).status == A.VIOLATED


def test_buffer_seeds_cover_kernel_cells():
    sys = fixtures.system("s_probe")
    seeds = A.buffer_seeds(sys, default_layout(sys))
    assert seeds[0] == () and len(seeds) == 1 + 2 * sys.kappa_k


def test_experiment_is_deterministic_and_parallel_safe():
    sys = fixtures.system("s_probe")
    prog = fixtures.attacker(fixtures.probe_attack(4), "s_probe")
    r1 = A.estimate_unsafe_probability(sys, prog, trials=400, seed=3)
    r2 = A.estimate_unsafe_probability(sys, prog, trials=400, seed=3, jobs=3)
    assert r1.to_json() == r2.to_json()
    assert r1.unsafe + r1.err + r1.done == 400
    assert r1.bound == Fraction(1, 4) and r1.within_bound
    assert r1.first_unsafe_trial is not None
    lay, res = A.experiment_trial(sys, prog, SlotScheme.for_system(sys), 3,
                                  r1.first_unsafe_trial, 1000)
    assert type(res.outcome).__name__ == "Unsafe"
    assert 4 in (lay["f1"], lay["f2"])


def test_estimate_delta_exact():
    d = A.estimate_delta(fixtures.system("s_probe"), trials=2000, seed=1)
    row = d["per_syscall"]["probe"]
    assert d["bound"] == "3/4" and row["exact"] == "3/4"
    assert abs(row["estimate"] - 0.75) <= row["tolerance_3sigma"]


@pytest.mark.parametrize("name", sorted(fixtures.SOURCES))
def test_step_equivalence_on_fixture_vectors(name):
    sys = fixtures.system(name)
    progs = [(sys.body(sc.name), v.regs(), sc.name)
             for sc in sys.syscalls for v in A.default_vectors(sys, sc.name)[:20]]
    assert A.check_step_equivalence(sys, default_layout(sys), progs) == []


def test_backtrack_elimination_on_speculative_probe_entry():
    sys = fixtures.system("s_msg_vuln")
    m = Machine(sys, default_layout(sys))
    e = A.Entry(A.Vector((Int(1), Int(1))))
    r = A.check_backtrack_elimination(m, A.entry_state(m, "recv", e), bound=12)
    assert r["missing"] == [] and r["nodes"] > 0 and r["reachable_bottom_tops"] >= 1
