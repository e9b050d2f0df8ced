"""Named end-to-end scenarios, each with the outcome it must reproduce."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from . import fixtures
from .commands import Job, Result, execute
from .layout import default_layout
from .syntax import show_system
from .transform import fence_system


@dataclass(frozen=True)
class Scenario:
    name: str
    about: str
    command: str
    system: str
    expected_exit: int
    attacker: Optional[str] = None
    params: dict = field(default_factory=dict)
    seed: int = 0
    fenced: bool = False
    # extra assertion over the report; returns an error message or None
    check: Optional[Callable[[dict], Optional[str]]] = None

    def job(self) -> Job:
        sys = fixtures.system(self.system)
        if self.fenced:
            src, name = show_system(fence_system(sys)), f"{self.system}+fences"
        else:
            src, name = fixtures.SOURCES[self.system], self.system
        return Job(self.command, src, name, self.attacker, dict(self.params), self.seed)


def _last_rule_is(rule):
    def check(rep):
        got = rep["details"].get("last_rule")
        return None if got == rule else f"last rule {got!r}, expected {rule!r}"
    return check


def _witness_obs_kind(prefix):
    def check(rep):
        obs = rep["verdict"]["witness"]["observations"]
        if any(o.startswith(prefix) for side in obs for o in side):
            return None
        return f"no {prefix!r} observation in the witness"
    return check


def _has_memobs(addr):
    def check(rep):
        return None if f"mem {addr}" in rep["observations"] else f"no observation of {addr}"
    return check


def _msg_addresses():
    lay = default_layout(fixtures.system("s_msg_vuln"))
    return lay["buf"], lay["secret"]


_BUF, _SECRET = _msg_addresses()

SCENARIOS = {s.name: s for s in [
    Scenario("scope-extrusion",
             "one syscall plants a procedure address in a shared array, "
             "another calls through it outside its capabilities",
             "run", "s_scope", 1, fixtures.SCOPE_ATTACK, {"trace": True},
             check=_last_rule_is("Call-Unsafe")),
    Scenario("failed-probe",
             "probing an unallocated kernel address crashes with an error, not a violation",
             "run", "s_probe", 0, fixtures.probe_attack(8), {"trace": True},
             check=lambda rep: None if rep["outcome"]["kind"] == "Err" else "expected Err"),
    Scenario("probe-experiment",
             "unsafe probability of a single-address prober under slot randomization "
             "stays below one minus delta",
             "experiment", "s_probe", 0, fixtures.probe_attack(4),
             {"trials": 10_000, "fuel": 1000}, seed=7),
    Scenario("layout-leak-ni",
             "a syscall returning a procedure address is not layout non-interfering",
             "check-ni", "s_retf", 1, params={"syscalls": ["leakf"]}),
    Scenario("ff-slni",
             "a direct call leaks the callee address through the jump observation",
             "check-slni", "s_ff", 1, params={"depth": 4},
             check=_witness_obs_kind("jmp")),
    Scenario("sc-leak-slni",
             "comparing an argument with a kernel address leaks through the branch observation",
             "check-slni", "s_leak", 1, params={"depth": 4},
             check=_witness_obs_kind("branch")),
    Scenario("tiny-slni",
             "a syscall that never touches memory is speculatively layout non-interfering",
             "check-slni", "s_tiny", 0, params={"depth": 6}),
    Scenario("speculative-probe",
             "mistrained bounds check: the transient load of an allocated cell shows up "
             "as a memory observation while the run itself finishes normally",
             "run", "s_msg_vuln", 0, fixtures.speculative_probe(1), {"trace": True},
             check=_has_memobs(_BUF + 3)),
    Scenario("msg-vuln-search",
             "directive search rediscovers the transient out-of-capability read",
             "search", "s_msg_vuln", 1, params={"depth": 8}),
    Scenario("msg-fenced-search",
             "after fence insertion only architectural violations remain",
             "search", "s_msg_vuln", 0, params={"depth": 8}, fenced=True),
    Scenario("fence-pipeline",
             "fence insertion on the bounds-checked message system preserves user-visible "
             "behaviour, imposes speculative safety and removes the transient observation",
             "pipeline", "s_msg", 0, fixtures.speculative_probe(0),
             {"trials": 1000, "fuel": 500, "depth": 8}),
]}


def run_scenario(name: str, argv=None, jobs: int = 1) -> tuple[Result, list]:
    """Execute a scenario; returns the result and a list of failed expectations."""
    sc = SCENARIOS[name]
    job = sc.job()
    job.jobs = jobs
    res = execute(job, argv)
    problems = []
    if res.exit_code != sc.expected_exit:
        problems.append(f"exit code {res.exit_code}, expected {sc.expected_exit}")
    if sc.check is not None:
        msg = sc.check(res.report)
        if msg:
            problems.append(msg)
    res.report["details"] = {**(res.report["details"] or {}),
                             "scenario": {"name": sc.name, "about": sc.about,
                                          "expected_exit": sc.expected_exit,
                                          "as_expected": not problems, "problems": problems}}
    return res, problems
