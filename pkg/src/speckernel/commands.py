"""Command executors: each turns (system, attacker, params, seed) into a report.

The CLI, the scenario library and replay all go through ``execute`` so that
a report carries everything needed to run it again.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import analysis as A
from . import classic
from .attacker import attacker_run, check_unprivileged
from .classic import Machine
from .layout import (
    Layout, SlotScheme, default_layout, enumerate_layouts, sample_slot_layout, trial_rng,
    validate_layout,
)
from .report import make_report, system_entry
from .syntax import parse_attacker, parse_system, show_system
from .lang import StructuralError
from .system import System
from .transform import check_sem_preservation, fence_counts, fence_system


class UsageError(Exception):
    """Bad parameters; the CLI maps it to exit code 3."""


@dataclass
class Job:
    command: str
    system_source: str
    system_name: Optional[str] = None
    attacker_source: Optional[str] = None
    params: dict = field(default_factory=dict)
    seed: int = 0
    jobs: int = 1  # parallelism only; never changes results


@dataclass
class Result:
    report: dict
    exit_code: int
    extra: dict = field(default_factory=dict)  # unserialized objects for figures


OUTCOME_EXIT = {"Done": 0, "Err": 0, "Unsafe": 1, "FuelExhausted": 2, "Stuck": 2}


def _system(job: Job) -> System:
    return parse_system(job.system_source)


def _attacker(job: Job, sys: System):
    if job.attacker_source is None:
        raise UsageError("this command needs an attacker program")
    prog = parse_attacker(job.attacker_source, sys)
    check_unprivileged(sys, prog)
    return prog


def _syscalls(sys: System, names) -> list:
    if not names:
        return [s.name for s in sys.syscalls]
    for n in names:
        if n not in sys.syscall_decl:
            raise UsageError(f"unknown system call {n!r}")
    return list(names)


def _merge(verdicts: dict, regime: str) -> A.Verdict:
    """First violation wins, then the first unknown; evidence is kept per syscall."""
    per = {s: v.evidence for s, v in verdicts.items()}
    for status in (A.VIOLATED, A.UNKNOWN):
        for v in verdicts.values():
            if v.status == status:
                return A.Verdict(status, v.regime, {"per_syscall": per}, v.witness, v.reason)
    regimes = {v.regime for v in verdicts.values()}
    return A.Verdict(A.HOLDS, regimes.pop() if len(regimes) == 1 else regime,
                     {"per_syscall": per})


def _layout_from_params(sys: System, params: dict, seed: int) -> Layout:
    if params.get("layout") is not None:
        lay = Layout(params["layout"])
        rep = validate_layout(lay, sys)
        if not rep.ok:
            raise UsageError(f"invalid layout: {rep}")
        return lay
    if params.get("sample"):
        return sample_slot_layout(SlotScheme.for_system(sys), sys, trial_rng(seed, 0))
    return default_layout(sys)


def _layouts_for_check(sys: System, params: dict, seed: int):
    samples = params.get("samples", 0)
    if samples:
        scheme = SlotScheme.for_system(sys)
        lays = [sample_slot_layout(scheme, sys, trial_rng(seed, i)) for i in range(samples)]
        return list(dict.fromkeys(lays)), f"{samples} sampled slot layouts"
    return list(enumerate_layouts(sys, params.get("enumerate_bound", 100_000))), \
        "all layouts enumerated"


# ------------------------------------------------------------ executors


def run_cmd(job: Job) -> Result:
    sys = _system(job)
    prog = _attacker(job, sys)
    p = job.params
    lay = _layout_from_params(sys, p, job.seed)
    res = attacker_run(Machine(sys, lay), prog, fuel=p.get("fuel", 10_000),
                       keep_rules=p.get("trace", False))
    kind = classic.outcome_kind(res.outcome)
    outcome = A.outcome_json(res.outcome)
    details = {"residual_directives": [str(d) for d in res.residual_ds]}
    if p.get("trace"):
        details["trace"] = res.rules
        details["last_rule"] = res.rules[-1] if res.rules else None
    code = OUTCOME_EXIT[kind]
    rep = make_report("run", layouts=[lay.to_json()], outcome=outcome,
                      observations=[str(o) for o in res.log], details=details)
    return Result(rep, code, {"log": res.log})


def check_ni_cmd(job: Job) -> Result:
    sys = _system(job)
    p = job.params
    lays, regime = _layouts_for_check(sys, p, job.seed)
    verdicts = {}
    for s in _syscalls(sys, p.get("syscalls")):
        vecs = A.default_vectors(sys, s, p.get("budget", 256))
        verdicts[s] = A.check_layout_ni(sys, s, lays, vecs, p.get("fuel", 1000), regime)
    v = _merge(verdicts, regime)
    rep = make_report("check-ni", layouts=_witness_layouts(v), verdict=v.to_json(),
                      details={"layouts_considered": len(lays)})
    return Result(rep, v.exit_code)


def check_slni_cmd(job: Job) -> Result:
    sys = _system(job)
    p = job.params
    lays, regime = _layouts_for_check(sys, p, job.seed)
    verdicts = {}
    for s in _syscalls(sys, p.get("syscalls")):
        vecs = A.default_vectors(sys, s, p.get("budget", 256))
        verdicts[s] = A.check_slni(sys, s, lays, p.get("depth", 6), vecs,
                                   p.get("node_cap", 200_000), regime)
    v = _merge(verdicts, regime)
    w = v.witness or {}
    rep = make_report("check-slni", layouts=_witness_layouts(v), verdict=v.to_json(),
                      directives=w.get("directives", []),
                      details={"layouts_considered": len(lays)})
    return Result(rep, v.exit_code)


def _witness_layouts(v: A.Verdict) -> list:
    w = v.witness or {}
    if "layouts" in w:
        return w["layouts"]
    if "layout" in w:
        return [w["layout"]]
    return []


def estimate_delta_cmd(job: Job) -> Result:
    sys = _system(job)
    p = job.params
    scheme = SlotScheme.for_system(sys)
    try:
        scheme.check(sys)
    except StructuralError as e:
        raise UsageError(str(e)) from None
    est = A.estimate_delta(sys, scheme, p.get("trials", 10_000), job.seed, p.get("address"))
    ok = True
    for row in est["per_syscall"].values():
        est_p, tol = row["estimate"], row["tolerance_3sigma"]
        if est_p is not None and est_p + tol < est["bound_float"]:
            ok = False
    status = A.HOLDS if ok else A.VIOLATED
    v = A.Verdict(status, f"Monte Carlo, {p.get('trials', 10_000)} slot layouts",
                  {"delta_bound": est["bound"], "min_estimate": est["min_estimate"]},
                  None if ok else {"kind": "delta", "estimate": est})
    rep = make_report("estimate-delta", verdict=v.to_json(), details=est)
    return Result(rep, v.exit_code, {"delta": est})


def default_probe_attacker(sys: System) -> str:
    """Call the first syscall taking arguments with the lowest kernel address."""
    for s in sys.syscalls:
        if s.params:
            args = [str(sys.kappa_u)] + ["0"] * (len(s.params) - 1)
            return f"syscall {s.name}({', '.join(args)});\n"
    raise UsageError("no system call takes an argument; pass --attacker")


def experiment_cmd(job: Job) -> Result:
    sys = _system(job)
    if job.attacker_source is None:
        job.attacker_source = default_probe_attacker(sys)
    prog = _attacker(job, sys)
    p = job.params
    scheme = SlotScheme.for_system(sys)
    try:
        scheme.check(sys)
    except StructuralError as e:
        raise UsageError(str(e)) from None
    res = A.estimate_unsafe_probability(sys, prog, scheme, p.get("trials", 10_000),
                                        p.get("fuel", 1000), job.seed, job.jobs)
    exp = res.to_json()
    exp["delta"] = float(1 - res.bound)
    exp["delta_exact"] = str(1 - res.bound)
    if res.trials == 0:
        v = A.Verdict(A.UNKNOWN, "Monte Carlo, 0 trials", reason="no trials run")
    else:
        within = res.within_bound
        witness = None
        if res.first_unsafe_trial is not None:
            lay, _ = A.experiment_trial(sys, prog, scheme, job.seed, res.first_unsafe_trial,
                                        p.get("fuel", 1000))
            witness = {"kind": "trial", "trial": res.first_unsafe_trial, "seed": job.seed,
                       "layout": lay.to_json()}
        v = A.Verdict(A.HOLDS if within else A.VIOLATED,
                      f"Monte Carlo, {res.trials} slot layouts",
                      {"empirical_rate": res.rate, "bound": float(res.bound)}, witness,
                      None if within else "empirical unsafe rate above the bound + 3 sigma")
        if res.fuel_exhausted:
            v.reason = f"{res.fuel_exhausted} trials exhausted fuel"
    rep = make_report("experiment", verdict=v.to_json(), experiment=exp,
                      layouts=_witness_layouts(v))
    return Result(rep, v.exit_code, {"experiment": res})


def _transformed(sys: System, p: dict) -> System:
    t = p.get("transform")
    if t is None:
        return sys
    if t not in ("fence", "coalesced"):
        raise UsageError(f"unknown transform {t!r}")
    return fence_system(sys, coalesced=t == "coalesced", normalize=p.get("normalize", False))


def search_cmd(job: Job) -> Result:
    base = _system(job)
    p = job.params
    sys = _transformed(base, p)
    depth, fuel = p.get("depth", 8), p.get("fuel", 1000)
    names = _syscalls(sys, p.get("syscalls"))
    cap = p.get("node_cap", 200_000)
    if p.get("buffers"):
        v = A.check_imposes_sks(sys, depth, fuel, node_cap=cap, syscalls=names)
    else:
        verdicts = {s: A.directive_search(sys, s, depth, fuel,
                                          node_cap=cap,
                                          include_architectural=p.get("include_architectural",
                                                                      False))
                    for s in names}
        v = _merge(verdicts, f"bounded directive search, depth <= {depth}")
    w = v.witness or {}
    rep = make_report("search", verdict=v.to_json(), layouts=_witness_layouts(v),
                      directives=w.get("directives", []),
                      observations=w.get("observations", []))
    return Result(rep, v.exit_code)


def transform_cmd(job: Job) -> Result:
    sys = _system(job)
    p = job.params
    out = fence_system(sys, coalesced=p.get("coalesced", False), skip=tuple(p.get("skip", ())),
                       normalize=p.get("normalize", False))
    details = {"fences_added": fence_counts(sys, out), "system_out": show_system(out)}
    code = 0
    verdict = None
    if p.get("check"):
        sem = check_sem_preservation(sys, p.get("trials", 1000), p.get("fuel", 500), job.seed,
                                     transformed=out)
        sks = A.check_imposes_sks(out, p.get("depth", 8), p.get("fuel", 500))
        details["semantics"] = sem.to_json()
        details["imposes_safety"] = sks.to_json()
        v = _merge({"semantics": sem, "imposes_safety": sks}, "transform checks")
        verdict = v.to_json()
        code = v.exit_code
    rep = make_report("transform", verdict=verdict, details=details)
    return Result(rep, code, {"system": out})


def pipeline_cmd(job: Job) -> Result:
    """Fence a system, then check semantics preservation, imposed safety and the probe."""
    sys = _system(job)
    p = job.params
    out = fence_system(sys, coalesced=p.get("coalesced", False))
    sem = check_sem_preservation(sys, p.get("trials", 1000), p.get("fuel", 500), job.seed,
                                 transformed=out)
    sks = A.check_imposes_sks(out, p.get("depth", 8), p.get("fuel", 500))
    details = {"fences_added": fence_counts(sys, out), "semantics": sem.to_json(),
               "imposes_safety": sks.to_json()}
    verdicts = {"semantics": sem, "imposes_safety": sks}
    if job.attacker_source is not None:
        prog = _attacker(job, sys)
        lay = default_layout(sys)
        before = attacker_run(Machine(sys, lay), prog)
        after = attacker_run(Machine(out, lay), prog)
        mem_before = sorted({o.addr for o in before.log if type(o).__name__ == "MemObs"})
        mem_after = sorted({o.addr for o in after.log if type(o).__name__ == "MemObs"})
        transient = [a for a in mem_before if a not in mem_after]
        details["probe"] = {"memory_observations_before": mem_before,
                            "memory_observations_after": mem_after,
                            "outcome_before": A.outcome_json(before.outcome),
                            "outcome_after": A.outcome_json(after.outcome),
                            "removed": transient}
        ok = bool(transient) and not any(a not in mem_before for a in mem_after)
        verdicts["probe"] = A.Verdict(A.HOLDS if ok else A.VIOLATED, "fixed layout attacker run",
                                      {"removed": transient},
                                      None if ok else {"kind": "probe", **details["probe"]})
    v = _merge(verdicts, "transform pipeline")
    rep = make_report("pipeline", verdict=v.to_json(), details=details)
    return Result(rep, v.exit_code)


EXECUTORS: dict[str, Callable[[Job], Result]] = {
    "run": run_cmd,
    "check-ni": check_ni_cmd,
    "check-slni": check_slni_cmd,
    "estimate-delta": estimate_delta_cmd,
    "experiment": experiment_cmd,
    "search": search_cmd,
    "transform": transform_cmd,
    "pipeline": pipeline_cmd,
}


def execute(job: Job, argv: Optional[list] = None) -> Result:
    """Run a job and fill in the report fields common to all commands."""
    try:
        fn = EXECUTORS[job.command]
    except KeyError:
        raise UsageError(f"unknown command {job.command!r}") from None
    start = time.perf_counter()
    res = fn(job)
    rep = res.report
    rep["argv"] = list(argv) if argv is not None else None
    rep["params"] = job.params
    rep["seed"] = job.seed
    rep["system"] = system_entry(job.system_name, job.system_source)
    rep["attacker"] = job.attacker_source
    rep["exit_code"] = res.exit_code
    rep["runtime_seconds"] = round(time.perf_counter() - start, 6)
    return res


def job_from_report(rep: dict) -> Job:
    return Job(rep["command"], rep["system"]["source"], rep["system"]["name"], rep["attacker"],
               dict(rep["params"] or {}), rep["seed"] if rep["seed"] is not None else 0)



# ---------------------------------------------------------------- replay


def check_witness(rep: dict) -> Optional[bool]:
    """Re-execute a verdict's witness directly; None when there is nothing to check."""
    v = rep.get("verdict") or {}
    w = v.get("witness")
    if not w:
        return None
    sys = _transformed(parse_system(rep["system"]["source"]), rep.get("params") or {})
    kind = w["kind"]
    if kind == "ni":
        vec = A.Vector.from_json(w["vector"])
        outs = [A.outcome_json(classic.eval_syscall(sys, Layout(lay), w["syscall"], vec.regs(),
                                                    vec.store(sys), w["fuel"]))
                for lay in w["layouts"]]
        return outs == w["outcomes"]
    if kind == "slni":
        from .syntax import parse_directives

        vec = A.Vector.from_json(w["vector"])
        ds = parse_directives(" ".join(w["directives"]))
        r1, r2 = A.replay_slni(sys, w["syscall"], Layout(w["layouts"][0]),
                               Layout(w["layouts"][1]), vec, ds)
        obs = [[str(o) for o in r1.observations], [str(o) for o in r2.observations]]
        return obs == w["observations"] and A.slni_differs(r1, r2)
    if kind == "search":
        run, arch = A.replay_search(sys, w)
        return (run.status == "unsafe" and [str(o) for o in run.observations] == w["observations"]
                and A.outcome_json(arch) == w["architectural"])
    if kind == "trial":
        prog = parse_attacker(rep["attacker"], sys)
        lay, res = A.experiment_trial(sys, prog, SlotScheme.for_system(sys), w["seed"],
                                      w["trial"], (rep.get("params") or {}).get("fuel", 1000))
        return lay.to_json() == w["layout"] and type(res.outcome) is classic.Unsafe
    return None


def replay(rep: dict) -> dict:
    """Run a report's job again and compare; the witness is re-executed on its own too."""
    from .report import stable_view

    again = execute(job_from_report(rep)).report
    old, new = stable_view(rep), stable_view(again)
    for view in (old, new):
        if view.get("details"):
            view["details"] = {k: v for k, v in view["details"].items()
                               if k != "scenario"} or None
    diffs = sorted(k for k in set(old) | set(new) if old.get(k) != new.get(k))
    witness_ok = check_witness(rep)
    return {"reproduced": not diffs and witness_ok is not False, "differences": diffs,
            "witness_reexecuted": witness_ok, "exit_code": again["exit_code"],
            "original_exit_code": rep["exit_code"]}
