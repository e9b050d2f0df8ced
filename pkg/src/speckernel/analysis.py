"""Bounded checkers: layout non-interference, speculative non-interference,
directive search, unsafe-probability experiments and semantic cross-checks."""
from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional

from . import classic
from .attacker import attacker_run
from .classic import ERR, UNSAFE, Frame, Machine, Running, equivalent
from .lang import NULL, Bool, Int, Null, ObsVal, Regs, StructuralError, Value, mk_int, with_args
from .layout import (
    Layout, SlotScheme, all_slot_layouts, count_layouts, default_layout, delta_bound_slots,
    enumerate_layouts, footprint_set, sample_slot_layout, trial_rng,
)
from .speculative import (
    STEP, SErr, SRunning, UNSAFE_STACK, flush, load_candidates, singleton,
    spec_run, spec_step,
)
from .system import Store, System, require_valid, store_update, syscall_refs

HOLDS, VIOLATED, UNKNOWN = "holds", "violated", "unknown"
EXIT_CODES = {HOLDS: 0, VIOLATED: 1, UNKNOWN: 2}


@dataclass
class Verdict:
    status: str
    regime: str
    evidence: dict = field(default_factory=dict)
    witness: Optional[dict] = None
    reason: Optional[str] = None

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.status]

    def to_json(self) -> dict:
        return {"status": self.status, "regime": self.regime, "evidence": self.evidence,
                "witness": self.witness, "reason": self.reason}


# ------------------------------------------------------------- JSON values


def value_to_json(v: Value):
    t = type(v)
    if t is Int:
        return v.n
    if t is Bool:
        return v.b
    if t is Null:
        return None
    if t is ObsVal:
        return {"observation": str(v.obs)}
    raise StructuralError(f"value {v!r} is not serializable")


def value_from_json(x) -> Value:
    if x is None:
        return NULL
    if isinstance(x, bool):
        return Bool(x)
    return mk_int(x)


# --------------------------------------------------------------- vectors


@dataclass(frozen=True)
class Vector:
    """Input to a syscall: argument registers plus array cells overriding the store."""

    args: tuple
    writes: tuple = ()  # (array, index, value)

    def regs(self) -> Regs:
        return with_args(self.args)

    def store(self, sys: System) -> Store:
        st = sys.store
        for name, idx, v in self.writes:
            st = store_update(st, name, idx, v)
        return st

    def to_json(self) -> dict:
        return {"args": [value_to_json(v) for v in self.args],
                "writes": [[n, i, value_to_json(v)] for n, i, v in self.writes]}

    @staticmethod
    def from_json(d: dict) -> "Vector":
        return Vector(tuple(value_from_json(v) for v in d["args"]),
                      tuple((n, i, value_from_json(v)) for n, i, v in d["writes"]))


def kernel_addresses(sys: System) -> range:
    return range(sys.kappa_u, sys.kappa_u + sys.kappa_k)


def _interleave(*seqs):
    its = [iter(s) for s in seqs]
    while its:
        alive = []
        for it in its:
            try:
                yield next(it)
                alive.append(it)
            except StopIteration:
                pass
        its = alive


def default_vectors(sys: System, s: str, budget: int = 256) -> list:
    """Argument sweeps and kernel-address-carrying stores for syscall ``s``.

    One argument at a time ranges over {Null, 0, 1}, every kernel address and
    every offset from a kernel array (under the packed layout) to a kernel
    address; the remaining arguments are 0 or 1.  Store vectors put one
    kernel address into one kernel array cell.
    """
    arity = len(sys.syscall_decl[s].params)
    lay = default_layout(sys)
    pool = [NULL, Int(0), Int(1)] + [Int(a) for a in kernel_addresses(sys)]
    for arr in sys.arrays:
        if arr.kernel:
            pool += [Int(a - lay[arr.name]) for a in kernel_addresses(sys)]
    pool = list(dict.fromkeys(pool))
    base = [Vector((Int(0),) * arity)]
    arg_vecs = []
    for i in range(arity):
        for v in pool:
            for fill in (0, 1):
                args = [Int(fill)] * arity
                args[i] = v
                arg_vecs.append(Vector(tuple(args)))
    store_vecs = []
    for arr in sys.arrays:
        if not arr.kernel:
            continue
        for idx in range(arr.size):
            for a in kernel_addresses(sys):
                store_vecs.append(Vector((Int(0),) * arity, ((arr.name, idx, Int(a)),)))
    out = list(dict.fromkeys(base + list(_interleave(arg_vecs, store_vecs))))
    return out[:budget]


def layouts_for(sys: System, enumerate_bound: int = 5000, samples: int = 0, seed: int = 0) -> list:
    """Every layout when there are few enough, otherwise ``samples`` slot layouts."""
    if not samples and count_layouts(sys) <= enumerate_bound:
        return list(enumerate_layouts(sys, enumerate_bound))
    scheme = SlotScheme.for_system(sys)
    n = samples or 64
    return list(dict.fromkeys(sample_slot_layout(scheme, sys, trial_rng(seed, i)) for i in range(n)))


# ------------------------------------------------ layout non-interference


def check_layout_ni(sys: System, s: str, layouts: Iterable, vectors=None, fuel: int = 1000,
                    regime: str = "enumerated layouts") -> Verdict:
    """Does the outcome of ``s`` (Err and Unsafe identified) depend on the layout?

    A distinguishing pair of terminating runs is reported even when other
    runs ran out of fuel; fuel exhaustion alone gives Unknown.
    """
    require_valid(sys)
    vectors = default_vectors(sys, s) if vectors is None else list(vectors)
    body = sys.body(s)
    ref: dict = {}
    fuel_hits = 0
    n_layouts = 0
    for lay in layouts:
        n_layouts += 1
        m = Machine(sys, lay)
        for k, vec in enumerate(vectors):
            out = classic.eval_cmd(sys, lay, body, vec.regs(), s, vec.store(sys), fuel, m)
            if type(out) is classic.FuelExhausted:
                fuel_hits += 1
                continue
            if k not in ref:
                ref[k] = (lay, out)
                continue
            lay0, out0 = ref[k]
            if not equivalent(out0, out):
                return Verdict(VIOLATED, regime, {"layouts_checked": n_layouts,
                                                  "vectors": len(vectors)},
                               {"kind": "ni", "syscall": s, "fuel": fuel,
                                "layouts": [lay0.to_json(), lay.to_json()],
                                "vector": vec.to_json(),
                                "outcomes": [outcome_json(out0), outcome_json(out)]})
    ev = {"layouts_checked": n_layouts, "vectors": len(vectors), "fuel_exhausted": fuel_hits}
    if fuel_hits:
        return Verdict(UNKNOWN, regime, ev, reason=f"{fuel_hits} runs exhausted fuel {fuel}")
    return Verdict(HOLDS, regime, ev)


def outcome_json(o) -> dict:
    t = type(o)
    if t is classic.Done:
        return {"kind": "Done", "value": value_to_json(o.value),
                "store": {n: [value_to_json(v) for v in cells] for n, cells in o.store.arrays}}
    return {"kind": t.__name__}


# ----------------------------------------- speculative non-interference


def _pair_directives(m1, st1, m2, st2) -> list:
    ds = load_candidates(m1, st1) if st1 else []
    for d in (load_candidates(m2, st2) if st2 else []):
        if d not in ds:
            ds.append(d)
    return ds


def check_slni(sys: System, s: str, layouts: list, depth: int = 6, vectors=None,
               node_cap: int = 200_000, regime: str = "enumerated layouts") -> Verdict:
    """Same directives must give the same observations under every layout.

    Each layout is co-executed in lockstep with the first one over every
    directive sequence of length at most ``depth``.  One side reducing while
    the other is stuck counts as a difference.
    """
    require_valid(sys)
    layouts = list(layouts)
    vectors = default_vectors(sys, s) if vectors is None else list(vectors)
    body = sys.body(s)
    if len(layouts) < 2:
        return Verdict(HOLDS, regime, {"layouts": len(layouts), "pairs": 0})
    ref = layouts[0]
    m1 = Machine(sys, ref)
    nodes = 0
    for lay in layouts[1:]:
        m2 = Machine(sys, lay)
        for vec in vectors:
            st = vec.store(sys)
            root = (singleton(body, vec.regs(), s, m1.initial_memory(st)),
                    singleton(body, vec.regs(), s, m2.initial_memory(st)))
            seen = {root}
            queue = deque([(root, ())])
            while queue:
                (a, b), path = queue.popleft()
                for d in _pair_directives(m1, a, m2, b):
                    r1, r2 = spec_step(m1, a, d), spec_step(m2, b, d)
                    if r1 is None and r2 is None:
                        continue
                    ds = path + (d,)
                    if r1 is None or r2 is None or r1[1] != r2[1]:
                        return Verdict(VIOLATED, regime, {"nodes": nodes},
                                       _slni_witness(sys, s, ref, lay, vec, ds))
                    nodes += 1
                    if nodes > node_cap:
                        return Verdict(UNKNOWN, regime, {"nodes": nodes},
                                       reason=f"node cap {node_cap} reached")
                    nxt = (r1[0], r2[0])
                    if len(ds) < depth and nxt not in seen:
                        seen.add(nxt)
                        queue.append((nxt, ds))
    return Verdict(HOLDS, f"{regime}, directive depth <= {depth}",
                   {"layouts": len(layouts), "vectors": len(vectors), "nodes": nodes})


def replay_slni(sys: System, s: str, lay1, lay2, vec: Vector, ds) -> tuple:
    """Run the same directives under both layouts; returns the two runs."""
    out = []
    for lay in (lay1, lay2):
        m = Machine(sys, lay)
        st = singleton(sys.body(s), vec.regs(), s, m.initial_memory(vec.store(sys)))
        out.append(spec_run(m, st, ds))
    return tuple(out)


def _slni_witness(sys, s, lay1, lay2, vec, ds) -> dict:
    r1, r2 = replay_slni(sys, s, lay1, lay2, vec, ds)
    return {"kind": "slni", "syscall": s, "layouts": [lay1.to_json(), lay2.to_json()],
            "vector": vec.to_json(), "directives": [str(d) for d in ds],
            "observations": [[str(o) for o in r1.observations], [str(o) for o in r2.observations]],
            "consumed": [r1.consumed, r2.consumed]}


def slni_differs(r1, r2) -> bool:
    return r1.observations != r2.observations or r1.consumed != r2.consumed


# ------------------------------------------------------ directive search


@dataclass(frozen=True)
class Entry:
    """A speculative starting point: inputs plus an initial write buffer."""

    vector: Vector
    buffer: tuple = ()  # ((address, value), ...) newest first

    def to_json(self) -> dict:
        return {"vector": self.vector.to_json(),
                "buffer": [[a, value_to_json(v)] for a, v in self.buffer]}

    @staticmethod
    def from_json(d: dict) -> "Entry":
        return Entry(Vector.from_json(d["vector"]),
                     tuple((a, value_from_json(v)) for a, v in d["buffer"]))


def entry_state(m: Machine, s: str, e: Entry) -> tuple:
    return singleton(m.sys.body(s), e.vector.regs(), s, m.initial_memory(e.vector.store(m.sys)),
                     e.buffer)


def classic_from_entry(m: Machine, s: str, e: Entry, fuel: int):
    """Architectural outcome of the same entry, started from the flushed memory."""
    mem = flush(e.buffer, m.initial_memory(e.vector.store(m.sys)))
    cfg = classic.run(m, Running((Frame(m.sys.body(s), e.vector.regs(), s),), mem), fuel)
    return classic.finish(m, cfg, e.vector.store(m.sys))


def _search_entry(m: Machine, s: str, e: Entry, depth: int, node_cap: int):
    """BFS over directive sequences; returns (first unsafe path or None, nodes, capped)."""
    root = entry_state(m, s, e)
    seen = {root}
    queue = deque([(root, ())])
    nodes = 0
    while queue:
        st, path = queue.popleft()
        for d in load_candidates(m, st):
            r = spec_step(m, st, d)
            if r is None:
                continue
            nodes += 1
            ds = path + (d,)
            if r[0] == UNSAFE_STACK:
                return ds, nodes, False
            if nodes > node_cap:
                return None, nodes, True
            if len(ds) < depth and r[0] not in seen:
                seen.add(r[0])
                queue.append((r[0], ds))
    return None, nodes, False


def search_entries(sys: System, s: str, entries: list, depth: int, fuel: int = 1000,
                   layout=None, node_cap: int = 200_000, include_architectural: bool = False,
                   regime: str = "bounded directive search") -> Verdict:
    """Look for speculative unsafe runs of ``s`` from the given entries.

    Each unsafe found is confirmed when the architectural run from the same
    entry (flushed memory) is also unsafe.  Only unconfirmed ones violate,
    unless ``include_architectural`` is set.
    """
    require_valid(sys)
    lay = layout if layout is not None else default_layout(sys)
    m = Machine(sys, lay)
    confirmed = unconfirmed = 0
    total_nodes = 0
    capped = 0
    for e in entries:
        ds, nodes, hit_cap = _search_entry(m, s, e, depth, node_cap)
        total_nodes += nodes
        capped += hit_cap
        if ds is None:
            continue
        arch = classic_from_entry(m, s, e, fuel)
        if type(arch) is classic.Unsafe:
            confirmed += 1
            if not include_architectural:
                continue
        else:
            unconfirmed += 1
        run = spec_run(m, entry_state(m, s, e), ds)
        return Verdict(VIOLATED, f"{regime}, depth <= {depth}",
                       {"entries": len(entries), "nodes": total_nodes, "confirmed": confirmed},
                       {"kind": "search", "syscall": s, "layout": Layout(lay).to_json(),
                        "entry": e.to_json(), "directives": [str(d) for d in ds],
                        "observations": [str(o) for o in run.observations],
                        "architectural": outcome_json(arch), "fuel": fuel,
                        "include_architectural": include_architectural})
    ev = {"entries": len(entries), "nodes": total_nodes, "confirmed_unsafe": confirmed,
          "unconfirmed_unsafe": unconfirmed}
    if capped:
        return Verdict(UNKNOWN, f"{regime}, depth <= {depth}", ev,
                       reason=f"node cap {node_cap} reached on {capped} entries")
    return Verdict(HOLDS, f"{regime}, depth <= {depth}", ev)


def directive_search(sys: System, s: str, depth: int = 8, fuel: int = 1000, vectors=None,
                     layout=None, node_cap: int = 200_000,
                     include_architectural: bool = False) -> Verdict:
    vectors = default_vectors(sys, s) if vectors is None else list(vectors)
    return search_entries(sys, s, [Entry(v) for v in vectors], depth, fuel, layout, node_cap,
                          include_architectural)


def search_all(sys: System, depth: int = 8, fuel: int = 1000, syscalls=None, **kw) -> Verdict:
    """Search every syscall; the first violation wins, Unknown beats Holds."""
    names = syscalls or [sc.name for sc in sys.syscalls]
    results = {}
    unknown = None
    for s in names:
        v = directive_search(sys, s, depth, fuel, **kw)
        results[s] = v.evidence
        if v.status == VIOLATED:
            v.evidence = {"per_syscall": results}
            return v
        if v.status == UNKNOWN:
            unknown = v
    if unknown is not None:
        unknown.evidence = {"per_syscall": results}
        return unknown
    return Verdict(HOLDS, f"bounded directive search, depth <= {depth}", {"per_syscall": results})


def replay_search(sys: System, w: dict):
    """Re-run a search witness: (speculative run, architectural outcome)."""
    from .syntax import parse_directives

    lay = Layout(w["layout"])
    m = Machine(sys, lay)
    e = Entry.from_json(w["entry"])
    ds = parse_directives(" ".join(w["directives"]))
    return spec_run(m, entry_state(m, w["syscall"], e), ds), classic_from_entry(
        m, w["syscall"], e, w["fuel"])


def buffer_seeds(sys: System, lay, cap: int = 256) -> list:
    """Empty buffer plus single entries writing each kernel address into each kernel array cell."""
    out = [()]
    for arr in sys.arrays:
        if not arr.kernel:
            continue
        for k in range(arr.size):
            for a in kernel_addresses(sys):
                out.append(((lay[arr.name] + k, Int(a)),))
    return out[:cap]


def check_imposes_sks(sys: System, depth: int = 8, fuel: int = 1000, layout=None,
                      node_cap: int = 200_000, syscalls=None) -> Verdict:
    """Every speculative unsafe from a buffered entry must be architecturally unsafe too."""
    lay = layout if layout is not None else default_layout(sys)
    names = syscalls or [sc.name for sc in sys.syscalls]
    per = {}
    for s in names:
        arity = len(sys.syscall_decl[s].params)
        bases = [Vector((Int(0),) * arity), Vector((Int(1),) * arity)]
        entries = [Entry(v) for v in default_vectors(sys, s)]
        entries += [Entry(v, b) for b in buffer_seeds(sys, lay)[1:] for v in bases]
        v = search_entries(sys, s, list(dict.fromkeys(entries)), depth, fuel, lay, node_cap,
                           regime="buffer-seeded directive search")
        per[s] = v.evidence
        if v.status != HOLDS:
            v.evidence = {"per_syscall": per}
            return v
    return Verdict(HOLDS, f"buffer-seeded directive search, depth <= {depth}",
                   {"per_syscall": per})


# ------------------------------------------------------------ experiments


@dataclass
class ExperimentResult:
    trials: int
    unsafe: int
    err: int
    done: int
    fuel_exhausted: int
    stuck: int
    bound: Fraction
    seed: int
    first_unsafe_trial: Optional[int] = None

    @property
    def rate(self) -> Optional[float]:
        return self.unsafe / self.trials if self.trials else None

    @property
    def tolerance(self) -> Optional[float]:
        """Three binomial standard deviations at the bound."""
        if not self.trials:
            return None
        b = float(self.bound)
        return 3 * math.sqrt(b * (1 - b) / self.trials)

    @property
    def within_bound(self) -> Optional[bool]:
        if not self.trials:
            return None
        return self.rate <= float(self.bound) + self.tolerance

    def to_json(self) -> dict:
        return {"trials": self.trials, "unsafe": self.unsafe, "err": self.err,
                "done": self.done, "fuel_exhausted": self.fuel_exhausted, "stuck": self.stuck,
                "empirical_rate": self.rate, "bound": float(self.bound),
                "bound_exact": str(self.bound), "tolerance_3sigma": self.tolerance,
                "within_bound": self.within_bound, "seed": self.seed,
                "first_unsafe_trial": self.first_unsafe_trial}


def experiment_trial(sys: System, prog, scheme: SlotScheme, seed: int, i: int, fuel: int):
    lay = sample_slot_layout(scheme, sys, trial_rng(seed, i))
    return lay, attacker_run(Machine(sys, lay, check=False), prog, fuel=fuel)


def _trial_chunk(args):
    sys, prog, scheme, seed, lo, hi, fuel = args
    return [classic.outcome_kind(experiment_trial(sys, prog, scheme, seed, i, fuel)[1].outcome)
            for i in range(lo, hi)]


def estimate_unsafe_probability(sys: System, prog, scheme: SlotScheme | None = None,
                                trials: int = 10_000, fuel: int = 1000, seed: int = 0,
                                jobs: int = 1) -> ExperimentResult:
    """Run the attacker under ``trials`` sampled slot layouts and tally outcomes."""
    require_valid(sys)
    scheme = scheme or SlotScheme.for_system(sys)
    scheme.check(sys)
    bound = 1 - delta_bound_slots(sys, scheme)
    if jobs > 1 and trials > 1:
        step = math.ceil(trials / jobs)
        chunks = [(sys, prog, scheme, seed, lo, min(lo + step, trials), fuel)
                  for lo in range(0, trials, step)]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            kinds = [k for part in ex.map(_trial_chunk, chunks) for k in part]
    else:
        kinds = _trial_chunk((sys, prog, scheme, seed, 0, trials, fuel))
    first = next((i for i, k in enumerate(kinds) if k == "Unsafe"), None)
    return ExperimentResult(trials, kinds.count("Unsafe"), kinds.count("Err"),
                            kinds.count("Done"), kinds.count("FuelExhausted"),
                            kinds.count("Stuck"), bound, seed, first)


def _conditional_counts(sys, s, scheme, layouts, address):
    refs = syscall_refs(sys, s)
    covered = free = 0
    for lay in layouts:
        if address in footprint_set(lay, sys, refs):
            continue
        covered += 1
        if address not in footprint_set(lay, sys, sys.kernel_ids):
            free += 1
    return covered, free


def estimate_delta(sys: System, scheme: SlotScheme | None = None, trials: int = 10_000,
                   seed: int = 0, address: Optional[int] = None, exact: bool = True) -> dict:
    """Monte-Carlo estimate of P(probe hits a free cell | the refs do not cover it), per syscall.

    ``exact`` adds the same probability computed over every slot layout.
    """
    scheme = scheme or SlotScheme.for_system(sys)
    scheme.check(sys)
    address = scheme.slot_base(0) if address is None else address
    per = {}
    for s in sys.syscalls:
        lays = (sample_slot_layout(scheme, sys, trial_rng(seed, i)) for i in range(trials))
        n, free = _conditional_counts(sys, s.name, scheme, lays, address)
        est = free / n if n else None
        row = {"samples_used": n, "estimate": est,
               "tolerance_3sigma": None if not n else 3 * math.sqrt(est * (1 - est) / n)}
        if exact:
            n2, f2 = _conditional_counts(sys, s.name, scheme, all_slot_layouts(scheme, sys), address)
            row["exact"] = str(Fraction(f2, n2)) if n2 else None
        per[s.name] = row
    estimates = [r["estimate"] for r in per.values() if r["estimate"] is not None]
    return {"address": address, "trials": trials, "seed": seed,
            "bound": str(delta_bound_slots(sys, scheme)), "bound_float": float(delta_bound_slots(sys, scheme)),
            "min_estimate": min(estimates) if estimates else None, "per_syscall": per}


# ------------------------------------------------------- semantic cross-checks


def check_step_equivalence(sys: System, lay, programs: Iterable, max_steps: int = 200) -> list:
    """Run classic and Step-only speculative execution in lockstep.

    ``programs`` yields (command, registers, mode).  Returns a list of
    mismatch descriptions (empty when every state agrees).
    """
    m = Machine(sys, lay)
    bad = []
    for n, (c, regs, mode) in enumerate(programs):
        cfg = classic.initial(m, c, regs, mode)
        stack = singleton(c, regs, mode, cfg.mem)
        for k in range(max_steps):
            if not _states_match(cfg, stack):
                bad.append(f"program {n}: step {k}: {cfg!r} vs {stack!r}")
                break
            if type(cfg) is not Running or classic.is_terminal(cfg):
                if spec_step(m, stack, STEP) is not None:
                    bad.append(f"program {n}: speculative run continues after step {k}")
                break
            cfg, _ = classic.step(m, cfg)
            r = spec_step(m, stack, STEP)
            if r is None:
                bad.append(f"program {n}: speculative run stuck at step {k}")
                break
            stack = r[0]
    return bad


def _states_match(cfg, stack) -> bool:
    if cfg is ERR:
        return stack == (SErr(False),)
    if cfg is UNSAFE:
        return stack == UNSAFE_STACK
    if len(stack) != 1 or type(stack[0]) is not SRunning:
        return False
    k = stack[0]
    return not k.ms and k.frames == cfg.frames and flush(k.buf, k.mem) == cfg.mem


def _bottom_top(stack) -> Optional[object]:
    if not stack:
        return None
    top = stack[0]
    if type(top) is SRunning and not top.ms:
        return top
    if top == SErr(False):
        return top
    return None


def check_backtrack_elimination(m: Machine, stack: tuple, bound: int = 12,
                                node_cap: int = 500_000) -> dict:
    """Every ⊥-flagged top reachable with ≤ ``bound`` directives is reachable by Step alone."""
    tops = set()
    seen = {stack}
    queue = deque([(stack, 0)])
    nodes = 0
    t0 = _bottom_top(stack)
    if t0 is not None:
        tops.add(t0)
    while queue:
        st, k = queue.popleft()
        if k >= bound:
            continue
        for d in load_candidates(m, st):
            r = spec_step(m, st, d)
            if r is None:
                continue
            nodes += 1
            if nodes > node_cap:
                raise StructuralError(f"node cap {node_cap} reached")
            t = _bottom_top(r[0])
            if t is not None:
                tops.add(t)
            if r[0] not in seen:
                seen.add(r[0])
                queue.append((r[0], k + 1))
    step_tops = set()
    st = stack
    for _ in range(4 * bound + 1):
        t = _bottom_top(st)
        if t is not None:
            step_tops.add(t)
        r = spec_step(m, st, STEP)
        if r is None:
            break
        st = r[0]
    missing = [t for t in tops if t not in step_tops]
    return {"reachable_bottom_tops": len(tops), "nodes": nodes, "missing": missing}

