"""Command-line entry point: ``speckernel <command> [options]``.

Exit codes: 0 holds / normal termination, 1 violation or unsafe run,
2 unknown (fuel, node cap), 3 usage or parse error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import fixtures
from .commands import Job, UsageError, execute, replay
from .lang import StructuralError
from .report import default_seed, dumps, loads, text_summary
from .scenarios import SCENARIOS, run_scenario
from .syntax import ParseError

EXIT_USAGE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _global_options(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--format", choices=("json", "text"), default=d("text"),
                   help="report format on stdout")
    p.add_argument("--jobs", type=int, default=d(1), help="worker processes for experiments")
    p.add_argument("--figures", metavar="DIR", default=d(None),
                   help="also render matplotlib figures into DIR")
    p.add_argument("--report", metavar="FILE", default=d(None),
                   help="also write the JSON report to FILE")


def build_parser() -> argparse.ArgumentParser:
    main = _Parser(prog="speckernel",
                   description="Kernel safety under layout randomization and speculation.")
    _global_options(main, suppress=False)
    common = _Parser(add_help=False)
    _global_options(common, suppress=True)
    sysopt = _Parser(add_help=False)
    sysopt.add_argument("--system", required=True,
                        help=f"fixture name ({', '.join(fixtures.SOURCES)}) or system file")
    sysopt.add_argument("--seed", type=int, default=None,
                        help="master seed (default: $SPECKERNEL_SEED or 0)")
    sysopt.add_argument("--fuel", type=int, default=None, help="step budget per run")
    sub = main.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", parents=[common, sysopt], help="run an attacker program")
    p.add_argument("--attacker", help="attacker file or inline source")
    p.add_argument("--syscall", help="instead of --attacker: invoke this syscall")
    p.add_argument("--args", default="", help="comma-separated arguments for --syscall")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--layout", metavar="FILE", help="layout JSON {identifier: base}")
    g.add_argument("--sample", action="store_true", help="sample a slot layout from the seed")
    p.add_argument("--trace", action="store_true", help="record the rule of every step")

    for name, helptext in (("check-ni", "layout non-interference"),
                           ("check-slni", "speculative layout non-interference")):
        p = sub.add_parser(name, parents=[common, sysopt], help=helptext)
        p.add_argument("--syscall", action="append", help="syscall to check (default: all)")
        g = p.add_mutually_exclusive_group()
        g.add_argument("--enumerate", action="store_true", help="every layout (default)")
        g.add_argument("--samples", type=int, default=0, help="sampled slot layouts instead")
        p.add_argument("--budget", type=int, default=256, help="input vectors per syscall")
        if name == "check-slni":
            p.add_argument("--depth", type=int, default=6, help="directive sequence length")
            p.add_argument("--node-cap", type=int, default=200_000)

    p = sub.add_parser("estimate-delta", parents=[common, sysopt],
                       help="Monte-Carlo check of the delta bound")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--address", type=int, default=None, help="probed address (first slot)")

    p = sub.add_parser("experiment", parents=[common, sysopt],
                       help="unsafe probability under slot randomization")
    p.add_argument("--attacker", help="attacker file or inline source (default: probe the "
                                      "lowest kernel address)")
    p.add_argument("--trials", type=int, default=10_000)

    p = sub.add_parser("search", parents=[common, sysopt], help="bounded directive search")
    p.add_argument("--syscall", action="append", help="syscall to search (default: all)")
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--node-cap", type=int, default=200_000)
    p.add_argument("--include-architectural", action="store_true",
                   help="also count unsafe runs that happen without speculation")
    p.add_argument("--buffers", action="store_true",
                   help="start from seeded write buffers as well (imposed-safety check)")
    p.add_argument("--transform", choices=("fence", "coalesced"),
                   help="insert fences before searching")

    p = sub.add_parser("transform", parents=[common, sysopt], help="insert fences")
    p.add_argument("--coalesced", action="store_true", help="one fence per run of accesses")
    p.add_argument("--normalize", action="store_true", help="collapse adjacent fences")
    p.add_argument("--skip", action="append", default=[], help="leave this syscall unchanged")
    p.add_argument("--out", metavar="FILE", help="write the transformed system here")
    p.add_argument("--check", action="store_true",
                   help="also check semantics preservation and imposed safety")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--depth", type=int, default=8)

    p = sub.add_parser("pipeline", parents=[common, sysopt],
                       help="transform, then check preservation, imposed safety and a probe")
    p.add_argument("--attacker", help="probe whose transient observations should vanish")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--coalesced", action="store_true")

    p = sub.add_parser("scenario", parents=[common], help="run a named scenario")
    p.add_argument("name", nargs="?", help=", ".join(SCENARIOS))
    p.add_argument("--list", action="store_true", help="list scenarios")

    p = sub.add_parser("replay", parents=[common], help="re-run a JSON report")
    p.add_argument("file")
    return main


def _read_system(arg: str) -> tuple:
    if arg in fixtures.SOURCES:
        return arg, fixtures.SOURCES[arg]
    if os.path.isfile(arg):
        with open(arg, encoding="utf-8") as f:
            return None, f.read()
    raise UsageError(f"--system: {arg!r} is neither a fixture nor a file")


def _read_attacker(arg):
    if arg is None:
        return None
    if os.path.isfile(arg):
        with open(arg, encoding="utf-8") as f:
            return f.read()
    return arg


def _params(ns) -> dict:
    c = ns.command
    p: dict = {}
    if ns.fuel is not None:
        p["fuel"] = ns.fuel
    if c == "run":
        if ns.layout:
            with open(ns.layout, encoding="utf-8") as f:
                p["layout"] = json.load(f)
        p["sample"] = ns.sample
        p["trace"] = ns.trace
    elif c in ("check-ni", "check-slni"):
        p.update(syscalls=ns.syscall, samples=ns.samples, budget=ns.budget)
        if c == "check-slni":
            p.update(depth=ns.depth, node_cap=ns.node_cap)
    elif c == "estimate-delta":
        p.update(trials=ns.trials, address=ns.address)
    elif c == "experiment":
        p["trials"] = ns.trials
    elif c == "search":
        p.update(syscalls=ns.syscall, depth=ns.depth, node_cap=ns.node_cap,
                 include_architectural=ns.include_architectural, buffers=ns.buffers,
                 transform=ns.transform)
    elif c == "transform":
        p.update(coalesced=ns.coalesced, normalize=ns.normalize, skip=ns.skip, check=ns.check,
                 trials=ns.trials, depth=ns.depth)
    elif c == "pipeline":
        p.update(trials=ns.trials, depth=ns.depth, coalesced=ns.coalesced)
    return p


def _emit(ns, rep: dict, out, show: bool = True) -> None:
    if ns.report:
        with open(ns.report, "w", encoding="utf-8") as f:
            f.write(dumps(rep))
    if ns.figures:
        from .plots import render

        for path in render(rep, ns.figures):
            print(f"figure: {path}", file=sys.stderr)
    if show:
        out.write(dumps(rep) if ns.format == "json" else text_summary(rep))


def _run(argv: list, out) -> int:
    ns = build_parser().parse_args(argv)
    if ns.command == "scenario":
        if ns.list or not ns.name:
            for name, sc in SCENARIOS.items():
                out.write(f"{name:20s} exit {sc.expected_exit}  {sc.about}\n")
            return 0
        if ns.name not in SCENARIOS:
            raise UsageError(f"unknown scenario {ns.name!r}")
        res, problems = run_scenario(ns.name, argv, ns.jobs)
        _emit(ns, res.report, out)
        for msg in problems:
            print(f"scenario {ns.name}: {msg}", file=sys.stderr)
        return res.exit_code
    if ns.command == "replay":
        with open(ns.file, encoding="utf-8") as f:
            rep = loads(f.read())
        r = replay(rep)
        if ns.format == "json":
            out.write(json.dumps(r, indent=2) + "\n")
        else:
            out.write(f"reproduced: {r['reproduced']}\n")
            if r["differences"]:
                out.write(f"differing fields: {', '.join(r['differences'])}\n")
            out.write(f"witness re-executed: {r['witness_reexecuted']}\n")
            out.write(f"exit code: {r['exit_code']} (original {r['original_exit_code']})\n")
        return 0 if r["reproduced"] else 1

    name, source = _read_system(ns.system)
    attacker = None
    if ns.command == "run":
        if ns.attacker and ns.syscall:
            raise UsageError("give either --attacker or --syscall")
        if ns.syscall:
            args = [a.strip() for a in ns.args.split(",") if a.strip()]
            attacker = f"syscall {ns.syscall}({', '.join(args)});\n"
        else:
            attacker = _read_attacker(ns.attacker)
            if attacker is None:
                raise UsageError("run needs --attacker or --syscall")
    elif ns.command in ("experiment", "pipeline"):
        attacker = _read_attacker(ns.attacker)
    seed = ns.seed if ns.seed is not None else default_seed()
    job = Job(ns.command, source, name, attacker, _params(ns), seed, ns.jobs)
    res = execute(job, argv)
    if ns.command == "transform":
        text = res.report["details"]["system_out"]
        if ns.out:
            with open(ns.out, "w", encoding="utf-8") as f:
                f.write(text)
        elif ns.format == "text":
            out.write(text)
            _emit(ns, res.report, out, show=False)
            return res.exit_code
    _emit(ns, res.report, out)
    return res.exit_code


def run_cli(argv=None, out=None) -> int:
    """Run the CLI and return its exit code instead of exiting."""
    argv = list(sys.argv[1:] if argv is None else argv)
    out = out or sys.stdout
    try:
        return _run(argv, out)
    except (UsageError, ParseError, StructuralError, OSError, ValueError) as e:
        print(f"speckernel: error: {e}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
