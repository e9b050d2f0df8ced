"""The JSON report document shared by every CLI command."""
from __future__ import annotations

import hashlib
import json
import os

VERSION = "speckernel-report/1"
SEED_ENV = "SPECKERNEL_SEED"

# Top-level keys in the order they are written.
KEYS = ("version", "command", "argv", "params", "seed", "system", "attacker", "layouts",
        "outcome", "observations", "directives", "verdict", "experiment", "details",
        "exit_code", "runtime_seconds")

VOLATILE = ("argv", "runtime_seconds")


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def digest(text: str) -> str:
    return "sha256:" + hashlib.sha256(text.encode()).hexdigest()


def system_entry(name: str | None, source: str) -> dict:
    return {"name": name, "digest": digest(source), "source": source}


def make_report(command: str, **fields) -> dict:
    unknown = set(fields) - set(KEYS)
    if unknown:
        raise KeyError(f"unknown report fields: {sorted(unknown)}")
    out = {k: None for k in KEYS}
    out["version"] = VERSION
    out["command"] = command
    out.update(fields)
    for k in ("observations", "directives", "layouts"):
        if out[k] is None:
            out[k] = []
    return out


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, ensure_ascii=False) + "\n"


def loads(text: str) -> dict:
    rep = json.loads(text)
    if rep.get("version") != VERSION:
        raise ValueError(f"unsupported report version {rep.get('version')!r}")
    return rep


def stable_view(report: dict) -> dict:
    """The report without fields that legitimately differ between identical runs."""
    return {k: v for k, v in report.items() if k not in VOLATILE}


def text_summary(report: dict) -> str:
    """Short human-readable rendering used by ``--format text``."""
    lines = [f"command: {report['command']}"]
    sys = report.get("system")
    if sys:
        lines.append(f"system: {sys.get('name') or '(file)'} {sys['digest'][:19]}")
    if report.get("seed") is not None:
        lines.append(f"seed: {report['seed']}")
    if report.get("outcome"):
        lines.append(f"outcome: {report['outcome']['kind']}")
    v = report.get("verdict")
    if v:
        lines.append(f"verdict: {v['status']} ({v['regime']})")
        if v.get("reason"):
            lines.append(f"  reason: {v['reason']}")
        w = v.get("witness")
        if w:
            for key in ("syscall", "vector", "entry", "directives", "observations", "outcomes",
                        "layouts", "layout", "program"):
                if key in w:
                    lines.append(f"  {key}: {json.dumps(w[key])}")
    exp = report.get("experiment")
    if exp:
        lines.append(f"trials: {exp['trials']}  unsafe: {exp['unsafe']}  err: {exp['err']}  "
                     f"done: {exp['done']}  fuel: {exp['fuel_exhausted']}")
        if exp["empirical_rate"] is not None:
            lines.append(f"empirical rate: {exp['empirical_rate']:.4f}  bound: {exp['bound']:.4f}"
                         f"  (+3 sigma {exp['tolerance_3sigma']:.4f})")
    if report.get("observations"):
        lines.append("observations: " + " ".join(report["observations"]))
    det = report.get("details")
    if det:
        for k, val in det.items():
            if k in ("trace", "system_out"):
                continue
            lines.append(f"{k}: {json.dumps(val)}")
        if "trace" in det:
            lines.append("trace:")
            for st in det["trace"]:
                lines.append(f"  {st}")
    lines.append(f"exit: {report['exit_code']}")
    return "\n".join(lines) + "\n"
