"""Matplotlib figures rendered from reports (``--figures DIR``)."""
from __future__ import annotations

import os
from fractions import Fraction

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _parse_obs(text: str):
    """``"mem 8"`` -> ("mem", 8); ``"branch true"`` -> ("branch", 1); others -> (kind, None)."""
    kind, _, arg = text.partition(" ")
    if kind in ("mem", "jmp"):
        return kind, int(arg)
    if kind == "branch":
        return kind, 1 if arg == "true" else 0
    return kind, None


def _timeline(ax, obs: list, title: str, offset: float = 0.0, label: str | None = None):
    styles = {"mem": ("o", "tab:blue"), "jmp": ("s", "tab:red")}
    for kind, (marker, colour) in styles.items():
        pts = [(i, v) for i, o in enumerate(obs) for k, v in [_parse_obs(o)] if k == kind]
        if pts:
            xs, ys = zip(*pts)
            ax.scatter([x + offset for x in xs], ys, marker=marker, color=colour,
                       label=f"{kind}{' ' + label if label else ''}", zorder=3)
    for i, o in enumerate(obs):
        k, v = _parse_obs(o)
        if k == "branch":
            ax.axvline(i + offset, color="tab:green" if v else "tab:orange", alpha=0.3, lw=2)
        elif k == "bt":
            ax.axvline(i + offset, color="grey", ls=":", lw=1)
    ax.set_xlabel("observation index")
    ax.set_ylabel("address")
    ax.set_title(title)


def observations_figure(rep: dict, path: str) -> str:
    fig, ax = plt.subplots(figsize=(7, 3.5))
    _timeline(ax, rep["observations"], f"{rep['command']}: observations")
    if ax.get_legend_handles_labels()[0]:
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def slni_figure(rep: dict, path: str) -> str:
    w = rep["verdict"]["witness"]
    fig, axes = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    for ax, obs, lay in zip(axes, w["observations"], w["layouts"]):
        _timeline(ax, obs, "layout " + ", ".join(f"{k}={v}" for k, v in lay.items()))
    axes[0].set_xlabel("")
    fig.suptitle("same directives, different observations: " + " ".join(w["directives"]),
                 fontsize=9)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def experiment_figure(rep: dict, path: str) -> str:
    exp = rep["experiment"]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.5))
    kinds = ["unsafe", "err", "done", "fuel_exhausted", "stuck"]
    ax1.bar(kinds, [exp[k] for k in kinds], color="tab:grey")
    ax1.set_title(f"{exp['trials']} trials")
    ax1.tick_params(axis="x", labelrotation=30)
    if exp["empirical_rate"] is not None:
        ax2.errorbar([0], [exp["empirical_rate"]], yerr=[exp["tolerance_3sigma"]], fmt="o",
                     capsize=6, label="empirical unsafe rate (3 sigma)")
    ax2.axhline(exp["bound"], color="tab:red", ls="--", label="bound 1 - delta")
    ax2.set_xlim(-1, 1)
    ax2.set_xticks([])
    ax2.set_ylim(0, max(1e-3, exp["bound"], exp["empirical_rate"] or 0) * 1.3)
    ax2.legend(fontsize=8)
    ax2.set_title("unsafe probability")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def delta_figure(rep: dict, path: str) -> str:
    det = rep["details"]
    names = list(det["per_syscall"])
    rows = [det["per_syscall"][n] for n in names]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    xs = range(len(names))
    ax.errorbar(xs, [r["estimate"] or 0 for r in rows],
                yerr=[r["tolerance_3sigma"] or 0 for r in rows], fmt="o", capsize=6,
                label="Monte Carlo (3 sigma)")
    exact = [float(Fraction(r["exact"])) for r in rows if r.get("exact")]
    if len(exact) == len(rows):
        ax.scatter(xs, exact, marker="x", color="black", zorder=3, label="exact")
    ax.axhline(det["bound_float"], color="tab:red", ls="--", label="delta bound")
    ax.set_xticks(list(xs), names)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("P(probe hits free cell | refs placed)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def render(rep: dict, directory: str, stem: str | None = None) -> list:
    """Write every figure that applies to ``rep``; returns the paths."""
    os.makedirs(directory, exist_ok=True)
    stem = stem or rep["command"]
    out = []
    cmd = rep["command"]
    v = rep.get("verdict") or {}
    w = v.get("witness") or {}
    if cmd == "experiment" and rep.get("experiment"):
        out.append(experiment_figure(rep, os.path.join(directory, f"{stem}-rate.png")))
    if cmd == "estimate-delta":
        out.append(delta_figure(rep, os.path.join(directory, f"{stem}-delta.png")))
    if w.get("kind") == "slni":
        out.append(slni_figure(rep, os.path.join(directory, f"{stem}-slni.png")))
    if rep.get("observations"):
        out.append(observations_figure(rep, os.path.join(directory, f"{stem}-observations.png")))
    return out
