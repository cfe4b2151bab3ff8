"""
Optional PNG figures written next to a run's CSV output.

matplotlib is imported lazily so the numerical core never depends on it.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

__all__ = ["render"]


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:
        raise RuntimeError("plotting needs matplotlib (pip install 'chlab[plot]')") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _simulate(plt, out: Path, res) -> list[str]:
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(10, 4))
    traj = res.trajectory
    picks = sorted(set(np.linspace(0, len(traj) - 1, min(6, len(traj))).astype(int)))
    for i in picks:
        s = traj[i]
        ax0.plot(s.grid.x, s.values, lw=1, label=f"t={s.t:.3g}")
    ax0.set_xlabel("x")
    ax0.set_ylabel("u")
    ax0.legend(fontsize=7)
    t = np.array([r.t for r in res.records])
    for name in ("M0", "E", "H3"):
        vals = [getattr(r, name) for r in res.records]
        if vals[0] is None:
            continue
        v = np.array(vals, dtype=float)
        scale = abs(v[0]) if v[0] != 0 else 1.0
        ax1.semilogy(t, np.abs(v - v[0]) / scale + 1e-18, label=name)
    ax1.set_xlabel("t")
    ax1.set_ylabel("relative drift")
    ax1.legend(fontsize=7)
    fig.tight_layout()
    path = out / "simulate.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [str(path)]


def _peakon(plt, out: Path, run) -> list[str]:
    fig, ax = plt.subplots(figsize=(5, 4))
    q = run.positions()
    for i in range(q.shape[1]):
        ax.plot(q[:, i], run.times, lw=1.2, label=f"peakon {i}")
    ax.set_xlabel("q")
    ax.set_ylabel("t")
    ax.legend(fontsize=7)
    fig.tight_layout()
    path = out / "peakons.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [str(path)]


def _variational(plt, out: Path, rows) -> list[str]:
    fig, ax = plt.subplots(figsize=(5, 4))
    for off in dict.fromkeys(r.offset for r in rows):
        sel = [r for r in rows if r.offset == off]
        ax.loglog([r.m for r in sel], [max(r.gap, 1e-18) for r in sel], "o-", label=off)
    m = np.array(sorted({r.m for r in rows}), dtype=float)
    ref = max(r.gap for r in rows if r.m == m[0])
    ax.loglog(m, ref * (m[0] / m) ** 4, "k--", lw=0.8, label="slope -4")
    ax.set_xlabel("time intervals m")
    ax.set_ylabel("identity gap")
    ax.legend(fontsize=7)
    fig.tight_layout()
    path = out / "identity_gap.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [str(path)]


_RENDERERS = {"simulate": _simulate, "peakon": _peakon, "verify-variational": _variational}


def render(command: str, out: Path, payload) -> list[str]:
    """Draw the figures for ``command``; commands without figures return ``[]``."""
    func = _RENDERERS.get(command)
    if func is None or payload is None:
        return []
    return func(_pyplot(), Path(out), payload)
