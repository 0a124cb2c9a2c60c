"""PNG figures for a finished run (optional; needs matplotlib)."""

import math
import os

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_figures(records, cfg, out_dir, vehicle=0):
    """Write ``controls.png``, ``distance.png`` and ``paths.png``; return their paths."""
    if not records:
        return []
    plt = _pyplot()
    os.makedirs(out_dir, exist_ok=True)
    t = np.array([r.t for r in records])
    filt = np.array([r.filtered[vehicle] for r in records])
    nom = np.array([r.nominal[vehicle] for r in records])
    b = cfg.bounds
    paths = []

    fig, (ax_v, ax_w) = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
    ax_v.plot(t, nom[:, 0], "--", color="0.6", label="nominal")
    ax_v.plot(t, filt[:, 0], color="C0", label="filtered")
    for lim in (b.v_min, b.v_max):
        ax_v.axhline(lim, color="C3", lw=0.8)
    ax_v.set_ylabel("v [m/s]")
    ax_v.legend(loc="best", fontsize=8)
    ax_w.plot(t, np.degrees(nom[:, 1]), "--", color="0.6")
    ax_w.plot(t, np.degrees(filt[:, 1]), color="C0")
    for lim in (-b.omega_max, b.omega_max):
        ax_w.axhline(math.degrees(lim), color="C3", lw=0.8)
    ax_w.set_ylabel("omega [deg/s]")
    ax_w.set_xlabel("t [s]")
    fig.suptitle(f"{cfg.name} ({cfg.mode.value}), vehicle {vehicle + 1}")
    paths.append(_save(fig, out_dir, "controls.png"))

    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.plot(t, [r.distances.min() for r in records], color="C0", label="min pair distance")
    ax.axhline(cfg.d_s, color="C3", lw=0.8, label="D_s")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("distance [m]")
    ax.set_yscale("log")
    ax.legend(loc="best", fontsize=8)
    paths.append(_save(fig, out_dir, "distance.png"))

    fig, ax = plt.subplots(figsize=(6, 6))
    poses = np.array([r.poses for r in records])
    for i in range(poses.shape[1]):
        ax.plot(poses[:, i, 0], poses[:, i, 1], lw=0.8)
        ax.plot(poses[0, i, 0], poses[0, i, 1], "o", ms=3, color="k")
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    paths.append(_save(fig, out_dir, "paths.png"))
    return paths


def _save(fig, out_dir, name):
    path = os.path.join(out_dir, name)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    fig.clf()
    import matplotlib.pyplot as plt

    plt.close(fig)
    return path
