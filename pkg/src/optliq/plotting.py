"""Figure rendering for the CLI report path.

Each writer takes data already computed elsewhere and renders a PNG next to
the corresponding CSV.  Kept separate so library users never pay the
matplotlib import.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

plt.rcParams["figure.dpi"] = 130
plt.rcParams["axes.grid"] = True
plt.rcParams["grid.alpha"] = 0.3


def plot_profile(profile, path: str) -> None:
    x = profile.x
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.2, 3.6))
    ax1.plot(x, profile.u, "-", lw=1.6, label="u(x)")
    ax1.plot(x, x, "k--", lw=0.9, label="identity bound")
    ax1.set_xlabel("reduced state x")
    ax1.set_ylabel("u")
    ax1.legend(loc="best", fontsize=8)
    pos = x > 0
    ax2.semilogx(x[pos], 1.0 - profile.u[pos] / x[pos], "-", lw=1.6)
    ax2.set_xlabel("reduced state x")
    ax2.set_ylabel("relative shortfall 1 - u/x")
    fig.suptitle(f"stationary profile  (a={profile.a:g}, b={profile.b:g}, L={profile.L:g})",
                 fontsize=10)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_impact(points, path: str) -> None:
    z = np.array([p.z for p in points])
    imp = np.array([p.impact for p in points])
    tau = np.array([p.tau for p in points])
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.2, 3.6))
    ax1.loglog(z, imp, "-", lw=1.6)
    ax1.set_xlabel("block size z")
    ax1.set_ylabel("price impact I")
    ax2.loglog(z, tau * 250.0, "-", lw=1.6)
    ax2.set_xlabel("block size z")
    ax2.set_ylabel("constant-speed liquidation time (days)")
    fig.suptitle("per-share impact and liquidation horizon", fontsize=10)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_simulation(paths, path: str) -> None:
    done = ~paths["capped"]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.2, 3.6))
    ax1.hist(paths["T_days"][done], bins=60, color="#36618e")
    ax1.set_xlabel("time to liquidation (days)")
    ax1.set_ylabel("paths")
    ax2.hist(paths["revenue"][done], bins=60, color="#8e5136")
    ax2.set_xlabel("discounted revenue")
    ax2.set_ylabel("paths")
    fig.suptitle("liquidation simulation", fontsize=10)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_trajectories(traj, path: str) -> None:
    fig, axes = plt.subplots(1, 3, figsize=(12.5, 3.4))
    labels = ("price S", "inventory Z", "selling rate v")
    for pid in sorted(traj):
        rows = traj[pid]
        if not rows:
            continue
        t = np.array([r[0] for r in rows]) * 250.0
        for ax, col in zip(axes, (1, 2, 3)):
            ax.plot(t, [r[col] for r in rows], lw=0.5, alpha=0.45)
    for ax, lab in zip(axes, labels):
        ax.set_xlabel("t (days)")
        ax.set_ylabel(lab)
    fig.suptitle("simulated optimal liquidation paths", fontsize=10)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
