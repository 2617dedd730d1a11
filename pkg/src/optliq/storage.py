"""CSV persistence for profiles, impact curves and simulation output.

Every file starts with a comment line carrying the tool version, the fully
resolved configuration and the seed, so each CSV is self-describing and
reruns are byte-comparable.  Floats are written with 17 significant digits,
which round-trips IEEE doubles exactly.
"""

from __future__ import annotations

import os
from typing import Iterable, Mapping

import numpy as np

from . import __version__
from .asymptotics import series_coefficients
from .errors import ValidationError
from .model import ReducedParams
from .simulate import SimStats
from .solution import SolutionProfile

PROFILE_HEADER = "x,u,du,f"
IMPACT_HEADER = "z,s,x,I,tau"


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def header_comment(tag: str, config: Mapping[str, object]) -> str:
    parts = " ".join(f"{k}={_fmt(v) if isinstance(v, (int, float, np.floating, np.integer, bool)) else v}"
                     for k, v in sorted(config.items()))
    return f"# optliq {__version__} | {tag} | {parts}"


def write_csv(path: str, comment: str, header: str, columns: Iterable[np.ndarray]) -> None:
    cols = [np.asarray(c) for c in columns]
    with open(path, "w") as fh:
        fh.write(comment + "\n")
        fh.write(header + "\n")
        for row in zip(*cols):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _meta_path(path: str) -> str:
    return path + ".meta"


def save_profile(profile: SolutionProfile, path: str,
                 extra_config: Mapping[str, object] | None = None) -> None:
    """Write the profile CSV (x,u,du,f) plus a key=value metadata sidecar."""
    x = profile.x
    u = profile.u
    _, du = profile.eval(x)
    f = np.empty_like(x)
    f[0] = 0.0
    f[1:] = 1.0 - u[1:] / x[1:]
    cfg = {"a": profile.a, "b": profile.b, "L": profile.L}
    if extra_config:
        cfg.update(extra_config)
    write_csv(path, header_comment("profile", cfg), PROFILE_HEADER, (x, u, du, f))
    meta = {
        "version": __version__,
        "a": profile.a,
        "b": profile.b,
        "L": profile.L,
        "x_switch": profile.x_switch,
        "series_order": profile.series.order,
        "gap": profile.gap,
    }
    for key in ("T", "N", "h"):
        if key in profile.meta:
            meta[key] = profile.meta[key]
    with open(_meta_path(path), "w") as fh:
        for k, v in meta.items():
            fh.write(f"{k}={_fmt(v) if isinstance(v, (int, float, np.floating, np.integer)) else v}\n")


def read_key_value(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValidationError(f"{path}: malformed line {line!r} (expected key=value)")
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def load_profile(path: str) -> SolutionProfile:
    """Reload a saved profile; nodal values round-trip bit-exactly.

    Requires the metadata sidecar written by ``save_profile``.  Schema
    mismatches, non-monotone grids and missing (a, b) are rejected.
    """
    meta_path = _meta_path(path)
    if not os.path.exists(meta_path):
        raise ValidationError(f"metadata sidecar not found: {meta_path}")
    meta = read_key_value(meta_path)
    for key in ("a", "b", "L"):
        if key not in meta:
            raise ValidationError(f"{meta_path}: missing required key {key!r}")
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines or lines[0] != PROFILE_HEADER:
        raise ValidationError(f"{path}: expected header {PROFILE_HEADER!r}")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 4:
            raise ValidationError(f"{path}: malformed row {ln!r}")
        rows.append([float(p) for p in parts])
    data = np.array(rows)
    if data.shape[0] < 4:
        raise ValidationError(f"{path}: too few rows for a profile")
    x, u = data[:, 0], data[:, 1]
    if x[0] != 0.0 or np.any(np.diff(x) <= 0.0):
        raise ValidationError(f"{path}: grid must start at 0 and increase strictly")
    a, b, L = float(meta["a"]), float(meta["b"]), float(meta["L"])
    order = int(meta.get("series_order", 6))
    series = series_coefficients(ReducedParams(a, b), order)
    prof_meta: dict[str, object] = {}
    for key in ("T", "N", "h"):
        if key in meta:
            prof_meta[key] = float(meta[key]) if key != "N" else int(meta[key])
    return SolutionProfile(x=x, u=u, a=a, b=b, L=L, series=series,
                           x_switch=float(meta.get("x_switch", 1e-3)),
                           gap=float(meta.get("gap", "nan")), meta=prof_meta)


def write_impact_csv(path: str, rows, config: Mapping[str, object]) -> None:
    """rows: iterable of ImpactPoint."""
    rows = list(rows)
    cols = (np.array([r.z for r in rows]), np.array([r.s for r in rows]),
            np.array([r.x_display for r in rows]), np.array([r.impact for r in rows]),
            np.array([r.tau for r in rows]))
    write_csv(path, header_comment("impact", config), IMPACT_HEADER, cols)


def write_sim_summary(path: str, stats: SimStats, config: Mapping[str, object]) -> None:
    names = ["n_paths", "n_completed", "n_capped", "mean_T_days", "std_T_days",
             "se_T_days", "mean_revenue", "std_revenue", "se_revenue"]
    values = [stats.n_paths, stats.n_completed, stats.n_capped, stats.mean_t_days,
              stats.std_t_days, stats.se_t_days, stats.mean_revenue,
              stats.std_revenue, stats.se_revenue]
    for q, v in stats.quantiles_t_days:
        names.append(f"q{int(q)}_T_days")
        values.append(v)
    with open(path, "w") as fh:
        fh.write(header_comment("simulation", config) + "\n")
        fh.write(",".join(names) + "\n")
        fh.write(",".join(_fmt(v) for v in values) + "\n")


def write_per_path_csv(path: str, paths: Mapping[str, np.ndarray],
                       config: Mapping[str, object]) -> None:
    n = len(paths["T_days"])
    write_csv(path, header_comment("paths", config), "path_id,T_days,revenue",
              (np.arange(n), paths["T_days"], paths["revenue"]))


def write_trajectories_csv(path: str, traj: Mapping[int, list],
                           config: Mapping[str, object]) -> None:
    ids, ts, ss, zs, vs = [], [], [], [], []
    for pid in sorted(traj):
        for (t, s, z, v) in traj[pid]:
            ids.append(pid)
            ts.append(t)
            ss.append(s)
            zs.append(z)
            vs.append(v)
    write_csv(path, header_comment("trajectories", config), "path_id,t,S,Z,v",
              (np.array(ids), np.array(ts), np.array(ss), np.array(zs), np.array(vs)))
