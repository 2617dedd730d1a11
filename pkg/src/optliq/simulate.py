"""Monte Carlo verification of the optimal strategy.

Two independent estimators are provided: a simulation of the liquidation
itself in market coordinates (price by exact geometric-Brownian increments,
inventory by explicit Euler under the optimal rate), and a simulation of the
variance-time control problem whose value coincides with the reduced profile
u, giving a PDE-free estimate of u(x0).

Randomness is counter-based: the normal consumed by path i at step t is a
fixed function of (seed, stream, t, i), obtained from Philox raw output
mapped through the inverse normal CDF.  Draws therefore do not depend on how
paths are grouped into blocks or which paths have already stopped, so serial
and thread-parallel runs produce bit-identical results.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import ValidationError
from .model import MarketState, ModelParams, ReducedParams, reduce
from .solution import SolutionProfile, price_impact

_INV_2_53 = 2.0 ** -53

# stream ids keep the draw cells of the two simulators disjoint
_STREAM_LIQUIDATION = 0
_STREAM_TRANSFORMED = 1


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo configuration.

    ``dt`` is the physical step in years (default: 5 seconds of a 250-day,
    8-hour trading year).  ``dt_hat`` is the step of the variance-time
    simulator, in variance years; marching that clock at the physical default
    would take ~1e7 steps per variance year, hence the separate, coarser
    default.  ``t_max`` caps each path in the clock of its own simulator
    (years for the liquidation run, variance years for the transformed run);
    capped paths are disclosed, never silently included.  ``workers`` and
    ``block_size`` only control thread-parallel execution over path blocks;
    they never change the results.
    """

    n_paths: int = 10_000
    dt: float = 1.0 / (250 * 8 * 60 * 12)
    seed: int = 0
    z_stop_rel: float = 1e-6
    t_max: float = 5.0
    dt_hat: float = 2e-5
    workers: int = 1
    block_size: int = 16384

    def __post_init__(self):
        if not self.n_paths >= 1:
            raise ValidationError(f"n_paths must be >= 1, got {self.n_paths}")
        if not self.dt > 0.0 or not self.dt_hat > 0.0:
            raise ValidationError("time steps must be positive")
        if not 0.0 < self.z_stop_rel < 1e-2:
            raise ValidationError(
                f"z_stop_rel must lie in (0, 1e-2), got {self.z_stop_rel}")
        if not self.t_max > 0.0:
            raise ValidationError(f"t_max must be positive, got {self.t_max}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValidationError("seed must fit in 64 bits")
        if self.workers < 1 or self.block_size < 4:
            raise ValidationError("workers must be >= 1 and block_size >= 4")


@dataclass(frozen=True)
class SimStats:
    """Aggregate liquidation statistics over completed paths.

    Times are reported in trading days (250 per year).  ``n_capped`` counts
    paths stopped by the horizon cap; they are excluded from the statistics.
    """

    n_paths: int
    n_completed: int
    n_capped: int
    mean_t_days: float
    std_t_days: float
    se_t_days: float
    quantiles_t_days: tuple[tuple[float, float], ...]
    mean_revenue: float
    std_revenue: float
    se_revenue: float
    dt: float
    seed: int


@dataclass(frozen=True)
class TransformedEstimate:
    """Monte Carlo estimate of the reduced value u(x0) with its standard error."""

    x0: float
    estimate: float
    se: float
    n_paths: int
    n_capped: int


class _NormalSource:
    """Counter-based standard normals, one Philox word per draw.

    The draw for (step, path position i) is indexed by the counter
    (i//4, step, stream, 0) and the lane i%4, so it never depends on
    blocking or on which other paths are still alive.  One bit generator is
    reused per source (not thread-safe; use one source per worker).
    """

    def __init__(self, seed: int, stream: int):
        self._bg = np.random.Philox(key=seed)
        self._template = self._bg.state
        self._key = self._template["state"]["key"]
        self._stream = stream

    def draws(self, step: int, lo: int, hi: int) -> np.ndarray:
        """Standard normals for absolute path positions [lo, hi) at one step."""
        lo_aligned = (int(lo) // 4) * 4
        state = dict(self._template)
        state["state"] = {"counter": np.array([lo_aligned // 4, step, self._stream, 0],
                                              dtype=np.uint64),
                          "key": self._key}
        state["buffer_pos"] = 4
        self._bg.state = state
        raw = self._bg.random_raw(int(hi) - lo_aligned)[int(lo) - lo_aligned:]
        u = (raw >> np.uint64(11)).astype(np.float64) * _INV_2_53 + 0.5 * _INV_2_53
        return ndtri(u)


def _normal_draws(seed: int, stream: int, step: int, lo: int, hi: int) -> np.ndarray:
    return _NormalSource(seed, stream).draws(step, lo, hi)


def _blocks(n_paths: int, block_size: int):
    return [(lo, min(lo + block_size, n_paths))
            for lo in range(0, n_paths, block_size)]


def _run_blocks(fn, blocks, workers):
    if workers == 1 or len(blocks) == 1:
        for blk in blocks:
            fn(blk)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fn, blocks))


def _check_profile_matches(profile: SolutionProfile, params: ModelParams):
    red = reduce(params)
    if abs(red.a - profile.a) > 1e-10 or abs(red.b - profile.b) > 1e-10:
        raise ValidationError(
            f"profile (a={profile.a}, b={profile.b}) does not match the model "
            f"parameters (a={red.a}, b={red.b})")


def simulate_liquidation(profile: SolutionProfile, params: ModelParams,
                         state0: MarketState, config: SimConfig | None = None,
                         return_paths: bool = False,
                         record_paths: int = 0, record_stride: int = 200):
    """Simulate the liquidation under the optimal rate and aggregate statistics.

    Per path: S moves by the exact GBM increment, Z by explicit Euler
    dZ = (r Z - v*) dt with the rate read off the profile, and discounted
    revenue accrues as exp(-rho t) (S - eta v*) v* dt with compensated
    summation.  A path stops when Z falls to ``z_stop_rel`` of the initial
    inventory, or at the horizon cap (disclosed via ``n_capped``).  The mean
    discounted revenue estimates the value function at (s0, z0).

    With ``return_paths`` the per-path outcomes are returned next to the
    stats; ``record_paths`` additionally captures thinned (t, S, Z, v)
    trajectories for the first so many paths.
    """
    cfg = config if config is not None else SimConfig()
    _check_profile_matches(profile, params)
    if not state0.z > 0.0:
        raise ValidationError("liquidation simulation needs z0 > 0")
    n = cfg.n_paths
    dt = cfg.dt
    z_thr = cfg.z_stop_rel * state0.z
    max_steps = math.ceil(cfg.t_max / dt)
    chi_coef = params.eta * params.sigma ** 2
    inv_2eta = 1.0 / (2.0 * params.eta)
    gbm_drift = (params.lam - 0.5 * params.sigma ** 2) * dt
    gbm_vol = params.sigma * math.sqrt(dt)

    T_years = np.full(n, np.nan)
    revenue = np.full(n, np.nan)
    capped = np.zeros(n, dtype=bool)
    traj: dict[int, list[tuple[float, float, float, float]]] = {
        i: [] for i in range(min(record_paths, n))}

    def run_block(blk):
        lo, hi = blk
        rng = _NormalSource(cfg.seed, _STREAM_LIQUIDATION)
        S = np.full(hi - lo, float(state0.s))
        Z = np.full(hi - lo, float(state0.z))
        rev = np.zeros(hi - lo)
        comp = np.zeros(hi - lo)
        pos = np.arange(lo, hi)  # absolute ids of the still-active paths
        step = 0
        while pos.size and step < max_steps:
            xi = rng.draws(step, pos[0], pos[-1] + 1)[pos - pos[0]]
            chi = chi_coef * Z / S
            _, du = profile.eval(chi)
            v = S * (1.0 - du) * inv_2eta
            flow = (math.exp(-params.rho * (step * dt)) * dt) * (S - params.eta * v) * v
            y = flow - comp
            t_sum = rev + y
            comp = (t_sum - rev) - y
            rev = t_sum
            if traj and step % record_stride == 0:
                for k, pid in enumerate(pos):
                    if pid >= record_paths:
                        break
                    traj[pid].append((step * dt, S[k], Z[k], v[k]))
            Z = np.maximum(Z + (params.r * Z - v) * dt, 0.0)
            S = S * np.exp(gbm_drift + gbm_vol * xi)
            step += 1
            done = Z <= z_thr
            if done.any():
                fin = pos[done]
                T_years[fin] = step * dt
                revenue[fin] = rev[done] + comp[done]
                keep = ~done
                pos, S, Z, rev, comp = (pos[keep], S[keep], Z[keep],
                                        rev[keep], comp[keep])
        capped[pos] = True

    _run_blocks(run_block, _blocks(n, cfg.block_size), cfg.workers)

    done_mask = ~capped
    t_days = T_years[done_mask] * 250.0
    rev_done = revenue[done_mask]
    m = int(done_mask.sum())
    if m:
        qs = (5.0, 25.0, 50.0, 75.0, 95.0)
        quants = tuple((q, float(np.percentile(t_days, q))) for q in qs)
        stats = SimStats(
            n_paths=n, n_completed=m, n_capped=n - m,
            mean_t_days=float(np.mean(t_days)),
            std_t_days=float(np.std(t_days, ddof=1)) if m > 1 else 0.0,
            se_t_days=float(np.std(t_days, ddof=1) / math.sqrt(m)) if m > 1 else 0.0,
            quantiles_t_days=quants,
            mean_revenue=float(np.mean(rev_done)),
            std_revenue=float(np.std(rev_done, ddof=1)) if m > 1 else 0.0,
            se_revenue=float(np.std(rev_done, ddof=1) / math.sqrt(m)) if m > 1 else 0.0,
            dt=dt, seed=cfg.seed)
    else:
        stats = SimStats(n_paths=n, n_completed=0, n_capped=n,
                         mean_t_days=float("nan"), std_t_days=float("nan"),
                         se_t_days=float("nan"), quantiles_t_days=(),
                         mean_revenue=float("nan"), std_revenue=float("nan"),
                         se_revenue=float("nan"), dt=dt, seed=cfg.seed)
    if not return_paths:
        return stats
    paths = {"T_days": T_years * 250.0, "revenue": revenue, "capped": capped}
    return stats, paths, traj


def simulate_transformed(profile: SolutionProfile, reduced: ReducedParams,
                         params: ModelParams, x0: float,
                         config: SimConfig | None = None) -> TransformedEstimate:
    """Estimate the reduced value u(x0) from the variance-time control problem.

    Per path the state follows
        dX = (((r - lam - sigma^2)/sigma^2) X - g) dt + X dW
    on the variance-year clock with the control g = (1 - du(X))/2 read off
    the profile, and the payoff accrues exp(-q t) g (1 - g) dt with
    q = (rho - 2 lam - sigma^2)/sigma^2 until X hits the stop threshold.
    Since du is clamped into [0, 1], g stays in [0, 1/2] along every path.
    """
    cfg = config if config is not None else SimConfig()
    _check_profile_matches(profile, params)
    if abs(reduced.a - profile.a) > 1e-10 or abs(reduced.b - profile.b) > 1e-10:
        raise ValidationError("reduced pair does not match the profile")
    if x0 < 0.0:
        raise ValidationError("x0 must be non-negative")
    if x0 == 0.0:
        return TransformedEstimate(x0=0.0, estimate=0.0, se=0.0,
                                   n_paths=cfg.n_paths, n_capped=0)
    n = cfg.n_paths
    dt = cfg.dt_hat
    s2 = params.sigma ** 2
    drift_coef = (params.r - params.lam - s2) / s2
    q = (params.rho - 2.0 * params.lam - s2) / s2
    x_thr = cfg.z_stop_rel * x0
    max_steps = math.ceil(cfg.t_max / dt)
    sq_dt = math.sqrt(dt)

    payoff = np.zeros(n)
    capped = np.zeros(n, dtype=bool)

    def run_block(blk):
        lo, hi = blk
        rng = _NormalSource(cfg.seed, _STREAM_TRANSFORMED)
        X = np.full(hi - lo, float(x0))
        pay = np.zeros(hi - lo)
        comp = np.zeros(hi - lo)
        pos = np.arange(lo, hi)
        step = 0
        while pos.size and step < max_steps:
            xi = rng.draws(step, pos[0], pos[-1] + 1)[pos - pos[0]]
            _, du = profile.eval(X)
            g = 0.5 * (1.0 - du)
            flow = (math.exp(-q * (step * dt)) * dt) * g * (1.0 - g)
            y = flow - comp
            t_sum = pay + y
            comp = (t_sum - pay) - y
            pay = t_sum
            X = np.maximum(X + (drift_coef * X - g) * dt + X * sq_dt * xi, 0.0)
            step += 1
            done = X <= x_thr
            if done.any():
                fin = pos[done]
                payoff[fin] = pay[done] + comp[done]
                keep = ~done
                pos, X, pay, comp = pos[keep], X[keep], pay[keep], comp[keep]
        capped[pos] = True
        payoff[pos] = pay + comp

    _run_blocks(run_block, _blocks(n, cfg.block_size), cfg.workers)

    est = float(np.mean(payoff))
    se = float(np.std(payoff, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return TransformedEstimate(x0=float(x0), estimate=est, se=se, n_paths=n,
                               n_capped=int(capped.sum()))


@dataclass(frozen=True)
class SqrtLawFit:
    """Least-squares power-law fit of impact against block size."""

    exponent: float
    prefactor: float
    max_residual: float
    n_used: int


def empirical_sqrt_fit(profile: SolutionProfile, params: ModelParams, s: float,
                       z_grid) -> SqrtLawFit:
    """Fit log I = log C + p log z over a block-size sweep.

    Returns the fitted exponent p, the prefactor C = exp(intercept), and the
    maximum log-residual.  Block sizes with impact below 1e-12 sit at the
    numerical noise floor and are dropped with a warning.
    """
    z = np.asarray(z_grid, dtype=float)
    if z.size < 2 or np.unique(z).size < 2:
        raise ValidationError("sqrt-law fit needs at least two distinct block sizes")
    impacts = np.array([price_impact(profile, params, MarketState(s=s, z=zi)).impact
                        for zi in z])
    ok = impacts > 1e-12
    if not np.all(ok):
        warnings.warn(f"dropping {int((~ok).sum())} block sizes with impact "
                      "below 1e-12", RuntimeWarning, stacklevel=2)
    z, impacts = z[ok], impacts[ok]
    if z.size < 2:
        raise ValidationError("too few usable block sizes after the underflow cut")
    lz, li = np.log(z), np.log(impacts)
    slope, intercept = np.polyfit(lz, li, 1)
    resid = float(np.max(np.abs(li - (slope * lz + intercept))))
    return SqrtLawFit(exponent=float(slope), prefactor=float(math.exp(intercept)),
                      max_residual=resid, n_used=int(z.size))
