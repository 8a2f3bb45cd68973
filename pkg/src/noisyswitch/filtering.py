"""Linear filtering of a Brownian signal observed in additive noise.

The signal is a Brownian motion W started at x. It is not observed directly;
the observation process integrates the signal and adds independent noise of
intensity epsilon:

    d xi_t = W_t dt + epsilon dB_t,        xi_0 = x.

Conditionally on the observation history, W_t is Gaussian. Its mean m_t and
variance theta_t satisfy the standard linear-filter equations

    d m_t     = theta_t / epsilon**2 * (d xi_t - m_t dt),   m_0 = x,
    d theta/dt = 1 - (theta / epsilon)**2,                  theta_0 = 0,

and the variance equation has the closed-form solution

    theta_t = epsilon * tanh(t / epsilon).

The innovations process N_t = (xi_t - xi_0) - int_0^t m_s ds is a Brownian
motion of intensity epsilon in the observation filtration, which turns the
posterior mean into a time-inhomogeneous martingale

    d m_t = tanh(t / epsilon) dR_t,   R a standard Brownian motion.

Decision problems that depend on the signal only through its posterior mean
can therefore be solved against the reduced process X with

    d X_s = tanh(s / epsilon) dW_s,   X_t = m,

which this module also simulates. epsilon = 0 means the signal is observed
perfectly; the reduced coefficient is then identically 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _rng

__all__ = [
    "FilterState",
    "PathSample",
    "ReducedPath",
    "InnovationsReport",
    "conditional_variance",
    "filter_gain",
    "simulate_joint_path",
    "simulate_reduced_path",
    "reduced_path_matrix",
    "joint_snapshots",
    "innovations_diagnostics",
]


def conditional_variance(t, epsilon):
    """Posterior variance theta_t = epsilon * tanh(t / epsilon).

    Accepts scalar or array t. Returns 0 for epsilon = 0 (perfect
    observation) and for t = 0 (degenerate prior).
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be nonnegative")
    if epsilon < 0:
        raise ValueError(f"epsilon must be nonnegative, got {epsilon}")
    if epsilon == 0.0:
        out = np.zeros_like(t)
    else:
        out = epsilon * np.tanh(t / epsilon)
    return out if out.ndim else float(out)


def filter_gain(t, epsilon):
    """Filter gain theta_t / epsilon**2 = tanh(t / epsilon) / epsilon."""
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    return np.tanh(np.asarray(t, dtype=float) / epsilon) / epsilon


@dataclass(frozen=True)
class FilterState:
    """Posterior state (mean, variance) of the signal at time t."""

    t: float
    m: float
    theta: float

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("time must be nonnegative")
        if self.theta < 0:
            raise ValueError("posterior variance must be nonnegative")

    @classmethod
    def at(cls, t: float, m: float, epsilon: float) -> "FilterState":
        return cls(t=float(t), m=float(m), theta=float(conditional_variance(t, epsilon)))


@dataclass(frozen=True)
class PathSample:
    """One jointly simulated realization of (W, xi, m, N) on a uniform grid.

    Arrays all have length n_steps + 1 and start at t = 0 with
    W[0] = xi[0] = m[0] = x and N[0] = 0. Instances are immutable and safe
    to share read-only.
    """

    epsilon: float
    dt: float
    times: np.ndarray
    W: np.ndarray
    xi: np.ndarray
    m: np.ndarray
    N: np.ndarray

    def __post_init__(self):
        n = len(self.times)
        if not (len(self.W) == len(self.xi) == len(self.m) == len(self.N) == n):
            raise ValueError("all path arrays must share one length")
        if n < 2:
            raise ValueError("a path needs at least two points")
        if not (self.W[0] == self.m[0] == self.xi[0]):
            raise ValueError("path must start with W[0] = m[0] = xi[0]")
        if self.N[0] != 0.0:
            raise ValueError("innovations must start at zero")

    @property
    def x(self) -> float:
        return float(self.W[0])


@dataclass(frozen=True)
class ReducedPath:
    """One realization of the reduced posterior-mean process X on [t0, T]."""

    epsilon: float
    t0: float
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(self.times) != len(self.values):
            raise ValueError("times and values must share one length")
        if len(self.times) < 2:
            raise ValueError("a path needs at least two points")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


@dataclass(frozen=True)
class InnovationsReport:
    """Sample diagnostics of the innovations increments of one path."""

    n_increments: int
    increment_mean: float
    increment_variance: float
    # increment variance normalized by its theoretical value epsilon**2 * dt
    variance_ratio: float
    xi_quadratic_variation: float


def innovations_adjustment(xi: np.ndarray, m: np.ndarray, dt: float) -> np.ndarray:
    """N[k] = (xi[k] - xi[0]) - sum_{j<k} m[j]*dt, the discrete innovations."""
    N = np.empty_like(xi)
    N[0] = 0.0
    N[1:] = (xi[1:] - xi[0]) - np.cumsum(m[:-1] * dt)
    return N


def _validate_horizon(T: float, n_steps: int, t0: float = 0.0) -> None:
    if T <= t0:
        raise ValueError(f"horizon T={T} must exceed the start time t0={t0}")
    if t0 < 0:
        raise ValueError(f"start time must be nonnegative, got {t0}")
    if n_steps < 1:
        raise ValueError(f"n_steps must be at least 1, got {n_steps}")


def simulate_joint_path(
    x: float,
    epsilon: float,
    T: float,
    n_steps: int,
    seed: int,
    path_index: int = 0,
) -> PathSample:
    """Simulate (W, xi, m, N) jointly from t = 0 by Euler stepping.

    Coefficients are evaluated at the left endpoint of each step; the filter
    gain uses the closed-form posterior variance. epsilon must be positive:
    with perfect observation the filter is the identity and there is nothing
    to simulate jointly.
    """
    if epsilon <= 0:
        raise ValueError(
            f"epsilon must be positive for a joint simulation, got {epsilon}"
        )
    _validate_horizon(T, n_steps)
    dt = T / n_steps
    times = np.linspace(0.0, T, n_steps + 1)

    z_sig = _rng.stream(seed, path_index, _rng.SIGNAL).standard_normal(n_steps)
    z_obs = _rng.stream(seed, path_index, _rng.NOISE).standard_normal(n_steps)

    W = np.empty(n_steps + 1)
    xi = np.empty(n_steps + 1)
    m = np.empty(n_steps + 1)
    W[0] = xi[0] = m[0] = x

    gains = filter_gain(times[:-1], epsilon)
    sq = np.sqrt(dt)
    for k in range(n_steps):
        d_xi = W[k] * dt + epsilon * sq * z_obs[k]
        W[k + 1] = W[k] + sq * z_sig[k]
        xi[k + 1] = xi[k] + d_xi
        m[k + 1] = m[k] + gains[k] * (d_xi - m[k] * dt)

    N = innovations_adjustment(xi, m, dt)
    return PathSample(epsilon=epsilon, dt=dt, times=times, W=W, xi=xi, m=m, N=N)


def joint_snapshots(
    x: float,
    epsilon: float,
    T: float,
    n_steps: int,
    seed: int,
    n_paths: int,
    snapshot_times,
    t0: float = 0.0,
    prior_std: float = 0.0,
    chunk_size: int = 5000,
):
    """March many joint paths, keeping only (W, m) at the requested times.

    Paths start at absolute time t0 with posterior mean x and signal
    W_{t0} = x + prior_std * Z (one draw per path from its prior series).
    Passing prior_std = sqrt(theta(t0)) makes the batch follow the filter's
    conditional law given m_{t0} = x; the gain schedule always uses absolute
    time. Returns {snapshot time: (W values, m values)} with arrays of
    length n_paths. Memory stays bounded: full paths are never stored.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    _validate_horizon(T, n_steps, t0)
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    dt = (T - t0) / n_steps
    times = t0 + dt * np.arange(n_steps + 1)
    snap_idx = []
    for s in snapshot_times:
        if not (t0 <= s <= T + 1e-12):
            raise ValueError(f"snapshot time {s} outside [{t0}, {T}]")
        snap_idx.append(int(round((s - t0) / dt)))

    gains = filter_gain(times[:-1], epsilon)
    sq = np.sqrt(dt)
    out = {s: (np.empty(n_paths), np.empty(n_paths)) for s in snapshot_times}

    for lo in range(0, n_paths, chunk_size):
        hi = min(lo + chunk_size, n_paths)
        rows = range(lo, hi)
        z_sig = _rng.normal_block(seed, _rng.SIGNAL, rows, n_steps)
        z_obs = _rng.normal_block(seed, _rng.NOISE, rows, n_steps)
        if prior_std != 0.0:
            z_pri = _rng.normal_block(seed, _rng.PRIOR, rows, 1)[:, 0]
        else:
            z_pri = 0.0

        W = np.full(hi - lo, float(x)) + prior_std * z_pri
        m = np.full(hi - lo, float(x))
        for s, k in zip(snapshot_times, snap_idx):
            if k == 0:
                out[s][0][lo:hi] = W
                out[s][1][lo:hi] = m
        for k in range(n_steps):
            d_xi = W * dt + epsilon * sq * z_obs[:, k]
            W = W + sq * z_sig[:, k]
            m = m + gains[k] * (d_xi - m * dt)
            for s, ks in zip(snapshot_times, snap_idx):
                if ks == k + 1:
                    out[s][0][lo:hi] = W
                    out[s][1][lo:hi] = m
    return out


def reduced_path_matrix(
    m0: float,
    t0: float,
    epsilon: float,
    T: float,
    n_steps: int,
    seed: int,
    path_indices,
):
    """Simulate the reduced process for each index in path_indices.

    Returns (times, X) with X of shape (len(path_indices), n_steps + 1) and
    X[:, 0] = m0. Row r is driven by stream (seed, path_indices[r], signal)
    and is identical to the single-path simulation with that index. The
    Euler step uses the left-endpoint coefficient tanh(t_k / epsilon)
    (identically 1 when epsilon = 0).
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be nonnegative, got {epsilon}")
    _validate_horizon(T, n_steps, t0)
    dt = (T - t0) / n_steps
    times = t0 + dt * np.arange(n_steps + 1)
    if epsilon == 0.0:
        coeff = np.ones(n_steps)
    else:
        coeff = np.tanh(times[:-1] / epsilon)

    rows = list(path_indices)
    z = _rng.normal_block(seed, _rng.SIGNAL, rows, n_steps)
    X = np.empty((len(rows), n_steps + 1))
    X[:, 0] = m0
    steps = (coeff * np.sqrt(dt)) * z
    np.cumsum(steps, axis=1, out=steps)
    X[:, 1:] = m0 + steps
    return times, X


def simulate_reduced_path(
    m0: float,
    t0: float,
    epsilon: float,
    T: float,
    n_steps: int,
    seed: int,
    path_index: int = 0,
) -> ReducedPath:
    """Simulate one reduced-process path X on [t0, T] with X_{t0} = m0."""
    times, X = reduced_path_matrix(m0, t0, epsilon, T, n_steps, seed, [path_index])
    return ReducedPath(epsilon=epsilon, t0=t0, times=times, values=X[0])


def innovations_diagnostics(path: PathSample) -> InnovationsReport:
    """Sample statistics of the innovations increments of one path.

    The increments of N are Gaussian with mean 0 and variance
    epsilon**2 * dt (up to the discretization's O(dt) correction), so the
    reported variance_ratio targets 1. The quadratic variation of xi
    targets epsilon**2 * T.
    """
    if len(path.times) < 2:
        raise ValueError("diagnostics need at least two path points")
    dN = np.diff(path.N)
    d_xi = np.diff(path.xi)
    var = float(np.var(dN, ddof=1)) if len(dN) > 1 else 0.0
    return InnovationsReport(
        n_increments=len(dN),
        increment_mean=float(np.mean(dN)),
        increment_variance=var,
        variance_ratio=var / (path.epsilon**2 * path.dt),
        xi_quadratic_variation=float(np.sum(d_xi * d_xi)),
    )
