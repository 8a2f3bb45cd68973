"""Policy execution on simulated posterior-mean paths.

A switching policy is either the region classification extracted from a
solved surface or an explicit hysteresis pair (open at or above one level,
close at or below another). Policies are executed step by step along
reduced-process paths: decisions use only the current state, the running
payoff accrues by the trapezoid rule while the facility is open, and every
switch pays its fixed cost. Monte Carlo means over many paths estimate the
value of the policy from a given start, which cross-validates the PDE
solution (the extracted policy) and bounds it from below (any admissible
policy).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels, _rng
from .filtering import ReducedPath, reduced_path_matrix
from .vi_solver import ProblemSpec, SwitchingRegions


@dataclass(frozen=True)
class StrategyExecution:
    """One path's realized strategy: switch times, visited modes, payoff.

    modes[0] is the initial mode; modes[k+1] is the mode entered at
    switch_times[k], so consecutive entries always differ. The realized
    payoff splits into the running integral minus total switching cost;
    n_clamped counts path states outside the region grid (looked up at the
    nearest boundary node).
    """

    switch_times: np.ndarray
    modes: np.ndarray
    realized_payoff: float
    payoff_integral: float
    switching_cost: float
    n_opens: int
    n_closes: int
    n_clamped: int


@dataclass(frozen=True)
class MCEstimate:
    """Monte Carlo mean with its standard error (sample std / sqrt(n))."""

    mean: float
    std_err: float
    n_paths: int
    n_clamped: int = 0

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if not (self.std_err >= 0.0):
            raise ValueError("std_err must be >= 0")


def _check_start(spec: ProblemSpec, t0: float, initial_mode: int) -> None:
    if initial_mode not in (0, 1):
        raise ValueError(f"initial_mode must be 0 or 1, got {initial_mode}")
    if not (0.0 <= t0 <= spec.T):
        raise ValueError(f"t0={t0} outside [0, {spec.T}]")


def run_strategy(path: ReducedPath, regions: SwitchingRegions,
                 spec: ProblemSpec, t0: float, initial_mode: int) -> StrategyExecution:
    """Follow the region policy along one path.

    At each step strictly before the horizon the current (time level,
    nearest node, mode) is tested against the switch region of the current
    mode; on entry the mode flips and the cost is paid. Decisions only read
    the path up to the current step, so truncating the path cannot change
    earlier decisions.
    """
    _check_start(spec, t0, initial_mode)
    if abs(path.t0 - t0) > 1e-12 * max(1.0, spec.T):
        raise ValueError(f"path starts at {path.t0}, strategy starts at {t0}")
    grid = regions.grid
    n_t = regions.in_S0.shape[0] - 1
    dt_grid = spec.T / n_t
    times = path.times
    values = path.values

    mode = initial_mode
    switch_times = []
    modes = [initial_mode]
    integral = 0.0
    cost = 0.0
    n_opens = n_closes = n_clamped = 0

    for j in range(len(times) - 1):
        mj = values[j]
        idx = int(math.floor((mj - grid.x_min) / grid.dx + 0.5))
        if idx < 0:
            idx = 0
            n_clamped += 1
        elif idx > grid.n_x - 1:
            idx = grid.n_x - 1
            n_clamped += 1
        lvl = min(max(int(round(times[j] / dt_grid)), 0), n_t)
        if mode == 0:
            if regions.in_S0[lvl, idx]:
                mode = 1
                cost += spec.c01
                n_opens += 1
                switch_times.append(times[j])
                modes.append(1)
        else:
            if regions.in_S1[lvl, idx]:
                mode = 0
                cost += spec.c10
                n_closes += 1
                switch_times.append(times[j])
                modes.append(0)
        if mode == 1:
            dtp = times[j + 1] - times[j]
            integral += dtp * 0.5 * (spec.psi1(mj) + spec.psi1(values[j + 1]))

    return StrategyExecution(
        switch_times=np.array(switch_times),
        modes=np.array(modes, dtype=np.int64),
        realized_payoff=integral - cost,
        payoff_integral=integral,
        switching_cost=cost,
        n_opens=n_opens,
        n_closes=n_closes,
        n_clamped=n_clamped,
    )


def _estimate(values_fn, n_paths: int, n_steps: int, seed: int,
              chunk_size: int = 20000):
    """Stream chunks of per-path payoffs into a mean/variance accumulator."""
    total = 0.0
    total_sq = 0.0
    clamped = 0
    for lo in range(0, n_paths, chunk_size):
        hi = min(lo + chunk_size, n_paths)
        vals, clamp = values_fn(np.arange(lo, hi))
        total += float(np.sum(vals))
        total_sq += float(np.sum(vals * vals))
        clamped += int(clamp)
    mean = total / n_paths
    var = max(total_sq / n_paths - mean * mean, 0.0)
    std_err = math.sqrt(var / n_paths)
    return MCEstimate(mean=mean, std_err=std_err, n_paths=n_paths,
                      n_clamped=clamped)


def estimate_value(spec: ProblemSpec, regions: SwitchingRegions, t0: float,
                   m0: float, initial_mode: int, n_paths: int, n_steps: int,
                   seed: int) -> MCEstimate:
    """Mean realized payoff of the region policy over reduced-process paths.

    Path time steps should align with the region grid's levels (pass
    n_steps = n_t for t0 = 0); off-grid times are looked up at the nearest
    level. Deterministic given the seed, independent of chunking.
    """
    _check_start(spec, t0, initial_mode)
    if n_paths < 100:
        raise ValueError("n_paths must be >= 100 for a meaningful estimate")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    _rng.validate_seed(seed)
    grid = regions.grid
    n_t = regions.in_S0.shape[0] - 1
    dt_grid = spec.T / n_t
    dtp = (spec.T - t0) / n_steps
    step_times = t0 + dtp * np.arange(n_steps)
    level_idx = np.clip(np.rint(step_times / dt_grid).astype(np.int64), 0, n_t)

    def chunk_values(rows):
        _, X = reduced_path_matrix(m0, t0, spec.epsilon, spec.T, n_steps,
                                   seed, rows)
        integral, opens, closes, clamp = _kernels.policy_regions(
            X, level_idx, regions.in_S0, regions.in_S1, grid.x_min, grid.dx,
            spec.psi1_slope, spec.psi1_intercept, dtp, initial_mode)
        return integral - spec.c01 * opens - spec.c10 * closes, np.sum(clamp)

    return _estimate(chunk_values, n_paths, n_steps, seed)


def evaluate_threshold_strategy(spec: ProblemSpec, open_level: float,
                                close_level: float, t0: float, m0: float,
                                initial_mode: int, n_paths: int, n_steps: int,
                                seed: int) -> MCEstimate:
    """Monte Carlo value of the hysteresis policy (open >= open_level,
    close <= close_level). Requires close_level <= open_level; a crossed
    pair would switch both ways at one state and chatter without bound."""
    _check_start(spec, t0, initial_mode)
    if math.isnan(open_level) or math.isnan(close_level):
        raise ValueError("threshold levels must not be NaN")
    if not (close_level <= open_level):
        raise ValueError(
            f"need close_level <= open_level, got {close_level} > {open_level}")
    if n_paths < 100:
        raise ValueError("n_paths must be >= 100 for a meaningful estimate")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    _rng.validate_seed(seed)
    dtp = (spec.T - t0) / n_steps

    def chunk_values(rows):
        _, X = reduced_path_matrix(m0, t0, spec.epsilon, spec.T, n_steps,
                                   seed, rows)
        integral, opens, closes = _kernels.policy_threshold(
            X, open_level, close_level, spec.psi1_slope,
            spec.psi1_intercept, dtp, initial_mode)
        return integral - spec.c01 * opens - spec.c10 * closes, 0

    return _estimate(chunk_values, n_paths, n_steps, seed)
