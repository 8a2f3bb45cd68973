"""Hot numerical kernels with a numba lane and a pure-numpy lane.

The numba lane compiles the ``*_loops`` bodies with ``@njit``; the numpy
lane uses vectorized equivalents (LAPACK banded solves, red-black sweeps).
Lane selection happens once at import: numba is used when importable unless
the environment variable ``NOISYSWITCH_DISABLE_NUMBA`` is set to
1/true/yes/on. Both lanes implement identical numerics; `benchmarks/`
contains a script comparing their speed.

Status codes returned by the march kernels:
    0  converged
    1  inner obstacle iteration hit max_inner without meeting tolerance
    2  non-finite values appeared
"""

from __future__ import annotations

import math
import os

import numpy as np
import scipy.linalg

DISABLE_ENV = "NOISYSWITCH_DISABLE_NUMBA"

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via the env flag lane
    numba = None
    HAVE_NUMBA = False


def _env_disabled() -> bool:
    return os.environ.get(DISABLE_ENV, "").strip().lower() in {"1", "true", "yes", "on"}


NUMBA_ENABLED = HAVE_NUMBA and not _env_disabled()

OK = 0
NO_CONVERGENCE = 1
NOT_FINITE = 2


# ---------------------------------------------------------------------------
# loop bodies (numba-compilable; also runnable as plain python in tests)
# ---------------------------------------------------------------------------


def _march_clamp_loops(mu, src0, src1, c01, c10, tol_factor, max_inner):
    """Backward Crank-Nicolson march with solve-then-clamp obstacle coupling.

    mu[k] = a(t_{k+1/2}) * dt / (2 dx^2) for the step from level k+1 to k;
    src_i = dt * psi_i. Boundary rows impose a zero second difference,
    folded into the interior tridiagonal system. At each level the two
    unconstrained solves are clamped against each other's obstacle,
    alternating modes until the sup-norm change drops below
    tol_factor * (1 + max |v|).
    """
    n_t = mu.shape[0]
    n_x = src0.shape[0]
    m = n_x - 2
    v0 = np.zeros((n_t + 1, n_x))
    v1 = np.zeros((n_t + 1, n_x))

    rhs0 = np.empty(m)
    rhs1 = np.empty(m)
    u0 = np.empty(n_x)
    u1 = np.empty(n_x)
    w0 = np.empty(n_x)
    w1 = np.empty(n_x)
    cp = np.empty(m)

    status = OK
    bad_level = -1
    residual = 0.0

    for k in range(n_t - 1, -1, -1):
        mk = mu[k]
        diag = 1.0 + 2.0 * mk
        prev0 = v0[k + 1]
        prev1 = v1[k + 1]

        # explicit half plus source, interior nodes only
        for j in range(1, n_x - 1):
            d2_0 = prev0[j - 1] - 2.0 * prev0[j] + prev0[j + 1]
            d2_1 = prev1[j - 1] - 2.0 * prev1[j] + prev1[j + 1]
            rhs0[j - 1] = prev0[j] + mk * d2_0 + src0[j]
            rhs1[j - 1] = prev1[j] + mk * d2_1 + src1[j]

        # Thomas on the folded system: rows 0 and m-1 are identity rows
        # (the zero-curvature fold cancels their off-diagonal entries)
        cp[0] = 0.0
        u0[1] = rhs0[0]
        u1[1] = rhs1[0]
        for i in range(1, m - 1):
            denom = diag - (-mk) * cp[i - 1]
            cp[i] = -mk / denom
            u0[i + 1] = (rhs0[i] + mk * u0[i]) / denom
            u1[i + 1] = (rhs1[i] + mk * u1[i]) / denom
        # last row: identity
        u0[n_x - 2] = rhs0[m - 1]
        u1[n_x - 2] = rhs1[m - 1]
        for i in range(m - 2, -1, -1):
            u0[i + 1] = u0[i + 1] - cp[i] * u0[i + 2]
            u1[i + 1] = u1[i + 1] - cp[i] * u1[i + 2]

        # linear extrapolation at the boundary nodes
        u0[0] = 2.0 * u0[1] - u0[2]
        u0[n_x - 1] = 2.0 * u0[n_x - 2] - u0[n_x - 3]
        u1[0] = 2.0 * u1[1] - u1[2]
        u1[n_x - 1] = 2.0 * u1[n_x - 2] - u1[n_x - 3]

        # obstacle clamping, Gauss-Seidel over the mode index
        vmax = 0.0
        for j in range(n_x):
            w0[j] = u0[j]
            w1[j] = u1[j]
            a0 = abs(u0[j])
            a1 = abs(u1[j])
            if a0 > vmax:
                vmax = a0
            if a1 > vmax:
                vmax = a1
        tol = tol_factor * (1.0 + vmax)

        converged = False
        for _ in range(max_inner):
            change = 0.0
            for j in range(n_x):
                y0 = w1[j] - c01
                if u0[j] > y0:
                    y0 = u0[j]
                d = abs(y0 - w0[j])
                if d > change:
                    change = d
                w0[j] = y0
                y1 = w0[j] - c10
                if u1[j] > y1:
                    y1 = u1[j]
                d = abs(y1 - w1[j])
                if d > change:
                    change = d
                w1[j] = y1
            if change < tol:
                converged = True
                break
        if not converged:
            status = NO_CONVERGENCE
            bad_level = k
            residual = change

        for j in range(n_x):
            v0[k, j] = w0[j]
            v1[k, j] = w1[j]

    return v0, v1, status, bad_level, residual


def _march_psor_loops(mu, src0, src1, c01, c10, tol_factor, max_inner, omega):
    """Backward march solving each level's coupled obstacle problem by
    projected SOR, alternating one sweep per mode."""
    n_t = mu.shape[0]
    n_x = src0.shape[0]
    m = n_x - 2
    v0 = np.zeros((n_t + 1, n_x))
    v1 = np.zeros((n_t + 1, n_x))

    rhs0 = np.empty(m)
    rhs1 = np.empty(m)
    w0 = np.empty(n_x)
    w1 = np.empty(n_x)

    status = OK
    bad_level = -1
    residual = 0.0

    for k in range(n_t - 1, -1, -1):
        mk = mu[k]
        diag = 1.0 + 2.0 * mk

        prev0 = v0[k + 1]
        prev1 = v1[k + 1]
        vmax = 0.0
        for j in range(1, n_x - 1):
            d2_0 = prev0[j - 1] - 2.0 * prev0[j] + prev0[j + 1]
            d2_1 = prev1[j - 1] - 2.0 * prev1[j] + prev1[j + 1]
            rhs0[j - 1] = prev0[j] + mk * d2_0 + src0[j]
            rhs1[j - 1] = prev1[j] + mk * d2_1 + src1[j]
        for j in range(n_x):
            w0[j] = prev0[j]
            w1[j] = prev1[j]
            a0 = abs(prev0[j])
            a1 = abs(prev1[j])
            if a0 > vmax:
                vmax = a0
            if a1 > vmax:
                vmax = a1
        tol = tol_factor * (1.0 + vmax)

        converged = False
        for _ in range(max_inner):
            change = 0.0
            # mode 0 sweep with mode 1 obstacle
            for i in range(m):
                j = i + 1
                if i == 0 or i == m - 1:
                    y = rhs0[i]
                else:
                    y = (rhs0[i] + mk * (w0[j - 1] + w0[j + 1])) / diag
                y = w0[j] + omega * (y - w0[j])
                ob = w1[j] - c01
                if y < ob:
                    y = ob
                d = abs(y - w0[j])
                if d > change:
                    change = d
                w0[j] = y
            # mode 1 sweep with the fresh mode 0 iterate in the obstacle
            for i in range(m):
                j = i + 1
                if i == 0 or i == m - 1:
                    y = rhs1[i]
                else:
                    y = (rhs1[i] + mk * (w1[j - 1] + w1[j + 1])) / diag
                y = w1[j] + omega * (y - w1[j])
                ob = w0[j] - c10
                if y < ob:
                    y = ob
                d = abs(y - w1[j])
                if d > change:
                    change = d
                w1[j] = y
            if change < tol:
                converged = True
                break
        if not converged:
            status = NO_CONVERGENCE
            bad_level = k
            residual = change

        # boundary nodes: extrapolate, then settle the joint clamp
        e0l = 2.0 * w0[1] - w0[2]
        e1l = 2.0 * w1[1] - w1[2]
        e0r = 2.0 * w0[n_x - 2] - w0[n_x - 3]
        e1r = 2.0 * w1[n_x - 2] - w1[n_x - 3]
        b0 = max(e0l, e1l - c01)
        w0[0] = b0
        w1[0] = max(e1l, b0 - c10)
        b0 = max(e0r, e1r - c01)
        w0[n_x - 1] = b0
        w1[n_x - 1] = max(e1r, b0 - c10)

        for j in range(n_x):
            v0[k, j] = w0[j]
            v1[k, j] = w1[j]

    return v0, v1, status, bad_level, residual


def _policy_regions_loops(paths, level_idx, in_s0, in_s1, x_min, dx,
                          slope, intercept, dtp, init_mode):
    """Execute the region-based switching policy on a batch of paths.

    Decisions happen at steps 0..K-1 (strictly before the horizon). The
    mode-1 running payoff is accumulated by the trapezoid rule over each
    step. States outside the grid clamp to the nearest node and are counted.
    """
    n_paths, n_pts = paths.shape
    n_steps = n_pts - 1
    n_x = in_s0.shape[1]

    integral = np.zeros(n_paths)
    opens = np.zeros(n_paths, dtype=np.int64)
    closes = np.zeros(n_paths, dtype=np.int64)
    clamped = np.zeros(n_paths, dtype=np.int64)

    for p in range(n_paths):
        mode = init_mode
        acc = 0.0
        for j in range(n_steps):
            mj = paths[p, j]
            idx = int(math.floor((mj - x_min) / dx + 0.5))
            if idx < 0:
                idx = 0
                clamped[p] += 1
            elif idx > n_x - 1:
                idx = n_x - 1
                clamped[p] += 1
            lvl = level_idx[j]
            if mode == 0:
                if in_s0[lvl, idx]:
                    mode = 1
                    opens[p] += 1
            else:
                if in_s1[lvl, idx]:
                    mode = 0
                    closes[p] += 1
            if mode == 1:
                pj = slope * mj + intercept
                pj1 = slope * paths[p, j + 1] + intercept
                acc += dtp * 0.5 * (pj + pj1)
        integral[p] = acc

    return integral, opens, closes, clamped


def _policy_threshold_loops(paths, open_level, close_level,
                            slope, intercept, dtp, init_mode):
    """Execute a two-threshold policy: open at or above open_level while
    closed, close at or below close_level while open."""
    n_paths, n_pts = paths.shape
    n_steps = n_pts - 1

    integral = np.zeros(n_paths)
    opens = np.zeros(n_paths, dtype=np.int64)
    closes = np.zeros(n_paths, dtype=np.int64)

    for p in range(n_paths):
        mode = init_mode
        acc = 0.0
        for j in range(n_steps):
            mj = paths[p, j]
            if mode == 0:
                if mj >= open_level:
                    mode = 1
                    opens[p] += 1
            else:
                if mj <= close_level:
                    mode = 0
                    closes[p] += 1
            if mode == 1:
                pj = slope * mj + intercept
                pj1 = slope * paths[p, j + 1] + intercept
                acc += dtp * 0.5 * (pj + pj1)
        integral[p] = acc

    return integral, opens, closes


# ---------------------------------------------------------------------------
# numpy lane
# ---------------------------------------------------------------------------


def _solve_folded_banded(mk, rhs):
    """Solve the folded interior system for one level; rhs is (m, n_rhs)."""
    m = rhs.shape[0]
    ab = np.zeros((3, m))
    ab[0, 1:] = -mk
    ab[0, 1] = 0.0  # first row is an identity row
    ab[1, :] = 1.0 + 2.0 * mk
    ab[1, 0] = ab[1, m - 1] = 1.0
    ab[2, :-1] = -mk
    ab[2, m - 2] = 0.0  # last row is an identity row
    return scipy.linalg.solve_banded((1, 1), ab, rhs, check_finite=False)


def _extrapolate(u):
    u[0] = 2.0 * u[1] - u[2]
    u[-1] = 2.0 * u[-2] - u[-3]


def _clamp_modes(u0, u1, c01, c10, tol, max_inner):
    """Alternate the two modes' obstacle projections to their fixed point."""
    w0 = u0.copy()
    w1 = u1.copy()
    for _ in range(max_inner):
        n0 = np.maximum(u0, w1 - c01)
        n1 = np.maximum(u1, n0 - c10)
        change = max(np.max(np.abs(n0 - w0)), np.max(np.abs(n1 - w1)))
        w0, w1 = n0, n1
        if change < tol:
            return w0, w1, True, 0.0
    return w0, w1, False, change


def _march_clamp_numpy(mu, src0, src1, c01, c10, tol_factor, max_inner):
    n_t = mu.shape[0]
    n_x = src0.shape[0]
    v0 = np.zeros((n_t + 1, n_x))
    v1 = np.zeros((n_t + 1, n_x))

    status = OK
    bad_level = -1
    residual = 0.0

    for k in range(n_t - 1, -1, -1):
        mk = mu[k]
        prev0 = v0[k + 1]
        prev1 = v1[k + 1]
        rhs = np.empty((n_x - 2, 2))
        rhs[:, 0] = (prev0[1:-1] + mk * (prev0[:-2] - 2.0 * prev0[1:-1] + prev0[2:])
                     + src0[1:-1])
        rhs[:, 1] = (prev1[1:-1] + mk * (prev1[:-2] - 2.0 * prev1[1:-1] + prev1[2:])
                     + src1[1:-1])
        sol = _solve_folded_banded(mk, rhs)
        u0 = np.empty(n_x)
        u1 = np.empty(n_x)
        u0[1:-1] = sol[:, 0]
        u1[1:-1] = sol[:, 1]
        _extrapolate(u0)
        _extrapolate(u1)

        tol = tol_factor * (1.0 + max(np.max(np.abs(u0)), np.max(np.abs(u1))))
        w0, w1, ok, res = _clamp_modes(u0, u1, c01, c10, tol, max_inner)
        if not ok:
            status = NO_CONVERGENCE
            bad_level = k
            residual = res
        v0[k] = w0
        v1[k] = w1

    return v0, v1, status, bad_level, residual


def _psor_color_pass(w, rhs, mk, diag, omega, obstacle, color):
    """One red-black half-sweep over interior nodes of the given parity."""
    m = rhs.shape[0]
    idx = np.arange(color, m, 2)
    # folded identity rows carry no neighbor coupling
    ends = (idx == 0) | (idx == m - 1)
    j = idx + 1
    y = np.where(ends, rhs[idx], (rhs[idx] + mk * (w[j - 1] + w[j + 1])) / diag)
    y = w[j] + omega * (y - w[j])
    y = np.maximum(y, obstacle[j])
    change = np.max(np.abs(y - w[j])) if len(idx) else 0.0
    w[j] = y
    return change


def _march_psor_numpy(mu, src0, src1, c01, c10, tol_factor, max_inner, omega):
    n_t = mu.shape[0]
    n_x = src0.shape[0]
    v0 = np.zeros((n_t + 1, n_x))
    v1 = np.zeros((n_t + 1, n_x))

    status = OK
    bad_level = -1
    residual = 0.0

    for k in range(n_t - 1, -1, -1):
        mk = mu[k]
        diag = 1.0 + 2.0 * mk
        prev0 = v0[k + 1]
        prev1 = v1[k + 1]
        rhs0 = (prev0[1:-1] + mk * (prev0[:-2] - 2.0 * prev0[1:-1] + prev0[2:])
                + src0[1:-1])
        rhs1 = (prev1[1:-1] + mk * (prev1[:-2] - 2.0 * prev1[1:-1] + prev1[2:])
                + src1[1:-1])
        w0 = prev0.copy()
        w1 = prev1.copy()
        tol = tol_factor * (1.0 + max(np.max(np.abs(w0)), np.max(np.abs(w1))))

        converged = False
        for _ in range(max_inner):
            change = 0.0
            ob0 = w1 - c01
            change = max(change, _psor_color_pass(w0, rhs0, mk, diag, omega, ob0, 0))
            change = max(change, _psor_color_pass(w0, rhs0, mk, diag, omega, ob0, 1))
            ob1 = w0 - c10
            change = max(change, _psor_color_pass(w1, rhs1, mk, diag, omega, ob1, 0))
            change = max(change, _psor_color_pass(w1, rhs1, mk, diag, omega, ob1, 1))
            if change < tol:
                converged = True
                break
        if not converged:
            status = NO_CONVERGENCE
            bad_level = k
            residual = change

        e0l = 2.0 * w0[1] - w0[2]
        e1l = 2.0 * w1[1] - w1[2]
        e0r = 2.0 * w0[-2] - w0[-3]
        e1r = 2.0 * w1[-2] - w1[-3]
        b0 = max(e0l, e1l - c01)
        w0[0] = b0
        w1[0] = max(e1l, b0 - c10)
        b0 = max(e0r, e1r - c01)
        w0[-1] = b0
        w1[-1] = max(e1r, b0 - c10)

        v0[k] = w0
        v1[k] = w1

    return v0, v1, status, bad_level, residual


def _policy_regions_numpy(paths, level_idx, in_s0, in_s1, x_min, dx,
                          slope, intercept, dtp, init_mode):
    n_paths, n_pts = paths.shape
    n_steps = n_pts - 1
    n_x = in_s0.shape[1]

    integral = np.zeros(n_paths)
    opens = np.zeros(n_paths, dtype=np.int64)
    closes = np.zeros(n_paths, dtype=np.int64)
    clamped = np.zeros(n_paths, dtype=np.int64)
    mode = np.full(n_paths, init_mode, dtype=np.int64)

    for j in range(n_steps):
        mj = paths[:, j]
        raw = np.floor((mj - x_min) / dx + 0.5).astype(np.int64)
        out = (raw < 0) | (raw > n_x - 1)
        clamped += out
        idx = np.clip(raw, 0, n_x - 1)
        lvl = level_idx[j]
        open_now = (mode == 0) & in_s0[lvl, idx]
        close_now = (mode == 1) & in_s1[lvl, idx]
        opens += open_now
        closes += close_now
        mode = np.where(open_now, 1, np.where(close_now, 0, mode))
        earning = mode == 1
        pj = slope * mj + intercept
        pj1 = slope * paths[:, j + 1] + intercept
        integral[earning] += dtp * 0.5 * (pj + pj1)[earning]

    return integral, opens, closes, clamped


def _policy_threshold_numpy(paths, open_level, close_level,
                            slope, intercept, dtp, init_mode):
    n_paths, n_pts = paths.shape
    n_steps = n_pts - 1

    integral = np.zeros(n_paths)
    opens = np.zeros(n_paths, dtype=np.int64)
    closes = np.zeros(n_paths, dtype=np.int64)
    mode = np.full(n_paths, init_mode, dtype=np.int64)

    for j in range(n_steps):
        mj = paths[:, j]
        open_now = (mode == 0) & (mj >= open_level)
        close_now = (mode == 1) & (mj <= close_level)
        opens += open_now
        closes += close_now
        mode = np.where(open_now, 1, np.where(close_now, 0, mode))
        earning = mode == 1
        pj = slope * mj + intercept
        pj1 = slope * paths[:, j + 1] + intercept
        integral[earning] += dtp * 0.5 * (pj + pj1)[earning]

    return integral, opens, closes


# ---------------------------------------------------------------------------
# lane selection
# ---------------------------------------------------------------------------

if NUMBA_ENABLED:
    _jit = numba.njit(cache=True)
    march_clamp = _jit(_march_clamp_loops)
    march_psor = _jit(_march_psor_loops)
    policy_regions = _jit(_policy_regions_loops)
    policy_threshold = _jit(_policy_threshold_loops)
else:
    march_clamp = _march_clamp_numpy
    march_psor = _march_psor_numpy
    policy_regions = _policy_regions_numpy
    policy_threshold = _policy_threshold_numpy


def active_lane() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
