"""Coupled variational inequalities for two-mode switching, solved by a
backward Crank-Nicolson march with obstacle projection.

The value functions (v0, v1) of the reduced problem solve

    min{ v0 - (v1 - c01), -dv0/dt - a(t) d2v0/dx2 - psi0 } = 0
    min{ v1 - (v0 - c10), -dv1/dt - a(t) d2v1/dx2 - psi1 } = 0
    v0(T, .) = v1(T, .) = 0,

with time-dependent diffusion a(t) = (1/2) tanh^2(t / epsilon) (and
a = 1/2 in the perfect-observation limit epsilon = 0). Running payoffs are
psi0 = 0 and psi1 affine. Each backward step solves the two unconstrained
tridiagonal systems (coefficient frozen at the half-step), then alternates
obstacle projections between the modes until the iterate is stationary; a
projected-SOR variant is available for stiff cases. Boundary rows impose a
zero second spatial difference, consistent with the asymptotically affine
behaviour of the value functions in m.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from . import _kernels

# sqrt(4 log(2) / pi - 2 / pi): multiplies slope * (T - t) * sqrt(epsilon)
# in the information-gap bound; confirmed against quadrature in the tests.
CONVERGENCE_CONSTANT = math.sqrt((4.0 * math.log(2.0) - 2.0) / math.pi)


class NumericError(RuntimeError):
    """Raised when the backward march fails to produce a usable surface."""

    def __init__(self, message: str, level: int = -1, residual: float = float("nan")):
        super().__init__(message)
        self.level = level
        self.residual = residual


@dataclass(frozen=True)
class ProblemSpec:
    """Problem constants: noise level, horizon, switching costs, payoff."""

    epsilon: float
    T: float = 1.0
    c01: float = 0.01
    c10: float = 0.001
    psi1_slope: float = 10.0
    psi1_intercept: float = 0.0

    def __post_init__(self):
        if not (self.epsilon >= 0.0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be >= 0 and finite, got {self.epsilon}")
        if not (self.T > 0.0 and math.isfinite(self.T)):
            raise ValueError(f"T must be positive, got {self.T}")
        if not (self.c01 > 0.0 and math.isfinite(self.c01)):
            raise ValueError(f"c01 must be positive, got {self.c01}")
        if not (self.c10 > 0.0 and math.isfinite(self.c10)):
            raise ValueError(f"c10 must be positive, got {self.c10}")
        if not math.isfinite(self.psi1_slope) or not math.isfinite(self.psi1_intercept):
            raise ValueError("payoff coefficients must be finite")

    def psi1(self, m):
        """Mode-1 running payoff at state m (mode 0 pays nothing)."""
        return self.psi1_slope * m + self.psi1_intercept


@dataclass(frozen=True)
class Grid:
    """Uniform space-time lattice; time step count n_t refers to [0, T]."""

    x_min: float = -8.0
    x_max: float = 8.0
    n_x: int = 1601
    n_t: int = 1600

    def __post_init__(self):
        if not (self.x_min < self.x_max):
            raise ValueError(f"need x_min < x_max, got [{self.x_min}, {self.x_max}]")
        if self.n_x < 3:
            raise ValueError(f"n_x must be >= 3, got {self.n_x}")
        if self.n_t < 1:
            raise ValueError(f"n_t must be >= 1, got {self.n_t}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_x - 1)

    @property
    def x_nodes(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_x)

    def time_nodes(self, T: float) -> np.ndarray:
        return np.linspace(0.0, T, self.n_t + 1)

    def refined(self) -> "Grid":
        """Grid with doubled resolution in both directions."""
        return Grid(self.x_min, self.x_max, 2 * self.n_x - 1, 2 * self.n_t)


def _split_index(z: float, last: int) -> tuple[int, float]:
    """Map a fractional index to (cell, weight), snapping near-exact nodes."""
    k = int(round(z))
    if 0 <= k <= last and abs(z - k) < 1e-9:
        if k == last:
            return last - 1, 1.0
        return k, 0.0
    k0 = int(math.floor(z))
    k0 = min(max(k0, 0), last - 1)
    return k0, z - k0


@dataclass(frozen=True)
class ValueSurface:
    """Mode-indexed value arrays on a grid; immutable after solve."""

    grid: Grid
    spec: ProblemSpec
    v0: np.ndarray  # shape (n_t + 1, n_x), row k is time level t_k
    v1: np.ndarray

    @property
    def max_abs(self) -> float:
        return max(float(np.max(np.abs(self.v0))), float(np.max(np.abs(self.v1))))

    @property
    def scale(self) -> float:
        # unit-free magnitude used by every relative tolerance
        return 1.0 + self.max_abs

    def value_at(self, t: float, m: float, mode: int) -> float:
        """Bilinear interpolation; exact at lattice nodes."""
        if mode == 0:
            v = self.v0
        elif mode == 1:
            v = self.v1
        else:
            raise ValueError(f"mode must be 0 or 1, got {mode}")
        if not (0.0 <= t <= self.spec.T):
            raise ValueError(f"t={t} outside [0, {self.spec.T}]")
        if not (self.grid.x_min <= m <= self.grid.x_max):
            raise ValueError(f"m={m} outside [{self.grid.x_min}, {self.grid.x_max}]")
        dt = self.spec.T / self.grid.n_t
        k0, ft = _split_index(t / dt, self.grid.n_t)
        j0, fx = _split_index((m - self.grid.x_min) / self.grid.dx, self.grid.n_x - 1)
        return float(
            (1.0 - ft) * ((1.0 - fx) * v[k0, j0] + fx * v[k0, j0 + 1])
            + ft * ((1.0 - fx) * v[k0 + 1, j0] + fx * v[k0 + 1, j0 + 1])
        )


@dataclass(frozen=True)
class SwitchingRegions:
    """Per-node classification: in_Si true where switching out of mode i
    is (numerically) optimal, i.e. the obstacle gap vanishes."""

    grid: Grid
    in_S0: np.ndarray  # (n_t + 1, n_x) boolean
    in_S1: np.ndarray


def diffusion_coeff(t, epsilon):
    """Diffusion a(t) = (1/2) tanh^2(t / epsilon) of the filtered state;
    equals theta(t)^2 / (2 epsilon^2), and 1/2 when epsilon = 0."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0):
        raise ValueError("t must be >= 0")
    if epsilon < 0.0:
        raise ValueError("epsilon must be >= 0")
    if epsilon == 0.0:
        out = np.full_like(t_arr, 0.5)
    else:
        out = 0.5 * np.tanh(t_arr / epsilon) ** 2
    return out if out.ndim else float(out)


def solve(spec: ProblemSpec, grid: Grid, method: str = "clamp", *,
          inner_tol_factor: float = 1e-12, max_inner: int = 200,
          omega: float = 1.3) -> ValueSurface:
    """Backward march from the zero terminal condition.

    method "clamp": unconstrained Thomas solve per mode, then alternating
    obstacle projections (fixed point after two sweeps for positive costs).
    method "psor": projected SOR on each level's coupled obstacle problem.
    """
    if max_inner < 1:
        raise ValueError("max_inner must be >= 1")
    dt = spec.T / grid.n_t
    dx = grid.dx
    t_half = (np.arange(grid.n_t) + 0.5) * dt
    mu = diffusion_coeff(t_half, spec.epsilon) * dt / (2.0 * dx * dx)

    x = grid.x_nodes
    src0 = np.zeros(grid.n_x)
    src1 = dt * spec.psi1(x)

    if method == "clamp":
        v0, v1, status, level, residual = _kernels.march_clamp(
            mu, src0, src1, spec.c01, spec.c10, inner_tol_factor, max_inner)
    elif method == "psor":
        v0, v1, status, level, residual = _kernels.march_psor(
            mu, src0, src1, spec.c01, spec.c10, inner_tol_factor, max_inner,
            omega)
    else:
        raise ValueError(f"unknown method {method!r}, expected 'clamp' or 'psor'")

    if status == _kernels.NO_CONVERGENCE:
        raise NumericError(
            f"obstacle iteration did not converge at time level {level} "
            f"(residual {residual:.3e}, max_inner={max_inner})",
            level=level, residual=float(residual))
    if not (np.all(np.isfinite(v0)) and np.all(np.isfinite(v1))):
        raise NumericError("non-finite values in the solved surface")
    return ValueSurface(grid=grid, spec=spec, v0=v0, v1=v1)


def extract_regions(surface: ValueSurface,
                    region_tol_factor: float = 1e-8) -> SwitchingRegions:
    """Classify nodes by the obstacle gap. With positive costs the two
    regions cannot overlap unless region_tol exceeds (c01 + c10) / 2."""
    tol = region_tol_factor * surface.scale
    gap0 = surface.v0 - (surface.v1 - surface.spec.c01)
    gap1 = surface.v1 - (surface.v0 - surface.spec.c10)
    return SwitchingRegions(grid=surface.grid, in_S0=gap0 <= tol, in_S1=gap1 <= tol)


def no_info_value(t: float, m: float, spec: ProblemSpec) -> float:
    """Large-noise limit of the mode-1 value: the filter stays at its
    initial mean, so the payoff is (T - t) psi1(m) when positive."""
    if not (0.0 <= t <= spec.T):
        raise ValueError(f"t={t} outside [0, {spec.T}]")
    if m > 0.0:
        return (spec.T - t) * spec.psi1(m)
    return 0.0


def convergence_bound(t: float, T: float, epsilon: float, slope: float) -> float:
    """Upper bound on v^0 - v^eps: slope * (T - t) * K * sqrt(epsilon)
    with K = sqrt(4 log 2 / pi - 2 / pi). The slope factor extends the
    unit-slope statement linearly, matching the affine payoff difference."""
    if not (0.0 <= t <= T):
        raise ValueError(f"t={t} outside [0, {T}]")
    if epsilon < 0.0:
        raise ValueError("epsilon must be >= 0")
    return slope * (T - t) * CONVERGENCE_CONSTANT * math.sqrt(epsilon)


def write_surface_csv(path, surface: ValueSurface,
                      regions: SwitchingRegions | None = None) -> None:
    """Write `t,m,v0,v1,in_S0,in_S1` rows, row-major over (level, node).
    The file appears atomically (written to a temp name, then renamed)."""
    if regions is None:
        regions = extract_regions(surface)
    grid, spec = surface.grid, surface.spec
    t = grid.time_nodes(spec.T)
    x = grid.x_nodes
    n_rows = (grid.n_t + 1) * grid.n_x
    data = np.empty((n_rows, 6))
    data[:, 0] = np.repeat(t, grid.n_x)
    data[:, 1] = np.tile(x, grid.n_t + 1)
    data[:, 2] = surface.v0.ravel()
    data[:, 3] = surface.v1.ravel()
    data[:, 4] = regions.in_S0.ravel()
    data[:, 5] = regions.in_S1.ravel()
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write("t,m,v0,v1,in_S0,in_S1\n")
            np.savetxt(fh, data, fmt=["%.9g", "%.9g", "%.9g", "%.9g", "%d", "%d"],
                       delimiter=",")
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise
