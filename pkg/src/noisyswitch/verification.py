"""Executable checks over solved surfaces: structural properties of the
value functions (monotonicity in the noise level, convexity in the state,
the information-gap bound, obstacle feasibility) and the comparison against
the published reference values for the baseline parameters. Each check
returns a CheckReport with the measured worst violation, the tolerance it
was judged against, and the lattice location of the worst case.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .vi_solver import ValueSurface, convergence_bound

# Reference values of the mode-1 value function at the baseline parameters
# (T=1, c01=0.01, c10=0.001, psi1 slope 10), by (t, m, epsilon). The three
# noise levels are 2^-4, 1, and 2^3. Comparison tolerance per entry is
# max(0.01, 1% of |reference|).
REFERENCE_VALUES = {
    (0.0, -0.5, 0.0625): 0.7680, (0.0, -0.5, 1.0): 0.0631, (0.0, -0.5, 8.0): -0.001,
    (0.0,  0.0, 0.0625): 2.2860, (0.0,  0.0, 1.0): 0.7898, (0.0,  0.0, 8.0): 0.0575,
    (0.0,  0.5, 0.0625): 5.6481, (0.0,  0.5, 1.0): 5.0367, (0.0,  0.5, 8.0): 5.0000,
    (0.5, -0.5, 0.0625): 0.1814, (0.5, -0.5, 1.0): 0.0349, (0.5, -0.5, 8.0): -0.001,
    (0.5,  0.0, 0.0625): 0.8567, (0.5,  0.0, 1.0): 0.5069, (0.5,  0.0, 8.0): 0.0396,
    (0.5,  0.5, 0.0625): 2.6015, (0.5,  0.5, 1.0): 2.5097, (0.5,  0.5, 8.0): 2.5000,
}

REFERENCE_EPSILONS = (0.0625, 1.0, 8.0)


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one check; passed is equivalent to worst <= tolerance."""

    name: str
    passed: bool
    worst_violation: float
    location: tuple  # (t, m, mode, epsilon), entries may be None
    tolerance: float
    notes: str = ""

    def __post_init__(self):
        if self.passed != (self.worst_violation <= self.tolerance):
            raise ValueError("passed flag inconsistent with worst vs tolerance")


def _report(name, worst, tol, location, notes=""):
    return CheckReport(name=name, passed=bool(worst <= tol),
                       worst_violation=float(worst), location=location,
                       tolerance=float(tol), notes=notes)


def scale_of(*surfaces: ValueSurface) -> float:
    """1 + largest node magnitude across the compared surfaces."""
    return 1.0 + max(s.max_abs for s in surfaces)


def _same_family(surfaces) -> None:
    g0 = surfaces[0].grid
    s0 = surfaces[0].spec
    for s in surfaces[1:]:
        if s.grid != g0:
            raise ValueError("surfaces live on different grids")
        if (s.spec.T, s.spec.c01, s.spec.c10, s.spec.psi1_slope,
                s.spec.psi1_intercept) != (s0.T, s0.c01, s0.c10,
                                           s0.psi1_slope, s0.psi1_intercept):
            raise ValueError("surfaces solve different problems (beyond epsilon)")


def _node_location(surface: ValueSurface, k: int, j: int, mode: int) -> tuple:
    t = k * surface.spec.T / surface.grid.n_t
    m = surface.grid.x_min + j * surface.grid.dx
    return (t, m, mode, surface.spec.epsilon)


def _worst_node(diff: np.ndarray):
    flat = int(np.argmax(diff))
    k, j = np.unravel_index(flat, diff.shape)
    return int(k), int(j), float(diff[k, j])


def check_monotonicity(surfaces: list[ValueSurface]) -> CheckReport:
    """Value is node-wise non-increasing in the noise level: for adjacent
    surfaces with eps1 <= eps2, v^{eps2} - v^{eps1} must not exceed the
    tolerance anywhere, in either mode."""
    if len(surfaces) < 2:
        raise ValueError("monotonicity needs at least two surfaces")
    _same_family(surfaces)
    eps = [s.spec.epsilon for s in surfaces]
    if any(b < a for a, b in zip(eps, eps[1:])):
        raise ValueError("surfaces must be sorted by epsilon ascending")

    tol = 1e-3 * scale_of(*surfaces)
    worst = -math.inf
    where = (None, None, None, None)
    for lo, hi in zip(surfaces, surfaces[1:]):
        for mode, (a, b) in enumerate(((lo.v0, hi.v0), (lo.v1, hi.v1))):
            k, j, val = _worst_node(b - a)
            if val > worst:
                worst = val
                where = _node_location(hi, k, j, mode)
    return _report("monotonicity", worst, tol, where)


def check_convexity(surface: ValueSurface) -> CheckReport:
    """Both value slices are convex in m: undivided second differences at
    interior nodes must not drop below -tolerance."""
    tol = 1e-4 * scale_of(surface)
    worst = -math.inf
    where = (None, None, None, None)
    for mode, v in enumerate((surface.v0, surface.v1)):
        second = v[:, :-2] - 2.0 * v[:, 1:-1] + v[:, 2:]
        k, j, val = _worst_node(-second)
        if val > worst:
            worst = val
            where = _node_location(surface, k, j + 1, mode)
    return _report("convexity", worst, tol, where)


def check_convergence(surface0: ValueSurface,
                      surfaces: list[ValueSurface]) -> CheckReport:
    """Information gap is sandwiched: 0 <= v^0 - v^eps <= bound(t, eps)
    node-wise, where the bound shrinks linearly in remaining time and as
    sqrt(eps). Notes carry the empirical sup-gap per eps."""
    if surface0.spec.epsilon != 0.0:
        raise ValueError("surface0 must be the epsilon = 0 surface")
    _same_family([surface0] + list(surfaces))
    tol = 1e-3 * scale_of(surface0, *surfaces)
    spec0 = surface0.spec
    t = surface0.grid.time_nodes(spec0.T)

    worst = -math.inf
    where = (None, None, None, None)
    gaps = []
    for s in surfaces:
        eps = s.spec.epsilon
        bound = np.array([convergence_bound(tk, spec0.T, eps, spec0.psi1_slope)
                          for tk in t])[:, None]
        sup_gap = 0.0
        for mode, (v0m, vem) in enumerate(((surface0.v0, s.v0),
                                           (surface0.v1, s.v1))):
            gap = v0m - vem
            sup_gap = max(sup_gap, float(np.max(gap)))
            # lower side: gap must be >= -tol
            k, j, val = _worst_node(-gap)
            if val > worst:
                worst, where = val, _node_location(s, k, j, mode)
            # upper side: gap must be <= bound + tol
            k, j, val = _worst_node(gap - bound)
            if val > worst:
                worst, where = val, _node_location(s, k, j, mode)
        gaps.append(f"eps={eps:g}: sup-gap {sup_gap:.6f}")
    return _report("convergence_bound", worst, tol, where, notes="; ".join(gaps))


def check_feasibility(surface: ValueSurface) -> CheckReport:
    """Obstacle sandwich and admissibility floors: -c10 <= v1 - v0 <= c01,
    v0 >= 0, v1 >= -c10, all up to tolerance; terminal values are zero."""
    spec = surface.spec
    tol = 1e-8 * scale_of(surface)
    v0, v1 = surface.v0, surface.v1
    pieces = [
        ("v0 floor", -v0, 0),
        ("v1 floor", -(v1 + spec.c10), 1),
        ("upper sandwich", (v1 - v0) - spec.c01, None),
        ("lower sandwich", -(v1 - v0) - spec.c10, None),
        ("terminal mode 0", np.abs(v0[-1:]), 0),
        ("terminal mode 1", np.abs(v1[-1:]), 1),
    ]
    worst = -math.inf
    where = (None, None, None, None)
    label = ""
    for name, arr, mode in pieces:
        k, j, val = _worst_node(arr)
        if val > worst:
            worst = val
            label = name
            if name.startswith("terminal"):
                k = surface.grid.n_t
            t_loc, m_loc, _, eps_loc = _node_location(surface, k, j, 0)
            where = (t_loc, m_loc, mode, eps_loc)
    return _report("feasibility", worst, tol, where, notes=f"worst piece: {label}")


def table2_entries(surfaces: dict[float, ValueSurface]):
    """Per-entry comparison rows against the reference values: tuples
    (t, m, epsilon, reference, computed, abs_diff, tolerance, passed)."""
    for eps in REFERENCE_EPSILONS:
        if eps not in surfaces:
            raise ValueError(f"missing surface for epsilon={eps}")
        s = surfaces[eps].spec
        if (s.T, s.c01, s.c10, s.psi1_slope, s.psi1_intercept) != \
                (1.0, 0.01, 0.001, 10.0, 0.0):
            raise ValueError("reference comparison requires baseline parameters")
    rows = []
    for (t, m, eps), ref in REFERENCE_VALUES.items():
        computed = surfaces[eps].value_at(t, m, 1)
        diff = abs(computed - ref)
        tol = max(0.01, 0.01 * abs(ref))
        rows.append((t, m, eps, ref, computed, diff, tol, diff <= tol))
    return rows


def compare_table2(surfaces: dict[float, ValueSurface]) -> CheckReport:
    """Reference-table comparison; the worst violation is the largest
    diff/tolerance ratio across the 18 entries, so 1.0 is the pass line."""
    rows = table2_entries(surfaces)
    worst = -math.inf
    where = (None, None, None, None)
    n_fail = 0
    for t, m, eps, ref, computed, diff, tol, ok in rows:
        if not ok:
            n_fail += 1
        ratio = diff / tol
        if ratio > worst:
            worst = ratio
            where = (t, m, 1, eps)
    notes = f"{18 - n_fail}/18 entries within tolerance"
    return _report("table2", worst, 1.0, where, notes=notes)


def format_reports(reports: list[CheckReport]) -> str:
    """Human-readable block, one line per check."""
    lines = []
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        loc = ", ".join("-" if x is None else f"{x:g}" for x in r.location)
        line = (f"[{status}] {r.name}: worst {r.worst_violation:.6g} "
                f"vs tolerance {r.tolerance:.6g} at (t, m, mode, eps) = ({loc})")
        if r.notes:
            line += f" | {r.notes}"
        lines.append(line)
    return "\n".join(lines)


def write_reports_csv(path, reports: list[CheckReport]) -> None:
    """CSV export `check,passed,worst_violation,tolerance,t,m,mode,epsilon`;
    written atomically. Booleans are 0/1."""
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write("check,passed,worst_violation,tolerance,t,m,mode,epsilon\n")
            for r in reports:
                loc = ",".join("" if x is None else f"{x:.9g}" for x in r.location)
                fh.write(f"{r.name},{int(r.passed)},{r.worst_violation:.9g},"
                         f"{r.tolerance:.9g},{loc}\n")
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise
