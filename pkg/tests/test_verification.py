"""Verification-check tests: real surfaces must pass the structural checks,
and deliberately corrupted surfaces must fail them (negative controls that
prove the checks can actually reject)."""

from dataclasses import replace

import numpy as np
import pytest

from noisyswitch.verification import (
    REFERENCE_EPSILONS,
    REFERENCE_VALUES,
    CheckReport,
    check_convergence,
    check_convexity,
    check_feasibility,
    check_monotonicity,
    compare_table2,
    format_reports,
    scale_of,
    table2_entries,
    write_reports_csv,
)
from noisyswitch.vi_solver import Grid, ProblemSpec, ValueSurface, solve


def sorted_sweep(sweep_small):
    return [sweep_small[e] for e in sorted(sweep_small)]


def fabricate(surface, fn):
    """Copy of a surface whose both value slices are fn(m) at every level."""
    row = fn(surface.grid.x_nodes)
    v = np.tile(row, (surface.grid.n_t + 1, 1))
    return replace(surface, v0=v.copy(), v1=v.copy())


class TestChecksPassOnRealSurfaces:
    def test_monotonicity(self, sweep_small):
        report = check_monotonicity(sorted_sweep(sweep_small))
        assert report.passed
        assert report.worst_violation <= 1e-6  # measured: round-off level

    def test_convexity(self, sweep_small):
        for surface in sweep_small.values():
            assert check_convexity(surface).passed

    def test_convergence(self, sweep_small):
        others = [sweep_small[e] for e in sorted(sweep_small) if e > 0.0]
        report = check_convergence(sweep_small[0.0], others)
        assert report.passed
        assert "sup-gap" in report.notes

    def test_feasibility(self, sweep_small):
        for surface in sweep_small.values():
            report = check_feasibility(surface)
            assert report.passed
            assert "worst piece" in report.notes


class TestNegativeControls:
    def test_swapped_contents_fail_monotonicity(self, sweep_small):
        # swap the value arrays between the smallest and largest noise level
        # so the labels are ordered but the contents are reversed
        lo, hi = sweep_small[0.0625], sweep_small[8.0]
        fake_lo = replace(lo, v0=hi.v0, v1=hi.v1)
        fake_hi = replace(hi, v0=lo.v0, v1=lo.v1)
        report = check_monotonicity([sweep_small[0.0], fake_lo,
                                     sweep_small[1.0], fake_hi])
        assert not report.passed
        assert report.worst_violation > 1.0  # the real spread is order one

    def test_corrupt_node_fails_convexity(self, sweep_small):
        surface = sweep_small[1.0]
        v1 = surface.v1.copy()
        v1[100, 200] += 1.0  # a one-node spike is locally concave
        report = check_convexity(replace(surface, v1=v1))
        assert not report.passed
        assert report.location[2] == 1
        assert report.worst_violation == pytest.approx(2.0, abs=0.1)

    def test_parabola_controls_for_convexity(self, sweep_small):
        surface = sweep_small[1.0]
        convex = fabricate(surface, lambda x: x * x)
        assert check_convexity(convex).passed
        concave = fabricate(surface, lambda x: -(x ** 4))
        assert not check_convexity(concave).passed

    def test_shifted_surface_fails_convergence(self, sweep_small):
        # raising the zero-noise surface blows through the sqrt-eps bound
        s0 = sweep_small[0.0]
        fake = replace(s0, v0=s0.v0 + 10.0, v1=s0.v1 + 10.0)
        report = check_convergence(fake, [sweep_small[1.0]])
        assert not report.passed
        # lowering it instead violates the gap-nonnegative side
        fake = replace(s0, v0=s0.v0 - 1.0, v1=s0.v1 - 1.0)
        assert not check_convergence(fake, [sweep_small[1.0]]).passed

    def test_broken_sandwich_fails_feasibility(self, sweep_small):
        surface = sweep_small[1.0]
        v1 = surface.v0 + 2.0 * surface.spec.c01
        v1[-1] = 0.0  # keep the terminal row valid so the sandwich dominates
        report = check_feasibility(replace(surface, v1=v1))
        assert not report.passed
        assert "upper sandwich" in report.notes

    def test_nonzero_terminal_fails_feasibility(self, sweep_small):
        surface = sweep_small[1.0]
        v0 = surface.v0.copy()
        v0[-1, 37] = 0.1
        report = check_feasibility(replace(surface, v0=v0))
        assert not report.passed
        assert "terminal mode 0" in report.notes
        assert report.location[0] == surface.spec.T


class TestCheckValidation:
    def test_monotonicity_needs_two_sorted_surfaces(self, sweep_small):
        with pytest.raises(ValueError, match="at least two"):
            check_monotonicity([sweep_small[1.0]])
        with pytest.raises(ValueError, match="ascending"):
            check_monotonicity([sweep_small[1.0], sweep_small[0.0625]])

    def test_family_mismatch_rejected(self, sweep_small):
        other_grid = solve(ProblemSpec(epsilon=8.0), Grid(n_x=201, n_t=100))
        with pytest.raises(ValueError, match="different grids"):
            check_monotonicity([sweep_small[1.0], other_grid])
        other_cost = solve(ProblemSpec(epsilon=8.0, c01=0.02),
                           Grid(n_x=401, n_t=400))
        with pytest.raises(ValueError, match="different problems"):
            check_monotonicity([sweep_small[1.0], other_cost])

    def test_convergence_needs_zero_noise_base(self, sweep_small):
        with pytest.raises(ValueError, match="epsilon = 0"):
            check_convergence(sweep_small[1.0], [sweep_small[8.0]])

    def test_report_invariant_enforced(self):
        with pytest.raises(ValueError, match="inconsistent"):
            CheckReport(name="x", passed=True, worst_violation=2.0,
                        location=(None,) * 4, tolerance=1.0)

    def test_scale_of(self, sweep_small):
        s = sweep_small[0.0625]
        assert scale_of(s) == 1.0 + s.max_abs
        assert scale_of(s, sweep_small[8.0]) >= scale_of(sweep_small[8.0])


class TestReferenceComparison:
    def test_entry_mechanics(self, sweep_small):
        surfaces = {e: sweep_small[e] for e in REFERENCE_EPSILONS}
        rows = table2_entries(surfaces)
        assert len(rows) == 18
        seen = set()
        for (t, m, eps, ref, computed, diff, tol, ok) in rows:
            seen.add((t, m, eps))
            assert ref == REFERENCE_VALUES[(t, m, eps)]
            assert computed == surfaces[eps].value_at(t, m, 1)
            assert diff == abs(computed - ref)
            assert tol == max(0.01, 0.01 * abs(ref))
            assert ok == (diff <= tol)
        assert seen == set(REFERENCE_VALUES)

    def test_report_consistent_with_entries(self, sweep_small):
        surfaces = {e: sweep_small[e] for e in REFERENCE_EPSILONS}
        rows = table2_entries(surfaces)
        report = compare_table2(surfaces)
        n_ok = sum(1 for row in rows if row[-1])
        assert f"{n_ok}/18 entries within tolerance" == report.notes
        assert report.passed == all(row[-1] for row in rows)
        assert report.worst_violation == pytest.approx(
            max(row[5] / row[6] for row in rows), rel=1e-12)

    def test_missing_surface_rejected(self, sweep_small):
        with pytest.raises(ValueError, match="missing surface"):
            table2_entries({1.0: sweep_small[1.0]})

    def test_nonbaseline_parameters_rejected(self):
        grid = Grid(n_x=201, n_t=100)
        surfaces = {
            eps: solve(ProblemSpec(epsilon=eps, c01=0.02), grid)
            for eps in REFERENCE_EPSILONS
        }
        with pytest.raises(ValueError, match="baseline"):
            table2_entries(surfaces)


class TestReportOutput:
    def test_format_reports(self, sweep_small):
        reports = [check_convexity(sweep_small[1.0])]
        v1 = sweep_small[1.0].v1.copy()
        v1[50, 50] += 1.0
        reports.append(check_convexity(replace(sweep_small[1.0], v1=v1)))
        text = format_reports(reports)
        lines = text.splitlines()
        assert lines[0].startswith("[PASS] convexity:")
        assert lines[1].startswith("[FAIL] convexity:")
        assert "(t, m, mode, eps)" in lines[0]

    def test_write_reports_csv(self, sweep_small, tmp_path):
        reports = [
            check_convexity(sweep_small[1.0]),
            check_feasibility(sweep_small[8.0]),
            CheckReport(name="custom", passed=False, worst_violation=2.0,
                        location=(None, None, None, None), tolerance=1.0),
        ]
        path = tmp_path / "reports.csv"
        write_reports_csv(path, reports)
        lines = path.read_text().splitlines()
        assert lines[0] == "check,passed,worst_violation,tolerance,t,m,mode,epsilon"
        assert len(lines) == 4
        first = lines[1].split(",")
        assert first[0] == "convexity" and first[1] == "1"
        assert float(first[2]) == pytest.approx(
            reports[0].worst_violation, rel=1e-8)
        # None location fields serialize as empty cells
        assert lines[3] == "custom,0,2,1,,,,"
