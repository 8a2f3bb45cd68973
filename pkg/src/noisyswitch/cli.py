"""Command-line front end.

Subcommands: solve (one surface CSV), sweep (surfaces plus curve data over
the noise-level list), simulate (Monte Carlo policy estimates), verify
(structural checks with a CSV report and a failing exit code when a check
fails), table2 (comparison against the reference values). Experiments are
described by a flat key=value config file; every file is written atomically
(temp name, then rename).
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from dataclasses import dataclass, field, replace

from . import _kernels, verification
from .strategy import estimate_value
from .vi_solver import (Grid, NumericError, ProblemSpec, extract_regions,
                        solve, write_surface_csv)

THREADS_ENV = "NOISYSWITCH_THREADS"

DEFAULT_EPSILONS = (0.0, 0.0625, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0)
DEFAULT_QUERY_POINTS = ((0.0, -0.5, 1), (0.0, 0.0, 1), (0.0, 0.5, 1),
                        (0.5, -0.5, 1), (0.5, 0.0, 1), (0.5, 0.5, 1))

CONFIG_KEYS = ("epsilon_list", "T", "c01", "c10", "psi1_slope",
               "psi1_intercept", "x_min", "x_max", "n_x", "n_t",
               "query_points", "n_paths", "n_steps", "seed", "output_dir")


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the key (and line)."""


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: model constants, grid, noise levels, query points,
    Monte Carlo settings, output directory."""

    T: float = 1.0
    c01: float = 0.01
    c10: float = 0.001
    psi1_slope: float = 10.0
    psi1_intercept: float = 0.0
    grid: Grid = field(default_factory=Grid)
    epsilons: tuple = DEFAULT_EPSILONS
    query_points: tuple = DEFAULT_QUERY_POINTS
    n_paths: int = 100000
    n_steps: int = 1600
    seed: int = 0
    output_dir: str = "out"

    def spec_for(self, epsilon: float) -> ProblemSpec:
        return ProblemSpec(epsilon=epsilon, T=self.T, c01=self.c01,
                           c10=self.c10, psi1_slope=self.psi1_slope,
                           psi1_intercept=self.psi1_intercept)

    def validate(self) -> None:
        self.spec_for(self.epsilons[0] if self.epsilons else 0.0)
        if not self.epsilons:
            raise ConfigError("epsilon_list: must contain at least one value")
        if any(e < 0 for e in self.epsilons):
            raise ConfigError("epsilon_list: noise levels must be >= 0")
        if any(b <= a for a, b in zip(self.epsilons, self.epsilons[1:])):
            raise ConfigError("epsilon_list: must be sorted ascending and distinct")
        for (t, m, mode) in self.query_points:
            if not (0.0 <= t <= self.T):
                raise ConfigError(f"query_points: t={t:g} outside [0, {self.T:g}]")
            if not (self.grid.x_min <= m <= self.grid.x_max):
                raise ConfigError(f"query_points: m={m:g} outside the grid")
            if mode not in (0, 1):
                raise ConfigError(f"query_points: mode must be 0 or 1, got {mode}")
        if self.n_paths < 100:
            raise ConfigError("n_paths: must be >= 100")
        if self.n_steps < 1:
            raise ConfigError("n_steps: must be >= 1")
        if not (0 <= self.seed < 2 ** 64):
            raise ConfigError("seed: must fit in an unsigned 64-bit integer")


def _parse_float(key, text, line_no):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"line {line_no}: key '{key}': "
                          f"could not parse '{text}' as a number") from None


def _parse_int(key, text, line_no):
    try:
        return int(text, 10)
    except ValueError:
        raise ConfigError(f"line {line_no}: key '{key}': "
                          f"could not parse '{text}' as an integer") from None


def parse_config(text: str) -> ExperimentConfig:
    """Parse the flat key=value format; '#' starts a comment. An empty
    document yields the baseline defaults."""
    values = {}
    lines = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected key = value, got '{line}'")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {line_no}: unknown key '{key}'")
        if key in values:
            raise ConfigError(f"line {line_no}: duplicate key '{key}'")
        values[key] = val
        lines[key] = line_no

    kwargs = {}
    grid_kwargs = {}
    for key, val in values.items():
        ln = lines[key]
        if key == "epsilon_list":
            kwargs["epsilons"] = tuple(
                _parse_float(key, tok.strip(), ln)
                for tok in val.split(",") if tok.strip())
        elif key == "query_points":
            pts = []
            for group in val.split(";"):
                group = group.strip()
                if not group:
                    continue
                parts = [p.strip() for p in group.split(",")]
                if len(parts) != 3:
                    raise ConfigError(f"line {ln}: key 'query_points': "
                                      f"expected t,m,mode triple, got '{group}'")
                pts.append((_parse_float(key, parts[0], ln),
                            _parse_float(key, parts[1], ln),
                            _parse_int(key, parts[2], ln)))
            kwargs["query_points"] = tuple(pts)
        elif key in ("T", "c01", "c10", "psi1_slope", "psi1_intercept"):
            kwargs[key] = _parse_float(key, val, ln)
        elif key in ("x_min", "x_max"):
            grid_kwargs[key] = _parse_float(key, val, ln)
        elif key in ("n_x", "n_t"):
            grid_kwargs[key] = _parse_int(key, val, ln)
        elif key in ("n_paths", "n_steps", "seed"):
            kwargs[key] = _parse_int(key, val, ln)
        else:  # output_dir
            kwargs[key] = val

    if grid_kwargs:
        try:
            kwargs["grid"] = Grid(**{**Grid().__dict__, **grid_kwargs})
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}") from None
    try:
        config = ExperimentConfig(**kwargs)
        config.validate()
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    return config


def serialize_config(config: ExperimentConfig) -> str:
    """Inverse of parse_config: parsing the output reproduces the config."""
    g = config.grid
    parts = [
        f"epsilon_list = {', '.join(repr(e) for e in config.epsilons)}",
        f"T = {config.T!r}",
        f"c01 = {config.c01!r}",
        f"c10 = {config.c10!r}",
        f"psi1_slope = {config.psi1_slope!r}",
        f"psi1_intercept = {config.psi1_intercept!r}",
        f"x_min = {g.x_min!r}",
        f"x_max = {g.x_max!r}",
        f"n_x = {g.n_x}",
        f"n_t = {g.n_t}",
        "query_points = " + "; ".join(
            f"{t!r},{m!r},{mode}" for (t, m, mode) in config.query_points),
        f"n_paths = {config.n_paths}",
        f"n_steps = {config.n_steps}",
        f"seed = {config.seed}",
        f"output_dir = {config.output_dir}",
    ]
    return "\n".join(parts) + "\n"


def _atomic_write(path: str, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _load_config(args) -> ExperimentConfig:
    if args.config is not None:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
        config = parse_config(text)
    else:
        config = ExperimentConfig()
    overrides = {}
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    grid_over = {}
    if args.nx is not None:
        grid_over["n_x"] = args.nx
    if args.nt is not None:
        grid_over["n_t"] = args.nt
    if grid_over:
        try:
            overrides["grid"] = replace(config.grid, **grid_over)
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}") from None
    if overrides:
        config = replace(config, **overrides)
        config.validate()
    return config


def _out_path(config: ExperimentConfig, name: str) -> str:
    os.makedirs(config.output_dir, exist_ok=True)
    return os.path.join(config.output_dir, name)


def _solve_all(config, epsilons, method="clamp"):
    surfaces = {}
    for eps in epsilons:
        surfaces[eps] = solve(config.spec_for(eps), config.grid, method)
    return surfaces


def cmd_solve(config: ExperimentConfig) -> int:
    """Solve the single configured noise level and write its surface CSV."""
    if len(config.epsilons) != 1:
        raise ConfigError("epsilon_list: solve expects exactly one noise level "
                          f"(got {len(config.epsilons)}); use sweep for several")
    eps = config.epsilons[0]
    surface = solve(config.spec_for(eps), config.grid)
    path = _out_path(config, f"surface_eps{eps:g}.csv")
    write_surface_csv(path, surface)
    print(f"wrote {path}")
    return 0


def cmd_sweep(config: ExperimentConfig) -> int:
    """Solve every configured noise level; write all surface CSVs plus
    curve data (value of mode 1 against m at t = 0 and t = T/2)."""
    surfaces = _solve_all(config, config.epsilons)
    for eps, surface in surfaces.items():
        path = _out_path(config, f"surface_eps{eps:g}.csv")
        write_surface_csv(path, surface)
        print(f"wrote {path}")
    lines = ["epsilon,t,m,v1"]
    x = config.grid.x_nodes
    for eps in config.epsilons:
        surface = surfaces[eps]
        for t in (0.0, config.T / 2.0):
            k = int(round(t / (config.T / config.grid.n_t)))
            row = surface.v1[k]
            lines.extend(f"{eps:.9g},{t:.9g},{xm:.9g},{vm:.9g}"
                         for xm, vm in zip(x, row))
    path = _out_path(config, "figure1.csv")
    _atomic_write(path, "\n".join(lines) + "\n")
    print(f"wrote {path}")
    return 0


def cmd_simulate(config: ExperimentConfig) -> int:
    """Monte Carlo estimates of the extracted optimal policy at every
    configured query point and noise level."""
    lines = ["epsilon,t0,m0,mode,mean,std_err,n_paths,seed"]
    for eps in config.epsilons:
        surface = solve(config.spec_for(eps), config.grid)
        regions = extract_regions(surface)
        spec = surface.spec
        for (t0, m0, mode) in config.query_points:
            # keep path steps aligned with the grid levels from t0 on
            n_steps = max(1, int(round(config.n_steps * (config.T - t0)
                                       / config.T)))
            est = estimate_value(spec, regions, t0, m0, mode,
                                 config.n_paths, n_steps, config.seed)
            lines.append(f"{eps:.9g},{t0:.9g},{m0:.9g},{mode},"
                         f"{est.mean:.9g},{est.std_err:.9g},"
                         f"{est.n_paths},{config.seed}")
    path = _out_path(config, "estimates.csv")
    _atomic_write(path, "\n".join(lines) + "\n")
    print(f"wrote {path}")
    return 0


def cmd_verify(config: ExperimentConfig) -> int:
    """Run the structural checks over the configured sweep; write the
    report CSV. Exit code 1 when any executed check fails."""
    surfaces = _solve_all(config, config.epsilons)
    ordered = [surfaces[e] for e in config.epsilons]
    reports = []
    skipped = []

    if len(ordered) >= 2:
        reports.append(verification.check_monotonicity(ordered))
    else:
        skipped.append("monotonicity (needs at least two noise levels)")

    for eps in config.epsilons:
        reports.append(verification.check_convexity(surfaces[eps]))
        reports.append(verification.check_feasibility(surfaces[eps]))

    if 0.0 in surfaces and len(ordered) >= 2:
        others = [surfaces[e] for e in config.epsilons if e > 0.0]
        reports.append(verification.check_convergence(surfaces[0.0], others))
    else:
        skipped.append("convergence_bound (needs the zero-noise surface)")

    baseline = (config.T, config.c01, config.c10, config.psi1_slope,
                config.psi1_intercept) == (1.0, 0.01, 0.001, 10.0, 0.0)
    if baseline and all(e in surfaces for e in verification.REFERENCE_EPSILONS):
        reports.append(verification.compare_table2(
            {e: surfaces[e] for e in verification.REFERENCE_EPSILONS}))
    else:
        skipped.append("table2 (needs baseline parameters and the three "
                       "reference noise levels)")

    path = _out_path(config, "reports.csv")
    verification.write_reports_csv(path, reports)
    print(verification.format_reports(reports))
    for name in skipped:
        print(f"[SKIPPED] {name}")
    print(f"wrote {path}")
    return 0 if all(r.passed for r in reports) else 1


def cmd_table2(config: ExperimentConfig) -> int:
    """Write the 18-row comparison against the reference values. The noise
    levels are fixed by the reference table; model parameters must be the
    baseline (grid overrides are honored)."""
    for key, val, want in (("T", config.T, 1.0), ("c01", config.c01, 0.01),
                           ("c10", config.c10, 0.001),
                           ("psi1_slope", config.psi1_slope, 10.0),
                           ("psi1_intercept", config.psi1_intercept, 0.0)):
        if val != want:
            raise ConfigError(f"{key}: reference comparison requires the "
                              f"baseline value {want:g}, got {val:g}")
    surfaces = _solve_all(config, verification.REFERENCE_EPSILONS)
    rows = verification.table2_entries(surfaces)
    lines = ["t,m,epsilon,paper,computed,abs_diff,tolerance,pass"]
    n_fail = 0
    for (t, m, eps, ref, computed, diff, tol, ok) in rows:
        n_fail += 0 if ok else 1
        lines.append(f"{t:.9g},{m:.9g},{eps:.9g},{ref:.9g},{computed:.9g},"
                     f"{diff:.9g},{tol:.9g},{int(ok)}")
    path = _out_path(config, "table2.csv")
    _atomic_write(path, "\n".join(lines) + "\n")
    print(f"wrote {path} ({18 - n_fail}/18 entries within tolerance)")
    return 0 if n_fail == 0 else 1


def _apply_thread_env() -> None:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return
    try:
        n = int(raw, 10)
        if n < 1:
            raise ValueError
    except ValueError:
        raise ConfigError(f"{THREADS_ENV}: expected a positive integer, "
                          f"got '{raw}'") from None
    if _kernels.NUMBA_ENABLED:
        import numba

        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="noisyswitch",
        description="Solve, simulate and verify the two-mode switching "
                    "problem under noisy observation.")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {"solve": cmd_solve, "sweep": cmd_sweep,
                "simulate": cmd_simulate, "verify": cmd_verify,
                "table2": cmd_table2}
    for name, fn in commands.items():
        p = sub.add_parser(name, help=fn.__doc__.splitlines()[0].lower())
        p.add_argument("--config", help="path to a key=value config file")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="RNG seed (overrides config)")
        p.add_argument("--nx", type=int, help="spatial node count override")
        p.add_argument("--nt", type=int, help="time step count override")

    args = parser.parse_args(argv)
    try:
        _apply_thread_env()
        config = _load_config(args)
        return commands[args.command](config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
