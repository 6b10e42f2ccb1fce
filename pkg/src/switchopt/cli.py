"""Command-line front end.

Subcommands:
  solve  -- solve one problem at one beta; emit trajectory/mode CSVs, a
            summary, and SVG plots of the states and mode signal.
  sweep  -- solve across a beta list; emit the sweep CSV and an SVG of
            objective vs beta (plus solve outputs for a single beta).
  check  -- run derivative, concavity, and integrator audits; print a
            pass/fail table.

Configuration comes from an optional TOML file (schema below) with CLI
flags taking precedence.  Unknown config keys are rejected.

TOML schema::

    [problem]
    name = "two-tank"            # or "double-integrator"
    [problem.params]             # optional, forwarded to the catalog
    alpha = 2.0

    [run]
    beta = 0.0                   # or betas = [0.0, 0.1, 0.2]
    seed = 0
    warm_start = "none"          # or "beta-zero"

    [mesh]
    n = 100
    scheme = "trapezoidal"       # or "hermite-simpson"

    [solver]                     # all optional, see SolveOptions
    max_outer_iters = 30
    max_inner_iters = 500
    constraint_tol = 1e-6
    optimality_tol = 1e-6
    initial_penalty = 10.0
    penalty_growth = 10.0

    [output]
    dir = "out"
    csv = true
    svg = true

Exit codes: 0 success, 1 configuration error, 2 solver failure,
3 audit failure.

All numeric CSV fields carry 12 significant digits and identical
config + seed reproduces byte-identical CSVs.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import problems, sim
from .analysis import (
    beta_sweep,
    classify,
    extract_modes,
    project_and_rollout,
)
from .nlp import SolveOptions, default_initializer, solve
from .plotting import line_plot
from .transcription import Mesh, constraint_jacobian, objective_gradient, transcribe, trajectory_from_vector
from .ocp import embed

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVE = 2
EXIT_AUDIT = 3

SCHEMES = ("trapezoidal", "hermite-simpson")
WARM_STARTS = ("none", "beta-zero")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: str = "two-tank"
    problem_params: dict = field(default_factory=dict)
    beta: float = 0.0
    betas: list | None = None
    mesh_n: int = 100
    scheme: str = "trapezoidal"
    solver: SolveOptions = field(default_factory=SolveOptions)
    out_dir: str = "out"
    emit_csv: bool = True
    emit_svg: bool = True
    seed: int = 0
    warm_start: str = "none"

    def validate(self):
        if self.problem not in problems.CATALOG:
            raise ConfigError(
                f"unknown problem {self.problem!r}; choose from {sorted(problems.CATALOG)}"
            )
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if self.warm_start not in WARM_STARTS:
            raise ConfigError(f"unknown warm_start {self.warm_start!r}; choose from {WARM_STARTS}")
        if self.mesh_n < 1:
            raise ConfigError("mesh n must be a positive integer")
        if self.beta < 0:
            raise ConfigError("beta must be non-negative")
        if self.betas is not None:
            if len(self.betas) == 0:
                raise ConfigError("beta list must not be empty")
            if any(b < 0 for b in self.betas):
                raise ConfigError("all betas must be non-negative")


def _take(table: dict, section: str, allowed):
    sub = table.pop(section, {})
    if not isinstance(sub, dict):
        raise ConfigError(f"[{section}] must be a table")
    unknown = set(sub) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {sorted(unknown)}")
    return sub


def load_config(path) -> RunConfig:
    """Parse and validate a TOML config file into a RunConfig."""
    try:
        with open(path, "rb") as fh:
            table = tomllib.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config file: {e}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"malformed config file: {e}") from e

    cfg = RunConfig()
    prob = _take(table, "problem", {"name", "params"})
    run = _take(table, "run", {"beta", "betas", "seed", "warm_start"})
    mesh = _take(table, "mesh", {"n", "scheme"})
    solver = _take(
        table,
        "solver",
        {f.name for f in dataclasses.fields(SolveOptions) if f.name != "seed"},
    )
    output = _take(table, "output", {"dir", "csv", "svg"})
    if table:
        raise ConfigError(f"unknown top-level section(s): {sorted(table)}")

    if "name" in prob:
        cfg.problem = str(prob["name"])
    params = prob.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("[problem.params] must be a table")
    cfg.problem_params = dict(params)
    if "beta" in run and "betas" in run:
        raise ConfigError("specify beta or betas, not both")
    if "beta" in run:
        cfg.beta = float(run["beta"])
    if "betas" in run:
        if not isinstance(run["betas"], list):
            raise ConfigError("betas must be a list of numbers")
        cfg.betas = [float(b) for b in run["betas"]]
    if "seed" in run:
        cfg.seed = int(run["seed"])
    if "warm_start" in run:
        cfg.warm_start = str(run["warm_start"])
    if "n" in mesh:
        cfg.mesh_n = int(mesh["n"])
    if "scheme" in mesh:
        cfg.scheme = str(mesh["scheme"])
    if solver:
        try:
            cfg.solver = SolveOptions(seed=cfg.seed, **solver)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad [solver] options: {e}") from e
    if "dir" in output:
        cfg.out_dir = str(output["dir"])
    if "csv" in output:
        cfg.emit_csv = bool(output["csv"])
    if "svg" in output:
        cfg.emit_svg = bool(output["svg"])
    return cfg


def _apply_flags(cfg: RunConfig, args) -> RunConfig:
    if args.problem is not None:
        cfg.problem = args.problem
    if getattr(args, "beta", None) is not None:
        cfg.beta = args.beta
        cfg.betas = None
    if getattr(args, "betas", None) is not None:
        try:
            cfg.betas = [float(s) for s in args.betas.split(",") if s.strip() != ""]
        except ValueError as e:
            raise ConfigError(f"bad --betas list: {e}") from e
    if args.mesh_n is not None:
        cfg.mesh_n = args.mesh_n
    if args.scheme is not None:
        cfg.scheme = args.scheme
    if args.out is not None:
        cfg.out_dir = args.out
    if args.no_svg:
        cfg.emit_svg = False
    if args.seed is not None:
        cfg.seed = args.seed
    cfg.solver = dataclasses.replace(cfg.solver, seed=cfg.seed)
    return cfg


def _num(x) -> str:
    return f"{float(x):.12g}"


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_num(v) if isinstance(v, (int, float, np.floating)) else str(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _build(cfg: RunConfig):
    try:
        problem = problems.make_problem(cfg.problem, **cfg.problem_params)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad problem parameters: {e}") from e
    b = problem.boundary
    mesh = Mesh.uniform(cfg.mesh_n, b.t0, b.tf, cfg.scheme)
    return problem, mesh


def _solve_one(problem, mesh, beta, cfg):
    """Solve at one beta, optionally warm-started from the beta=0 solve."""
    ep = embed(problem, beta)
    nlp = transcribe(ep, mesh)
    if cfg.warm_start == "beta-zero" and beta > 0:
        nlp0 = transcribe(embed(problem, 0.0), mesh)
        res0 = solve(nlp0, default_initializer(nlp0.problem, mesh), cfg.solver)
        z0 = res0.z_opt
    else:
        z0 = default_initializer(ep, mesh)
    res = solve(nlp, z0, cfg.solver)
    return nlp, res


def _emit_solution(cfg, problem, mesh, nlp, res, out: Path):
    traj = trajectory_from_vector(nlp, res.z_opt)
    seq = extract_modes(traj)
    cls = classify(traj)
    rollout = project_and_rollout(problem, seq)

    partial = res.status != "converged"
    if cfg.emit_csv:
        n, m = problem.state_dim, problem.control_dim
        header = (
            ["t"]
            + [f"x{i + 1}" for i in range(n)]
            + [f"u0_{j + 1}" for j in range(m)]
            + [f"u1_{j + 1}" for j in range(m)]
            + ["vbar"]
        )
        rows = [
            list(traj.times[k : k + 1])
            + list(traj.states[k])
            + list(traj.controls_u0[k])
            + list(traj.controls_u1[k])
            + [traj.mode_signal[k]]
            for k in range(traj.times.size)
        ]
        _write_csv(out / "trajectory.csv", header, rows)
        mode_rows = [["initial_mode", float(seq.initial_mode)]] + [
            ["switch_time", s] for s in seq.switch_times
        ]
        _write_csv(out / "modes.csv", ["field", "value"], mode_rows)

    summary = (
        f"objective={_num(res.objective_value)} "
        f"rollout_cost={_num(rollout.switched_cost)} "
        f"num_switches={seq.num_switches} "
        f"min_dwell={_num(seq.min_dwell)} "
        f"boundary_violation={_num(rollout.boundary_violation)} "
        f"classification={cls.tag} "
        f"status={res.status} "
        f"constraint_violation={_num(res.constraint_violation)} "
        f"partial={'yes' if partial else 'no'}"
    )
    (out / "summary.txt").write_text(summary + "\n")
    print(summary)

    if cfg.emit_svg:
        t = traj.times
        line_plot(
            out / "states.svg",
            [(t, traj.states[:, i], f"x{i + 1}") for i in range(problem.state_dim)],
            title=f"{problem.name}: states",
            xlabel="t",
            ylabel="x",
        )
        line_plot(
            out / "mode.svg",
            [
                (t, traj.mode_signal, "vbar"),
                (t, seq.mode_at(t).astype(float), "mode"),
            ],
            title=f"{problem.name}: mode signal",
            xlabel="t",
            ylabel="vbar",
        )
    return traj, seq, cls, rollout


def cmd_solve(cfg: RunConfig) -> int:
    cfg.validate()
    problem, mesh = _build(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    nlp, res = _solve_one(problem, mesh, cfg.beta, cfg)
    if res.status == "failed":
        print(f"solver failed: {res.message}", file=sys.stderr)
        return EXIT_SOLVE
    _emit_solution(cfg, problem, mesh, nlp, res, out)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    cfg.validate()
    if cfg.betas is None:
        raise ConfigError("sweep requires a beta list (betas in [run] or --betas)")
    problem, mesh = _build(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    records, results = beta_sweep(problem, cfg.betas, mesh, cfg.solver)
    if cfg.emit_csv:
        header = [
            "beta",
            "objective",
            "rollout_cost_switched",
            "num_switches",
            "min_dwell",
            "max_boundary_violation",
            "status",
        ]
        rows = [
            [
                r.beta,
                r.objective,
                r.rollout_cost_switched,
                float(r.num_switches),
                r.min_dwell,
                r.max_boundary_violation,
                r.solve_status,
            ]
            for r in records
        ]
        _write_csv(out / "sweep.csv", header, rows)
    if cfg.emit_svg:
        betas = np.array([r.beta for r in records])
        objs = np.array([r.objective for r in records])
        line_plot(
            out / "sweep.svg",
            [(betas, objs, "objective")],
            title=f"{problem.name}: objective vs beta",
            xlabel="beta",
            ylabel="objective",
        )
    for r in records:
        print(
            f"beta={_num(r.beta)} objective={_num(r.objective)} "
            f"rollout_cost={_num(r.rollout_cost_switched)} "
            f"num_switches={r.num_switches} status={r.solve_status}"
        )
    if len(cfg.betas) == 1:
        res, traj, seq = results[0]
        if res.status == "failed":
            return EXIT_SOLVE
        nlp = transcribe(embed(problem, cfg.betas[0]), mesh)
        _emit_solution(cfg, problem, mesh, nlp, res, out)
    if all(r.solve_status == "failed" for r in records):
        return EXIT_SOLVE
    return EXIT_OK


def _sample_point(nlp, rng):
    """Random point in the interior of the bounds (unbounded sides capped)."""
    lo = np.where(np.isfinite(nlp.lower), nlp.lower, -2.0)
    hi = np.where(np.isfinite(nlp.upper), nlp.upper, 2.0)
    hi = np.maximum(hi, lo)
    return lo + (0.2 + 0.6 * rng.random(lo.size)) * (hi - lo)


def _audit_gradient(nlp, rng, gradient_fn):
    layout = nlp.layout
    worst = 0.0
    for _ in range(3):
        z = _sample_point(nlp, rng)
        g = gradient_fn(nlp, z)
        step = 1e-6
        idx = rng.choice(layout.length, size=min(40, layout.length), replace=False)
        for i in idx:
            e = np.zeros(layout.length)
            e[i] = step
            fd = (nlp.objective(z + e) - nlp.objective(z - e)) / (2 * step)
            scale = max(1.0, abs(fd), abs(g[i]))
            worst = max(worst, abs(g[i] - fd) / scale)
    return worst, worst < 1e-5


def _audit_jacobian(nlp, rng):
    layout = nlp.layout
    worst = 0.0
    for _ in range(2):
        z = _sample_point(nlp, rng)
        J = constraint_jacobian(nlp, z)
        J = np.asarray(J.todense()) if hasattr(J, "todense") else np.asarray(J)
        step = 1e-6
        idx = rng.choice(layout.length, size=min(25, layout.length), replace=False)
        for i in idx:
            e = np.zeros(layout.length)
            e[i] = step
            fd = (nlp.constraints(z + e) - nlp.constraints(z - e)) / (2 * step)
            scale = np.maximum(1.0, np.maximum(np.abs(fd), np.abs(J[:, i])))
            worst = max(worst, float(np.max(np.abs(J[:, i] - fd) / scale)))
    return worst, worst < 1e-5


def _audit_concavity(problem, beta, rng):
    """Second difference of H in vbar must equal -8*beta everywhere."""
    from .ocp import hamiltonian

    n, m = problem.state_dim, problem.control_dim
    b = problem.boundary
    worst = 0.0
    dv = 0.05
    for _ in range(20):
        t = b.t0 + rng.random() * (b.tf - b.t0)
        x = np.abs(rng.standard_normal(n)) + 0.5
        lam = rng.standard_normal(n)
        u = problem.control_set.midpoint if m else np.zeros(0)
        v = 0.1 + 0.8 * rng.random()
        h = [
            hamiltonian(embed(problem, beta), t, x, lam, u, u, vv)
            for vv in (v - dv, v, v + dv)
        ]
        curv = (h[0] - 2 * h[1] + h[2]) / dv**2
        worst = max(worst, abs(curv - (-8.0 * beta)) / max(1.0, 8.0 * beta))
    return worst, worst < 1e-6


def _audit_integrator(problem, beta):
    """RK4 step-halving must shrink the error by at least 8x."""
    from .ocp import Trajectory

    ep = embed(problem, beta)
    b = problem.boundary
    u = problem.control_set.midpoint
    ctl = Trajectory(
        times=np.array([b.t0, b.tf]),
        states=np.tile(b.x0, (2, 1)),
        controls_u0=np.tile(u, (2, 1)),
        controls_u1=np.tile(u, (2, 1)),
        mode_signal=np.full(2, 0.5),
    )
    coarse = sim.rollout_embedded(ep, ctl, steps_per_unit_time=4)
    half = sim.rollout_embedded(ep, ctl, steps_per_unit_time=8)
    ref = sim.rollout_embedded(ep, ctl, steps_per_unit_time=256)
    e1 = float(np.max(np.abs(coarse.final_state - ref.final_state)))
    e2 = float(np.max(np.abs(half.final_state - ref.final_state)))
    if e1 < 1e-12:  # integrator exact on this problem (polynomial dynamics)
        return float("inf"), True
    factor = e1 / max(e2, 1e-300)
    return factor, factor >= 8.0


def cmd_check(cfg: RunConfig, gradient_fn=None) -> int:
    """Run the audit table; gradient_fn overrides the gradient under test."""
    cfg.validate()
    problem, _ = _build(cfg)
    mesh = Mesh.uniform(min(cfg.mesh_n, 20), problem.boundary.t0, problem.boundary.tf, cfg.scheme)
    nlp = transcribe(embed(problem, cfg.beta), mesh)
    rng = np.random.default_rng(cfg.seed)
    if gradient_fn is None:
        gradient_fn = objective_gradient

    checks = []
    worst, ok = _audit_gradient(nlp, rng, gradient_fn)
    checks.append(("objective-gradient-fd", worst, ok))
    worst, ok = _audit_jacobian(nlp, rng)
    checks.append(("constraint-jacobian-fd", worst, ok))
    worst, ok = _audit_concavity(problem, cfg.beta, rng)
    label = "hamiltonian-concavity" + ("-flat" if cfg.beta == 0 else "")
    checks.append((label, worst, ok))
    factor, ok = _audit_integrator(problem, cfg.beta)
    checks.append(("integrator-order-factor", factor, ok))

    all_ok = True
    print(f"{'check':<28}{'metric':>14}  result")
    for name, metric, ok in checks:
        print(f"{name:<28}{metric:>14.6g}  {'pass' if ok else 'FAIL'}")
        all_ok &= ok
    return EXIT_OK if all_ok else EXIT_AUDIT


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="switchopt",
        description="Solve two-mode switched optimal control problems by embedding.",
    )
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("solve", "solve one problem at one beta"),
        ("sweep", "solve across a list of betas"),
        ("check", "run derivative/concavity/integrator audits"),
    ):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", type=str, default=None, help="TOML config file")
        sp.add_argument("--problem", type=str, default=None)
        sp.add_argument("--beta", type=float, default=None)
        sp.add_argument("--betas", type=str, default=None, help="comma-separated list")
        sp.add_argument("--mesh-n", type=int, default=None)
        sp.add_argument("--scheme", type=str, default=None, choices=SCHEMES)
        sp.add_argument("--out", type=str, default=None)
        sp.add_argument("--no-svg", action="store_true")
        sp.add_argument("--seed", type=int, default=None)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        cfg = _apply_flags(cfg, args)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        return cmd_check(cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
