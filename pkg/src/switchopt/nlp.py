"""Augmented Lagrangian solver for the transcribed programs.

Outer loop: first-order multiplier updates with penalty growth when
feasibility stalls.  Inner loop: bound-constrained limited-memory
quasi-Newton (scipy's L-BFGS-B) on the augmented Lagrangian, which
handles the variable boxes by projection.  Everything is deterministic
for fixed inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.optimize
import scipy.sparse as sp

from .ocp import EmbeddedProblem
from .transcription import Mesh, NlpProblem


@dataclass(frozen=True)
class SolveOptions:
    max_outer_iters: int = 30
    max_inner_iters: int = 500
    constraint_tol: float = 1e-6
    optimality_tol: float = 1e-6
    initial_penalty: float = 10.0
    penalty_growth: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.constraint_tol <= 0 or self.optimality_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.penalty_growth <= 1:
            raise ValueError("penalty_growth must exceed 1")


@dataclass
class OuterIteration:
    index: int
    objective: float
    constraint_violation: float
    projected_gradient: float
    penalty: float
    inner_iters: int


@dataclass
class SolveResult:
    z_opt: np.ndarray
    objective_value: float
    constraint_violation: float
    multipliers: np.ndarray
    status: str  # converged | max-iters | failed
    iterations: int
    function_evals: int
    history: list = field(default_factory=list)
    message: str = ""


def _proj_grad_norm(z, g, lo, hi):
    return float(np.max(np.abs(z - np.clip(z - g, lo, hi)), initial=0.0))


def solve(nlp: NlpProblem, z0, opts: SolveOptions = SolveOptions()) -> SolveResult:
    """Solve the bound-constrained equality-constrained program from z0."""
    lo, hi = nlp.lower, nlp.upper
    z = np.clip(np.asarray(z0, dtype=float), lo, hi)
    mc = nlp.n_constraints
    mu = np.zeros(mc)
    rho = float(opts.initial_penalty)
    counters = {"fev": 0}

    def full(zz):
        counters["fev"] += 1
        return nlp.full_eval(zz)

    try:
        f0, g0, c0, J0 = full(z)
    except FloatingPointError:
        f0, c0 = np.nan, np.full(mc, np.nan)
    if not (np.isfinite(f0) and np.all(np.isfinite(c0))):
        return SolveResult(
            z_opt=z,
            objective_value=float(f0),
            constraint_violation=float(np.max(np.abs(c0), initial=0.0)),
            multipliers=mu,
            status="failed",
            iterations=0,
            function_evals=counters["fev"],
            message="non-finite objective or constraints at the initial point",
        )

    bounds = list(zip(lo, hi))
    history: list[OuterIteration] = []
    total_inner = 0
    rho_cap = 1e8
    # LANCELOT-style tolerance sequence: loose early, tightened with progress
    eta = 1.0 / rho**0.1
    omega = 1.0 / rho
    prev_viol = np.inf
    best = None  # (key, z, f, viol, mu)

    status = "max-iters"
    for outer in range(opts.max_outer_iters):

        def al_fun(zz, mu=mu, rho=rho):
            f, g, c, J = full(zz)
            val = f + c @ mu + 0.5 * rho * float(c @ c)
            grad = g + J.T @ (mu + rho * c)
            return val, grad

        res = scipy.optimize.minimize(
            al_fun,
            z,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={
                "maxiter": opts.max_inner_iters,
                "maxcor": 10,
                "ftol": 1e-16,
                "gtol": max(omega, opts.optimality_tol * 0.1),
                "maxls": 60,
            },
        )
        z_new = np.clip(res.x, lo, hi)
        stalled = float(np.max(np.abs(z_new - z), initial=0.0)) < 1e-14
        z = z_new
        total_inner += res.nit
        f, g, c, J = full(z)
        viol = float(np.max(np.abs(c), initial=0.0))
        mu_new = mu + rho * c
        gL = g + J.T @ mu_new
        pg = _proj_grad_norm(z, gL, lo, hi)
        history.append(OuterIteration(outer, f, viol, pg, rho, res.nit))

        feasible = viol <= opts.constraint_tol
        key = (not feasible, f if feasible else viol)
        if best is None or key < best[0]:
            best = (key, z.copy(), f, viol, mu_new.copy())

        if feasible and pg <= opts.optimality_tol:
            mu = mu_new
            status = "converged"
            break
        if not np.isfinite(f) or not np.isfinite(viol):
            status = "failed"
            break
        if stalled and rho >= rho_cap:
            break

        if viol <= max(min(eta, prev_viol), opts.constraint_tol):
            mu = mu_new
            eta = max(eta / rho**0.9, 0.1 * opts.constraint_tol)
            omega = max(omega / rho, 0.1 * opts.optimality_tol)
        else:
            rho = min(rho * opts.penalty_growth, rho_cap)
            eta = max(1.0 / rho**0.1, 0.1 * opts.constraint_tol)
            omega = max(1.0 / rho, 0.1 * opts.optimality_tol)
        prev_viol = min(prev_viol, viol)

    if status != "converged" and best is not None:
        _, z, f, viol, mu = best
    return SolveResult(
        z_opt=z,
        objective_value=float(f),
        constraint_violation=float(viol),
        multipliers=mu,
        status=status,
        iterations=total_inner,
        function_evals=counters["fev"],
        history=history,
    )


def default_initializer(problem: EmbeddedProblem, mesh: Mesh) -> np.ndarray:
    """Straight-line states, midpoint controls, mode signal 0.5.

    States interpolate linearly from x0 to the midpoint of the final
    box (components with an unbounded box fall back to the x0 value).
    """
    base = problem.base
    b = base.boundary
    K = mesh.num_intervals + 1
    target = 0.5 * (b.xf_lower + b.xf_upper)
    target = np.where(np.isfinite(target), target, b.x0)
    tau = (mesh.grid - b.t0) / (b.tf - b.t0)
    X = b.x0[None, :] + tau[:, None] * (target - b.x0)[None, :]
    U = np.tile(base.control_set.midpoint, (K, 1))
    V = np.full(K, 0.5)
    from .transcription import DecisionLayout

    lay = DecisionLayout(base.state_dim, base.control_dim, mesh.num_intervals)
    return lay.pack(X, U, U, V)
