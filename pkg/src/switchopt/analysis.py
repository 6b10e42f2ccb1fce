"""Interpretation of solved trajectories.

Classifies singular vs bang-bang (regular) solutions, extracts binary
mode sequences from the relaxed mode signal, measures dwell times, rolls
extracted sequences out on the original switched dynamics, estimates
costates from collocation multipliers, audits the Pontryagin structure,
and runs beta sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import sim
from .nlp import SolveOptions, SolveResult, default_initializer, solve
from .ocp import (
    CostateTrajectory,
    EmbeddedProblem,
    SwitchedProblem,
    Trajectory,
    _aux_unchecked,
    check_dwell,
    embed,
)
from .transcription import Mesh, transcribe, trajectory_from_vector

DEFAULT_DELTA = 0.05
DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class ModeSequence:
    """Piecewise-constant binary mode signal with sorted switch instants."""

    initial_mode: int
    switch_times: tuple
    t0: float
    tf: float

    def __post_init__(self):
        st = tuple(float(s) for s in self.switch_times)
        if any(b < a for a, b in zip(st, st[1:])):
            raise ValueError("switch times must be sorted")
        object.__setattr__(self, "switch_times", st)

    @property
    def num_switches(self) -> int:
        return len(self.switch_times)

    @property
    def min_dwell(self) -> float:
        """Smallest gap between consecutive switches; horizon if < 2 switches."""
        if len(self.switch_times) < 2:
            return self.tf - self.t0
        return float(min(np.diff(self.switch_times)))

    def mode_at(self, t):
        """Mode value at time t (right-continuous at switches)."""
        t = np.asarray(t, dtype=float)
        count = np.searchsorted(np.asarray(self.switch_times), t, side="right")
        return (self.initial_mode + count) % 2


@dataclass(frozen=True)
class SolutionClass:
    tag: str  # regular | singular
    singular_measure: float
    threshold: float

    @property
    def is_singular(self) -> bool:
        return self.tag == "singular"


@dataclass(frozen=True)
class RolloutReport:
    final_state: np.ndarray
    switched_cost: float
    boundary_violation: float
    ok: bool


@dataclass(frozen=True)
class SweepRecord:
    beta: float
    objective: float
    rollout_cost_switched: float
    num_switches: int
    min_dwell: float
    max_boundary_violation: float
    solve_status: str


def _interval_measure_inside(va, vb, lo, hi, dt):
    """Time a linear segment from va to vb (duration dt) spends in (lo, hi)."""
    if va == vb:
        return dt if lo < va < hi else 0.0
    # parameter range where lo < v < hi
    s_lo = (lo - va) / (vb - va)
    s_hi = (hi - va) / (vb - va)
    a, b = min(s_lo, s_hi), max(s_lo, s_hi)
    return dt * max(0.0, min(1.0, b) - max(0.0, a))


def classify(traj: Trajectory, delta: float = DEFAULT_DELTA) -> SolutionClass:
    """Flag solutions whose mode signal lingers strictly inside (delta, 1-delta).

    The piecewise-linear signal is cut into contiguous in-band spans;
    spans that merely cross the band between binary samples (no node
    strictly inside it) are bang-bang transients and are discarded.
    Singular iff the longest remaining span exceeds two mesh intervals'
    (average) duration; ``singular_measure`` totals all remaining spans.
    """
    if not 0 < delta < 0.5:
        raise ValueError("delta must lie in (0, 0.5)")
    t, v = traj.times, traj.mode_signal
    lo, hi = delta, 1.0 - delta
    longest = 0.0
    measure = 0.0
    cur_start = cur_end = None
    cur_has_node = False

    def commit():
        nonlocal longest, measure
        if cur_start is not None and cur_has_node:
            measure += cur_end - cur_start
            longest = max(longest, cur_end - cur_start)

    for k in range(t.size - 1):
        va, vb, dt = v[k], v[k + 1], t[k + 1] - t[k]
        if va == vb:
            sa, sb = (0.0, 1.0) if lo < va < hi else (1.0, 0.0)
        else:
            s0, s1 = (lo - va) / (vb - va), (hi - va) / (vb - va)
            sa = max(0.0, min(s0, s1))
            sb = min(1.0, max(s0, s1))
        if sb <= sa:
            commit()
            cur_start = cur_end = None
            cur_has_node = False
            continue
        a, b = t[k] + sa * dt, t[k] + sb * dt
        if cur_end is not None and a <= cur_end + 1e-12:
            cur_end = max(cur_end, b)
        else:
            commit()
            cur_start, cur_end = a, b
            cur_has_node = lo < va < hi
        if lo < vb < hi:
            cur_has_node = True
    commit()
    mean_h = (t[-1] - t[0]) / (t.size - 1)
    tag = "singular" if longest > 2.0 * mean_h else "regular"
    return SolutionClass(tag=tag, singular_measure=float(measure), threshold=delta)


def extract_modes(traj: Trajectory, threshold: float = DEFAULT_THRESHOLD) -> ModeSequence:
    """Threshold the piecewise-linear mode signal into a binary sequence.

    Mode is 1 where vbar > threshold (ties go to mode 0); switch instants
    are located by linear interpolation of the crossings and coincident
    switch pairs are merged away.
    """
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    t, v = traj.times, traj.mode_signal
    modes = (v > threshold).astype(int)
    switches = []
    for k in range(t.size - 1):
        if modes[k] != modes[k + 1]:
            s = t[k] + (threshold - v[k]) / (v[k + 1] - v[k]) * (t[k + 1] - t[k])
            switches.append(float(np.clip(s, t[k], t[k + 1])))
    # merge coincident crossing pairs (signal touching the threshold)
    merged = []
    for s in switches:
        if merged and s - merged[-1] <= 0.0:
            merged.pop()
        else:
            merged.append(s)
    return ModeSequence(
        initial_mode=int(modes[0]),
        switch_times=tuple(merged),
        t0=float(t[0]),
        tf=float(t[-1]),
    )


def project_and_rollout(
    problem: SwitchedProblem,
    seq: ModeSequence,
    u_of_t=None,
    steps_per_unit_time: int = 400,
) -> RolloutReport:
    """Integrate the switched dynamics under seq and score the result."""
    b = problem.boundary
    if seq.switch_times and (seq.switch_times[0] < b.t0 or seq.switch_times[-1] > b.tf):
        raise ValueError("mode sequence exceeds the problem horizon")
    res = sim.rollout_switched(problem, seq, u_of_t=u_of_t, steps_per_unit_time=steps_per_unit_time)
    xf = res.final_state
    if res.ok:
        viol = float(
            np.max(np.maximum(b.xf_lower - xf, xf - b.xf_upper), initial=0.0)
        )
        viol = max(viol, 0.0)
    else:
        viol = float("inf")
    return RolloutReport(
        final_state=xf,
        switched_cost=res.total_cost,
        boundary_violation=viol,
        ok=res.ok,
    )


def estimate_costates(result: SolveResult, mesh: Mesh, problem: EmbeddedProblem) -> CostateTrajectory:
    """Costates from defect multipliers.

    Convention: with defects c_k = x_{k+1} - x_k - quadrature(f) and the
    objective carrying the quadrature weights, the multiplier mu_k of
    interval k approximates -lambda on that interval.  Node values are
    the mean of the two adjacent interval values; endpoints copy the
    single adjacent interval.  Diagnostic quality only.
    """
    n = problem.base.state_dim
    N = mesh.num_intervals
    mu = np.asarray(result.multipliers, dtype=float)
    if mu.size != N * n:
        raise ValueError("multiplier count does not match the mesh")
    lam_int = -mu.reshape(N, n)
    lam = np.empty((N + 1, n))
    lam[0] = lam_int[0]
    lam[-1] = lam_int[-1]
    lam[1:-1] = 0.5 * (lam_int[:-1] + lam_int[1:])
    return CostateTrajectory(times=mesh.grid, costates=lam)


@dataclass(frozen=True)
class HamiltonianNodeReport:
    time: float
    minimizer: float
    at_boundary: bool
    matches_solved: bool
    flat: bool


def hamiltonian_profile(
    problem: EmbeddedProblem,
    traj: Trajectory,
    costates: CostateTrajectory,
    grid_points: int = 1001,
    match_tol: float = 0.05,
    flat_tol: float = 1e-9,
):
    """Grid-minimize vbar -> H at every node and compare with the solution.

    H is affine in vbar apart from the concave parabola, so it is
    evaluated from its values at vbar = 0 and 1 plus the parabola.
    """
    if costates.times.shape != traj.times.shape or np.any(costates.times != traj.times):
        raise ValueError("costate grid must match the trajectory grid")
    base = problem.base
    t = traj.times
    vgrid = np.linspace(0.0, 1.0, grid_points)
    X, U0, U1 = traj.states, traj.controls_u0, traj.controls_u1
    f0 = base.f0(t, X, U0)
    f1 = base.f1(t, X, U1)
    l0 = base.l0(t, X, U0)
    l1 = base.l1(t, X, U1)
    h0 = np.einsum("ki,ki->k", costates.costates, f0) + l0
    h1 = np.einsum("ki,ki->k", costates.costates, f1) + l1
    reports = []
    for k in range(t.size):
        H = (1.0 - vgrid) * h0[k] + vgrid * h1[k] + _aux_unchecked(vgrid, problem.beta)
        i = int(np.argmin(H))
        vstar = float(vgrid[i])
        reports.append(
            HamiltonianNodeReport(
                time=float(t[k]),
                minimizer=vstar,
                at_boundary=(i == 0 or i == grid_points - 1),
                matches_solved=abs(vstar - traj.mode_signal[k]) <= match_tol,
                flat=float(H.max() - H.min()) <= flat_tol,
            )
        )
    return reports


def aux_cost_quadrature(nlp, z) -> float:
    """Transcribed-objective contribution of the auxiliary cost along z.

    Equals objective(beta) - objective(0) evaluated at the same decision
    vector; used to audit the beta artifact.
    """
    ep = nlp.problem
    zero = transcribe(embed(ep.base, 0.0), nlp.mesh)
    return float(nlp.objective(z) - zero.objective(z))


def beta_sweep(
    problem: SwitchedProblem,
    betas,
    mesh: Mesh,
    opts: SolveOptions = SolveOptions(),
    delta: float = DEFAULT_DELTA,
    threshold: float = DEFAULT_THRESHOLD,
    steps_per_unit_time: int = 400,
):
    """Embed/transcribe/solve for each beta from a common initializer.

    Individual solver failures are recorded in the per-record status and
    do not abort the sweep; records come back in input order.
    """
    if any(b < 0 for b in betas):
        raise ValueError("betas must be non-negative")
    records = []
    results = []
    for beta in betas:
        ep = embed(problem, beta)
        nlp = transcribe(ep, mesh)
        z0 = default_initializer(ep, mesh)
        res = solve(nlp, z0, opts)
        traj = trajectory_from_vector(nlp, res.z_opt)
        seq = extract_modes(traj, threshold)
        if res.status == "failed":
            rollout = RolloutReport(
                final_state=np.full(problem.state_dim, np.nan),
                switched_cost=float("nan"),
                boundary_violation=float("inf"),
                ok=False,
            )
        else:
            rollout = project_and_rollout(
                problem, seq, steps_per_unit_time=steps_per_unit_time
            )
        records.append(
            SweepRecord(
                beta=float(beta),
                objective=res.objective_value,
                rollout_cost_switched=rollout.switched_cost,
                num_switches=seq.num_switches,
                min_dwell=seq.min_dwell,
                max_boundary_violation=rollout.boundary_violation,
                solve_status=res.status,
            )
        )
        results.append((res, traj, seq))
    return records, results
