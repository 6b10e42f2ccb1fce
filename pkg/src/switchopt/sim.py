"""Reference integration of switched and embedded dynamics.

Classical RK4 with step boundaries aligned to every switch instant (and,
for embedded rollouts, to the interpolation grid), so no step straddles a
discontinuity or kink.  The running cost is accumulated through an
augmented quadrature state integrated by the same scheme, which keeps
cost and state accuracy consistent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ocp import EmbeddedProblem, SwitchedProblem, Trajectory, _aux_unchecked


@dataclass(frozen=True)
class RolloutResult:
    times: np.ndarray
    states: np.ndarray
    running_cost: float
    terminal_cost: float
    final_state: np.ndarray
    ok: bool

    @property
    def total_cost(self) -> float:
        return self.running_cost + self.terminal_cost


def _breakpoints(t0, tf, interior):
    pts = [t0]
    for t in sorted(interior):
        if t0 < t < tf and t - pts[-1] > 0.0:
            pts.append(float(t))
    pts.append(tf)
    return pts


def _rk4(rhs, t0, t1, y0, nsteps):
    """Integrate y' = rhs(t, y) over [t0, t1]; returns (times, samples, ok)."""
    h = (t1 - t0) / nsteps
    times = [t0]
    ys = [y0]
    y = y0
    for i in range(nsteps):
        t = t0 + i * h
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        times.append(t0 + (i + 1) * h)
        ys.append(y)
        if not np.all(np.isfinite(y)):
            return np.array(times), np.array(ys), False
    return np.array(times), np.array(ys), True


def _zero_control(t):
    return np.zeros(0)


def rollout_switched(
    problem: SwitchedProblem,
    seq,
    u_of_t=None,
    steps_per_unit_time: int = 200,
) -> RolloutResult:
    """Integrate the switched dynamics under a mode sequence.

    ``seq`` must expose ``initial_mode`` and ``switch_times``; ``u_of_t``
    maps time to a control vector (ignored when control_dim == 0).
    """
    b = problem.boundary
    if u_of_t is None:
        u_of_t = _zero_control
    fields = (problem.f0, problem.f1)
    costs = (problem.l0, problem.l1)

    pts = _breakpoints(b.t0, b.tf, seq.switch_times)
    mode = int(seq.initial_mode)
    # mode after each switch instant inside (t0, tf)
    n_sw_before = 0
    all_t = [np.array([b.t0])]
    all_x = [b.x0[None, :]]
    y = np.concatenate([b.x0, [0.0]])
    ok = True
    for a, c in zip(pts[:-1], pts[1:]):
        n_sw_before = sum(1 for s in seq.switch_times if s <= a + 1e-15 and s > b.t0)
        mode = (int(seq.initial_mode) + n_sw_before) % 2
        f, l = fields[mode], costs[mode]

        def rhs(t, y):
            tb = np.atleast_1d(t)
            xb = y[None, :-1]
            ub = np.atleast_1d(u_of_t(t))[None, :]
            return np.concatenate([f(tb, xb, ub)[0], l(tb, xb, ub)])

        nsteps = max(1, math.ceil((c - a) * steps_per_unit_time))
        seg_t, seg_y, seg_ok = _rk4(rhs, a, c, y, nsteps)
        y = seg_y[-1]
        all_t.append(seg_t[1:])
        all_x.append(seg_y[1:, :-1])
        if not seg_ok:
            ok = False
            break
    times = np.concatenate(all_t)
    states = np.concatenate(all_x)
    xf = states[-1]
    running = float(y[-1]) if np.isfinite(y[-1]) else float("nan")
    terminal = float(problem.terminal_cost(b.t0, b.x0, b.tf, xf)) if ok else float("nan")
    return RolloutResult(times, states, running, terminal, xf, ok)


def rollout_embedded(
    problem: EmbeddedProblem,
    traj_controls: Trajectory,
    steps_per_unit_time: int = 200,
) -> RolloutResult:
    """Integrate the embedded dynamics under interpolated (u0, u1, vbar).

    The control and mode signals come from ``traj_controls`` by
    piecewise-linear interpolation; the accumulated cost includes the
    auxiliary switching penalty.
    """
    base = problem.base
    b = base.boundary
    tr = traj_controls

    def rhs(t, y):
        tb = np.atleast_1d(t)
        xb = y[None, :-1]
        v = tr.interp_mode(t)
        u0 = tr.interp_control(t, 0).reshape(1, -1)
        u1 = tr.interp_control(t, 1).reshape(1, -1)
        vb = np.atleast_1d(v)
        xdot = problem.dynamics(tb, xb, u0, u1, vb)[0]
        ldot = problem.running_cost(tb, xb, u0, u1, vb)
        return np.concatenate([xdot, ldot])

    pts = _breakpoints(b.t0, b.tf, tr.times[1:-1])
    y = np.concatenate([b.x0, [0.0]])
    all_t = [np.array([b.t0])]
    all_x = [b.x0[None, :]]
    ok = True
    for a, c in zip(pts[:-1], pts[1:]):
        nsteps = max(1, math.ceil((c - a) * steps_per_unit_time))
        seg_t, seg_y, seg_ok = _rk4(rhs, a, c, y, nsteps)
        y = seg_y[-1]
        all_t.append(seg_t[1:])
        all_x.append(seg_y[1:, :-1])
        if not seg_ok:
            ok = False
            break
    times = np.concatenate(all_t)
    states = np.concatenate(all_x)
    xf = states[-1]
    running = float(y[-1]) if np.isfinite(y[-1]) else float("nan")
    terminal = float(base.terminal_cost(b.t0, b.x0, b.tf, xf)) if ok else float("nan")
    return RolloutResult(times, states, running, terminal, xf, ok)
