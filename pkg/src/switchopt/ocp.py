"""Switched and embedded optimal control problem definitions.

A two-mode switched system is described by a pair of vector fields
(f0, f1) and running costs (l0, l1).  Embedding replaces the binary mode
signal with a continuous one, vbar in [0, 1], so the problem becomes a
conventional smooth optimal control problem.  A concave auxiliary cost
4*beta*(vbar - vbar^2) pushes solutions back to the binary extremes.

Callback convention: vector fields and running costs are vectorized over
a leading sample axis,

    f(t, x, u) -> xdot    with t: (K,), x: (K, n), u: (K, m), xdot: (K, n)
    l(t, x, u) -> cost    with the same inputs, cost: (K,)

Problems with no continuous control use m = 0 and receive u of shape
(K, 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

VectorField = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
RunningCost = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
TerminalCost = Callable[[float, np.ndarray, float, np.ndarray], float]

VBAR_TOL = 1e-9


def _freeze(obj, name, value):
    object.__setattr__(obj, name, value)


@dataclass(frozen=True)
class ControlSet:
    """Componentwise box bounds for the continuous control input."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape:
            raise ValueError("control bounds must have matching shapes")
        if lo.size and (not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi))):
            raise ValueError("control set must be compact (finite bounds)")
        if np.any(lo > hi):
            raise ValueError("control lower bounds exceed upper bounds")
        _freeze(self, "lower", lo)
        _freeze(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @staticmethod
    def empty() -> "ControlSet":
        return ControlSet(np.zeros(0), np.zeros(0))


@dataclass(frozen=True)
class BoundarySpec:
    """Fixed initial time/state, fixed final time, box on the final state."""

    t0: float
    tf: float
    x0: np.ndarray
    xf_lower: np.ndarray
    xf_upper: np.ndarray

    def __post_init__(self):
        if not self.tf > self.t0:
            raise ValueError("tf must exceed t0")
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        lo = np.atleast_1d(np.asarray(self.xf_lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.xf_upper, dtype=float))
        if not (x0.shape == lo.shape == hi.shape):
            raise ValueError("boundary vectors must share one shape")
        if np.any(lo > hi):
            raise ValueError("final-state box is empty")
        _freeze(self, "x0", x0)
        _freeze(self, "xf_lower", lo)
        _freeze(self, "xf_upper", hi)

    @property
    def horizon(self) -> float:
        return self.tf - self.t0


def _zero_terminal_cost(t0, x0, tf, xf) -> float:
    return 0.0


@dataclass(frozen=True)
class SwitchedProblem:
    """Two-mode switched optimal control problem.

    Mode 0 runs (f0, l0), mode 1 runs (f1, l1).  The optional state box
    (state_lower/state_upper) is enforced by the transcription, not by
    the continuous-time formulation.
    """

    state_dim: int
    control_dim: int
    f0: VectorField
    f1: VectorField
    l0: RunningCost
    l1: RunningCost
    boundary: BoundarySpec
    control_set: ControlSet
    terminal_cost: TerminalCost = _zero_terminal_cost
    dwell_time: float = 0.0
    state_lower: np.ndarray | None = None
    state_upper: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        if self.state_dim <= 0:
            raise ValueError("state_dim must be positive")
        if self.control_dim < 0:
            raise ValueError("control_dim must be non-negative")
        if self.control_set.dim != self.control_dim:
            raise ValueError("control_set dimension mismatch")
        if self.boundary.x0.size != self.state_dim:
            raise ValueError("boundary state dimension mismatch")
        if self.dwell_time < 0:
            raise ValueError("dwell_time must be non-negative")
        lo = self.state_lower
        hi = self.state_upper
        lo = np.full(self.state_dim, -np.inf) if lo is None else np.asarray(lo, float)
        hi = np.full(self.state_dim, np.inf) if hi is None else np.asarray(hi, float)
        _freeze(self, "state_lower", lo)
        _freeze(self, "state_upper", hi)


def aux_cost(vbar, beta):
    """Concave switching penalty 4*beta*(vbar - vbar^2).

    Zero at vbar in {0, 1}, peaks at beta for vbar = 0.5.  Rejects
    arguments outside [0, 1] beyond a 1e-9 tolerance.
    """
    v = np.asarray(vbar, dtype=float)
    if np.any(v < -VBAR_TOL) or np.any(v > 1.0 + VBAR_TOL):
        raise ValueError("vbar outside [0, 1]")
    if beta < 0:
        raise ValueError("beta must be non-negative")
    v = np.clip(v, 0.0, 1.0)
    out = 4.0 * beta * (v - v * v)
    return float(out) if np.isscalar(vbar) else out


def _aux_unchecked(v, beta):
    # internal form without range validation, safe under finite differencing
    return 4.0 * beta * (v - v * v)


def _aux_grad(v, beta):
    return 4.0 * beta * (1.0 - 2.0 * v)


@dataclass(frozen=True)
class EmbeddedProblem:
    """Continuous relaxation of a SwitchedProblem with switching penalty beta."""

    base: SwitchedProblem
    beta: float

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be non-negative")

    def dynamics(self, t, x, u0, u1, vbar):
        """Convex combination [1-vbar]*f0(t,x,u0) + vbar*f1(t,x,u1)."""
        w = np.asarray(vbar, dtype=float)[..., None]
        return (1.0 - w) * self.base.f0(t, x, u0) + w * self.base.f1(t, x, u1)

    def running_cost(self, t, x, u0, u1, vbar):
        """[1-vbar]*l0 + vbar*l1 plus the auxiliary switching cost."""
        w = np.asarray(vbar, dtype=float)
        mixed = (1.0 - w) * self.base.l0(t, x, u0) + w * self.base.l1(t, x, u1)
        return mixed + _aux_unchecked(w, self.beta)


def embed(problem: SwitchedProblem, beta: float) -> EmbeddedProblem:
    """Embed a switched problem into a continuous one with penalty weight beta."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    return EmbeddedProblem(base=problem, beta=float(beta))


def hamiltonian(problem: EmbeddedProblem, t, x, lam, u0, u1, vbar) -> float:
    """Pontryagin Hamiltonian of the embedded problem at one point.

    <lam, dynamics> + mixed running cost + auxiliary cost.  vbar must lie
    in [0, 1]; all vectors must match the problem dimensions.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    u0 = np.atleast_1d(np.asarray(u0, dtype=float))
    u1 = np.atleast_1d(np.asarray(u1, dtype=float))
    n = problem.base.state_dim
    m = problem.base.control_dim
    if x.size != n or lam.size != n:
        raise ValueError("state/costate dimension mismatch")
    if u0.size != m or u1.size != m:
        raise ValueError("control dimension mismatch")
    if not (-VBAR_TOL <= vbar <= 1.0 + VBAR_TOL):
        raise ValueError("vbar outside [0, 1]")
    tb = np.atleast_1d(float(t))
    xb, u0b, u1b = x[None, :], u0[None, :], u1[None, :]
    vb = np.atleast_1d(float(np.clip(vbar, 0.0, 1.0)))
    f = problem.dynamics(tb, xb, u0b, u1b, vb)[0]
    l = problem.running_cost(tb, xb, u0b, u1b, vb)[0]
    return float(lam @ f + l)


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution on a time grid with piecewise-linear interpolation."""

    times: np.ndarray
    states: np.ndarray
    controls_u0: np.ndarray
    controls_u1: np.ndarray
    mode_signal: np.ndarray
    interpolation: str = "piecewise-linear"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
            raise ValueError("times must be a strictly increasing grid")
        _freeze(self, "times", t)
        _freeze(self, "states", np.asarray(self.states, dtype=float))
        _freeze(self, "controls_u0", np.asarray(self.controls_u0, dtype=float))
        _freeze(self, "controls_u1", np.asarray(self.controls_u1, dtype=float))
        _freeze(self, "mode_signal", np.asarray(self.mode_signal, dtype=float))
        if self.states.shape[0] != t.size or self.mode_signal.shape[0] != t.size:
            raise ValueError("sample counts must match the time grid")

    def interp_mode(self, t):
        return np.interp(t, self.times, self.mode_signal)

    def interp_state(self, t):
        t = np.asarray(t, dtype=float)
        return np.stack(
            [np.interp(t, self.times, self.states[:, j]) for j in range(self.states.shape[1])],
            axis=-1,
        )

    def interp_control(self, t, which=0):
        ctrl = self.controls_u0 if which == 0 else self.controls_u1
        m = ctrl.shape[1] if ctrl.ndim == 2 else 0
        t = np.asarray(t, dtype=float)
        if m == 0:
            return np.zeros(t.shape + (0,))
        return np.stack([np.interp(t, self.times, ctrl[:, j]) for j in range(m)], axis=-1)


@dataclass(frozen=True)
class CostateTrajectory:
    """Costate samples on the same grid as an associated Trajectory."""

    times: np.ndarray
    costates: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        lam = np.asarray(self.costates, dtype=float)
        if lam.shape[0] != t.size:
            raise ValueError("costate sample count must match the grid")
        _freeze(self, "times", t)
        _freeze(self, "costates", lam)


@dataclass(frozen=True)
class DwellReport:
    ok: bool
    min_gap: float
    violations: tuple = ()


def check_dwell(seq, dwell_time: float) -> DwellReport:
    """Check that consecutive switch instants are separated by dwell_time.

    ``seq`` is a ModeSequence or any sequence of sorted switch instants.
    Fewer than two switches is vacuously compliant.
    """
    times = getattr(seq, "switch_times", seq)
    times = np.asarray(list(times), dtype=float)
    if times.size < 2:
        return DwellReport(ok=True, min_gap=np.inf)
    gaps = np.diff(times)
    bad = [
        (float(times[i]), float(times[i + 1]))
        for i, g in enumerate(gaps)
        if g < dwell_time
    ]
    return DwellReport(ok=not bad, min_gap=float(gaps.min()), violations=tuple(bad))
