"""Built-in benchmark problems: two-tank valve scheduling and a double integrator."""

from __future__ import annotations

import numpy as np

from .ocp import BoundarySpec, ControlSet, SwitchedProblem


def _sqrt_pos(x):
    # water levels below zero are unphysical; guard the square root
    return np.sqrt(np.maximum(x, 0.0))


def two_tank(alpha: float = 2.0, t0: float = 0.0, tf: float = 20.0, x0=(2.0, 2.0)) -> SwitchedProblem:
    """Two cascaded tanks fed by a valve with low (1) or high (2) flow rate.

    State is the pair of water levels; outflow of each tank is the square
    root of its level.  The cost penalizes deviation of the second tank
    from level 3.  No continuous control (m = 0); the only decision is
    the valve mode.
    """

    def f0(t, x, u):
        s1 = _sqrt_pos(x[:, 0])
        return np.stack([1.0 - s1, s1 - _sqrt_pos(x[:, 1])], axis=1)

    def f1(t, x, u):
        s1 = _sqrt_pos(x[:, 0])
        return np.stack([2.0 - s1, s1 - _sqrt_pos(x[:, 1])], axis=1)

    def level_cost(t, x, u):
        return alpha * (x[:, 1] - 3.0) ** 2

    boundary = BoundarySpec(
        t0=t0,
        tf=tf,
        x0=np.asarray(x0, dtype=float),
        xf_lower=np.array([0.0, 3.0]),
        xf_upper=np.array([4.0, 3.0]),
    )
    return SwitchedProblem(
        state_dim=2,
        control_dim=0,
        f0=f0,
        f1=f1,
        l0=level_cost,
        l1=level_cost,
        boundary=boundary,
        control_set=ControlSet.empty(),
        state_lower=np.zeros(2),
        name="two-tank",
    )


def double_integrator(t0: float = 0.0, tf: float = 2.0) -> SwitchedProblem:
    """Double integrator with u in [-1, 1] driven through the embedded pipeline.

    The scalar control is identified with the relaxed mode signal by
    u = 2*vbar - 1, so mode 0 is u = -1 and mode 1 is u = +1.  Under this
    map the penalty term beta*(1 - u^2) coincides identically with the
    auxiliary switching cost 4*beta*(vbar - vbar^2), so it is supplied by
    passing beta to ``embed`` rather than by the running costs here.
    """

    def f0(t, x, u):
        return np.stack([x[:, 1], np.full(x.shape[0], -1.0)], axis=1)

    def f1(t, x, u):
        return np.stack([x[:, 1], np.full(x.shape[0], 1.0)], axis=1)

    def position_cost(t, x, u):
        return x[:, 0] ** 2

    l0 = l1 = position_cost

    boundary = BoundarySpec(
        t0=t0,
        tf=tf,
        x0=np.array([1.0, 0.0]),
        xf_lower=np.array([0.0, 0.0]),
        xf_upper=np.array([0.0, 0.0]),
    )
    return SwitchedProblem(
        state_dim=2,
        control_dim=0,
        f0=f0,
        f1=f1,
        l0=l0,
        l1=l1,
        boundary=boundary,
        control_set=ControlSet.empty(),
        name="double-integrator",
    )


def di_control_from_mode(vbar):
    """Affine map from the relaxed mode signal to the physical control u."""
    return 2.0 * np.asarray(vbar, dtype=float) - 1.0


CATALOG = {
    "two-tank": two_tank,
    "double-integrator": double_integrator,
}


def make_problem(name: str, **params) -> SwitchedProblem:
    if name not in CATALOG:
        raise KeyError(f"unknown problem {name!r}; known: {sorted(CATALOG)}")
    return CATALOG[name](**params)
