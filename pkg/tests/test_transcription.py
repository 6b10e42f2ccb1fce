import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from switchopt import (
    DecisionLayout,
    Mesh,
    double_integrator,
    embed,
    rollout_embedded,
    trajectory_from_vector,
    transcribe,
    two_tank,
)
from switchopt.ocp import BoundarySpec, ControlSet, SwitchedProblem, Trajectory
from switchopt.transcription import _fd_gradient, _fd_jacobian


def _sample_point(nlp, rng):
    lo = np.where(np.isfinite(nlp.lower), nlp.lower, -2.0)
    hi = np.where(np.isfinite(nlp.upper), nlp.upper, 2.0)
    hi = np.maximum(hi, lo)
    return lo + (0.2 + 0.6 * rng.random(lo.size)) * (hi - lo)


def _constant_field_problem(c):
    c = np.asarray(c, float)

    def f(t, x, u):
        return np.tile(c, (x.shape[0], 1))

    def l(t, x, u):
        return np.zeros(x.shape[0])

    return SwitchedProblem(
        state_dim=c.size,
        control_dim=0,
        f0=f,
        f1=f,
        l0=l,
        l1=l,
        boundary=BoundarySpec(0.0, 1.0, np.zeros(c.size), np.full(c.size, -np.inf), np.full(c.size, np.inf)),
        control_set=ControlSet.empty(),
    )


# --- mesh and layout ----------------------------------------------------


def test_mesh_validation():
    with pytest.raises(ValueError):
        Mesh(np.array([0.0, 0.0, 1.0]))
    with pytest.raises(ValueError):
        Mesh(np.array([0.0, 1.0]), scheme="euler")
    m = Mesh.uniform(4, 0.0, 2.0)
    np.testing.assert_allclose(m.h, 0.5)
    assert m.num_intervals == 4


def test_transcribe_rejects_horizon_mismatch():
    p = two_tank()
    with pytest.raises(ValueError):
        transcribe(embed(p, 0.0), Mesh.uniform(10, 0.0, 19.0))


@given(
    n=st.integers(min_value=1, max_value=3),
    m=st.integers(min_value=0, max_value=2),
    N=st.integers(min_value=1, max_value=6),
    seed=st.integers(min_value=0, max_value=1000),
)
def test_pack_unpack_round_trip(n, m, N, seed):
    lay = DecisionLayout(n, m, N)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(lay.length)
    X, U0, U1, V = lay.unpack(z)
    np.testing.assert_array_equal(lay.pack(X, U0, U1, V), z)
    assert X.shape == (N + 1, n)
    assert U0.shape == U1.shape == (N + 1, m)
    assert V.shape == (N + 1,)


def test_layout_index_map():
    lay = DecisionLayout(2, 1, 3)
    z = np.arange(float(lay.length))
    X, U0, U1, V = lay.unpack(z)
    assert z[lay.index("x", 2, 1)] == X[2, 1]
    assert z[lay.index("u0", 1, 0)] == U0[1, 0]
    assert z[lay.index("u1", 3, 0)] == U1[3, 0]
    assert z[lay.index("v", 0)] == V[0]
    with pytest.raises(IndexError):
        lay.index("x", 4)


# --- defects ------------------------------------------------------------


@pytest.mark.parametrize("scheme", ["trapezoidal", "hermite-simpson"])
def test_constant_dynamics_zero_defects(scheme):
    c = np.array([1.5, -0.25])
    p = _constant_field_problem(c)
    mesh = Mesh.uniform(7, 0.0, 1.0, scheme)
    nlp = transcribe(embed(p, 0.0), mesh)
    X = mesh.grid[:, None] * c[None, :]
    z = nlp.layout.pack(X, np.zeros((8, 0)), np.zeros((8, 0)), np.full(8, 0.4))
    np.testing.assert_allclose(nlp.constraints(z), 0.0, atol=1e-13)


def _di_analytic_vector(nlp, mesh):
    """Closed-form bang-bang solution sampled on the grid."""
    t = mesh.grid
    x1 = np.where(t <= 1.0, 1.0 - t**2 / 2.0, (2.0 - t) ** 2 / 2.0)
    x2 = np.where(t <= 1.0, -t, t - 2.0)
    v = np.where(t < 1.0, 0.0, 1.0)
    K = t.size
    return nlp.layout.pack(
        np.stack([x1, x2], axis=1), np.zeros((K, 0)), np.zeros((K, 0)), v
    )


def test_double_integrator_analytic_defects():
    # trapezoidal quadrature cannot be exact across the control kink at
    # t = 1: the defect there is O(h), everywhere else it vanishes
    p = double_integrator()
    mesh = Mesh.uniform(200, 0.0, 2.0)
    nlp = transcribe(embed(p, 0.0), mesh)
    c = np.abs(nlp.constraints(_di_analytic_vector(nlp, mesh)).reshape(200, 2))
    h = 0.01
    assert np.max(c) <= 2.0 * h
    away = np.delete(c, [99, 100], axis=0)
    assert np.max(away) < 1e-9


@pytest.mark.parametrize("scheme", ["trapezoidal", "hermite-simpson"])
def test_defect_rows_couple_adjacent_nodes_only(scheme):
    p = double_integrator()
    mesh = Mesh.uniform(6, 0.0, 2.0, scheme)
    nlp = transcribe(embed(p, 0.3), mesh)
    rng = np.random.default_rng(3)
    z = _sample_point(nlp, rng)
    J = np.asarray(nlp.jacobian(z).todense())
    lay = nlp.layout
    for k in range(mesh.num_intervals):
        rows = J[2 * k : 2 * k + 2]
        cols = np.where(np.any(rows != 0.0, axis=0))[0]
        allowed = set()
        for node in (k, k + 1):
            for comp in range(2):
                allowed.add(lay.index("x", node, comp))
            allowed.add(lay.index("v", node))
        assert set(cols) <= allowed


def test_linear_dynamics_constant_jacobian():
    A = np.array([[0.0, 1.0], [-1.0, 0.0]])

    def f(t, x, u):
        return x @ A.T

    def l(t, x, u):
        return np.zeros(x.shape[0])

    p = SwitchedProblem(
        state_dim=2,
        control_dim=0,
        f0=f,
        f1=f,
        l0=l,
        l1=l,
        boundary=BoundarySpec(0.0, 1.0, [1.0, 0.0], [-np.inf] * 2, [np.inf] * 2),
        control_set=ControlSet.empty(),
    )
    nlp = transcribe(embed(p, 0.0), Mesh.uniform(5, 0.0, 1.0))
    rng = np.random.default_rng(1)
    J1 = np.asarray(nlp.jacobian(_sample_point(nlp, rng)).todense())
    J2 = np.asarray(nlp.jacobian(_sample_point(nlp, rng)).todense())
    np.testing.assert_allclose(J1, J2, atol=1e-9)


# --- derivatives vs finite-difference oracles ---------------------------


@pytest.mark.parametrize("scheme", ["trapezoidal", "hermite-simpson"])
@pytest.mark.parametrize("factory", [two_tank, double_integrator])
def test_gradient_matches_fd_oracle(scheme, factory):
    p = factory()
    mesh = Mesh.uniform(8, p.boundary.t0, p.boundary.tf, scheme)
    nlp = transcribe(embed(p, 0.2), mesh)
    rng = np.random.default_rng(0)
    for _ in range(10):
        z = _sample_point(nlp, rng)
        g = nlp.gradient(z)
        fd = _fd_gradient(nlp.objective, z)
        scale = np.maximum(1.0, np.maximum(np.abs(g), np.abs(fd)))
        assert np.max(np.abs(g - fd) / scale) < 1e-5


@pytest.mark.parametrize("scheme", ["trapezoidal", "hermite-simpson"])
@pytest.mark.parametrize("factory", [two_tank, double_integrator])
def test_jacobian_matches_fd_oracle(scheme, factory):
    p = factory()
    mesh = Mesh.uniform(6, p.boundary.t0, p.boundary.tf, scheme)
    nlp = transcribe(embed(p, 0.2), mesh)
    rng = np.random.default_rng(0)
    for _ in range(10):
        z = _sample_point(nlp, rng)
        J = np.asarray(nlp.jacobian(z).todense())
        fd = _fd_jacobian(nlp.constraints, z, nlp.n_constraints)
        scale = np.maximum(1.0, np.maximum(np.abs(J), np.abs(fd)))
        assert np.max(np.abs(J - fd) / scale) < 1e-5


# --- objective properties ----------------------------------------------


def test_nodal_beta_invariance_trapezoidal():
    # any binary nodal mode signal: the aux cost vanishes at every node,
    # so the trapezoidal objective cannot depend on beta
    p = double_integrator()
    mesh = Mesh.uniform(20, 0.0, 2.0)
    nlp0 = transcribe(embed(p, 0.0), mesh)
    nlp5 = transcribe(embed(p, 5.0), mesh)
    rng = np.random.default_rng(7)
    lay = nlp0.layout
    for _ in range(5):
        z = _sample_point(nlp0, rng)
        z[lay.v_offset :] = rng.integers(0, 2, lay.num_nodes).astype(float)
        assert nlp0.objective(z) == nlp5.objective(z)


def test_nodal_beta_invariance_hermite_simpson_constant_mode():
    # hermite-simpson averages vbar at interval midpoints, so binary
    # invariance only holds when adjacent nodes agree (constant signal);
    # a 0-1 flip puts the midpoint at 0.5 and incurs the beta artifact
    p = double_integrator()
    mesh = Mesh.uniform(10, 0.0, 2.0, "hermite-simpson")
    nlp0 = transcribe(embed(p, 0.0), mesh)
    nlp5 = transcribe(embed(p, 5.0), mesh)
    rng = np.random.default_rng(7)
    lay = nlp0.layout
    z = _sample_point(nlp0, rng)
    for const in (0.0, 1.0):
        z[lay.v_offset :] = const
        assert nlp0.objective(z) == nlp5.objective(z)
    z[lay.v_offset :] = rng.integers(0, 2, lay.num_nodes).astype(float)
    z[lay.v_offset] = 0.0
    z[lay.v_offset + 1] = 1.0
    assert nlp5.objective(z) > nlp0.objective(z)


def test_quadrature_consistency_halving():
    # transcribed objective vs reference rollout cost: doubling N must
    # shrink the gap by >= 2 (trapezoidal is second order)
    p = two_tank(x0=(3.0, 3.0))
    ep = embed(p, 0.4)
    v = 0.3
    ctl = Trajectory(
        times=np.array([0.0, 20.0]),
        states=np.tile([3.0, 3.0], (2, 1)),
        controls_u0=np.zeros((2, 0)),
        controls_u1=np.zeros((2, 0)),
        mode_signal=np.full(2, v),
    )
    ref = rollout_embedded(ep, ctl, steps_per_unit_time=400)

    def objective_at(N):
        mesh = Mesh.uniform(N, 0.0, 20.0)
        nlp = transcribe(ep, mesh)
        X = np.stack(
            [np.interp(mesh.grid, ref.times, ref.states[:, j]) for j in range(2)], axis=1
        )
        K = mesh.num_intervals + 1
        z = nlp.layout.pack(X, np.zeros((K, 0)), np.zeros((K, 0)), np.full(K, v))
        return nlp.objective(z)

    gap = [abs(objective_at(N) - ref.total_cost) for N in (25, 50)]
    assert gap[0] / gap[1] >= 2.0


def test_bounds_encode_boundary_and_mode_box():
    p = two_tank()
    mesh = Mesh.uniform(10, 0.0, 20.0)
    nlp = transcribe(embed(p, 0.0), mesh)
    lay = nlp.layout
    # initial state pinned
    for comp, val in enumerate([2.0, 2.0]):
        i = lay.index("x", 0, comp)
        assert nlp.lower[i] == nlp.upper[i] == val
    # final box intersected with the state floor
    i = lay.index("x", 10, 0)
    assert (nlp.lower[i], nlp.upper[i]) == (0.0, 4.0)
    i = lay.index("x", 10, 1)
    assert (nlp.lower[i], nlp.upper[i]) == (3.0, 3.0)
    # interior states respect the floor only
    i = lay.index("x", 5, 0)
    assert nlp.lower[i] == 0.0 and nlp.upper[i] == np.inf
    # mode signal in [0, 1]
    assert np.all(nlp.lower[lay.v_offset :] == 0.0)
    assert np.all(nlp.upper[lay.v_offset :] == 1.0)


def test_trajectory_from_vector_round_trip():
    p = double_integrator()
    mesh = Mesh.uniform(5, 0.0, 2.0)
    nlp = transcribe(embed(p, 0.0), mesh)
    rng = np.random.default_rng(2)
    z = _sample_point(nlp, rng)
    traj = trajectory_from_vector(nlp, z)
    X, U0, U1, V = nlp.layout.unpack(z)
    np.testing.assert_array_equal(traj.times, mesh.grid)
    np.testing.assert_array_equal(traj.states, X)
    np.testing.assert_array_equal(traj.mode_signal, V)
