import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from switchopt import (
    Mesh,
    ModeSequence,
    SolveOptions,
    beta_sweep,
    check_dwell,
    classify,
    default_initializer,
    double_integrator,
    embed,
    estimate_costates,
    extract_modes,
    hamiltonian_profile,
    project_and_rollout,
    solve,
    trajectory_from_vector,
    transcribe,
    two_tank,
)
from switchopt.analysis import aux_cost_quadrature
from switchopt.ocp import (
    BoundarySpec,
    ControlSet,
    CostateTrajectory,
    SwitchedProblem,
    Trajectory,
)


def _traj(times, v):
    times = np.asarray(times, float)
    K = times.size
    return Trajectory(
        times=times,
        states=np.zeros((K, 1)),
        controls_u0=np.zeros((K, 0)),
        controls_u1=np.zeros((K, 0)),
        mode_signal=np.asarray(v, float),
    )


# --- ModeSequence -------------------------------------------------------


def test_mode_sequence_basics():
    seq = ModeSequence(0, (1.0, 3.0, 3.5), 0.0, 10.0)
    assert seq.num_switches == 3
    assert seq.min_dwell == pytest.approx(0.5)
    np.testing.assert_array_equal(seq.mode_at([0.5, 1.5, 3.2, 4.0]), [0, 1, 0, 1])
    with pytest.raises(ValueError):
        ModeSequence(0, (2.0, 1.0), 0.0, 10.0)


def test_mode_sequence_min_dwell_excludes_endpoints():
    # fewer than two switches: no constrained pair, dwell is the horizon
    assert ModeSequence(1, (9.99,), 0.0, 10.0).min_dwell == pytest.approx(10.0)
    assert ModeSequence(1, (), 0.0, 10.0).min_dwell == pytest.approx(10.0)


# --- classify -----------------------------------------------------------


def test_classify_constant_singular_value():
    t = np.linspace(0.0, 20.0, 101)
    cls = classify(_traj(t, np.full(101, 0.732)))
    assert cls.is_singular
    assert cls.singular_measure == pytest.approx(20.0)


def test_classify_alternating_binary_is_regular():
    t = np.linspace(0.0, 20.0, 101)
    v = np.tile([0.0, 1.0], 51)[:101]
    cls = classify(_traj(t, v))
    assert not cls.is_singular
    assert cls.singular_measure == pytest.approx(0.0)


def test_classify_wide_delta():
    t = np.linspace(0.0, 1.0, 11)
    assert classify(_traj(t, np.full(11, 0.5)), delta=0.49).is_singular


def test_classify_delta_validation():
    t = np.linspace(0.0, 1.0, 3)
    with pytest.raises(ValueError):
        classify(_traj(t, np.zeros(3)), delta=0.5)


# --- extract_modes ------------------------------------------------------


def test_extract_modes_midpoint_crossing():
    seq = extract_modes(_traj([0.0, 1.0, 2.0, 3.0], [0.0, 0.0, 1.0, 1.0]))
    assert seq.initial_mode == 0
    assert seq.switch_times == (1.5,)


def test_extract_modes_constant_one():
    seq = extract_modes(_traj([0.0, 1.0, 2.0], [1.0, 1.0, 1.0]))
    assert seq.initial_mode == 1
    assert seq.num_switches == 0
    assert seq.min_dwell == pytest.approx(2.0)


def test_extract_modes_alternating_min_dwell():
    t = np.arange(9.0)  # spacing h = 1
    v = np.tile([0.0, 1.0], 5)[:9]
    seq = extract_modes(_traj(t, v))
    assert seq.min_dwell == pytest.approx(1.0)
    assert seq.num_switches == 8


def test_extract_modes_threshold_validation():
    with pytest.raises(ValueError):
        extract_modes(_traj([0.0, 1.0], [0.0, 1.0]), threshold=1.0)


@given(
    data=st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=2, max_size=12),
    t1=st.floats(min_value=0.05, max_value=0.45),
    t2=st.floats(min_value=0.5, max_value=0.95),
)
def test_threshold_monotonicity(data, t1, t2):
    traj = _traj(np.arange(float(len(data))), data)

    def time_in_mode_one(threshold):
        seq = extract_modes(traj, threshold)
        edges = (traj.times[0],) + seq.switch_times + (traj.times[-1],)
        total = 0.0
        for i in range(len(edges) - 1):
            if (seq.initial_mode + i) % 2 == 1:
                total += edges[i + 1] - edges[i]
        return total

    assert time_in_mode_one(t2) <= time_in_mode_one(t1) + 1e-9


@given(
    bits=st.lists(st.integers(min_value=0, max_value=1), min_size=2, max_size=15),
)
def test_extraction_round_trip_binary(bits):
    traj = _traj(np.arange(float(len(bits))), [float(b) for b in bits])
    seq = extract_modes(traj)
    resampled = seq.mode_at(traj.times)
    np.testing.assert_array_equal(resampled, bits)


@given(
    data=st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=2, max_size=12),
)
def test_dwell_report_consistency(data):
    seq = extract_modes(_traj(np.arange(float(len(data))), data))
    assert check_dwell(seq, seq.min_dwell).ok


# --- project_and_rollout ------------------------------------------------


def test_rollout_two_tank_constant_high_flow():
    p = two_tank()
    seq = ModeSequence(1, (), 0.0, 20.0)
    rep = project_and_rollout(p, seq)
    assert rep.ok
    assert rep.final_state[0] > 3.5  # climbing toward the x1 = 4 equilibrium
    assert rep.boundary_violation > 0.0  # x2 overshoots the {3} box


def test_rollout_double_integrator_analytic():
    p = double_integrator()
    seq = ModeSequence(0, (1.0,), 0.0, 2.0)
    rep = project_and_rollout(p, seq, steps_per_unit_time=1000)
    np.testing.assert_allclose(rep.final_state, [0.0, 0.0], atol=1e-6)
    assert rep.switched_cost == pytest.approx(23.0 / 30.0, abs=1e-4)


def test_rollout_rejects_out_of_horizon_sequence():
    p = double_integrator()
    with pytest.raises(ValueError):
        project_and_rollout(p, ModeSequence(0, (5.0,), 0.0, 5.0))


# --- costates and Hamiltonian diagnostics -------------------------------


def _free_endpoint_problem(cost_scale):
    def f(t, x, u):
        return np.stack([x[:, 1], np.zeros(x.shape[0])], axis=1)

    def l(t, x, u):
        return cost_scale * x[:, 0] ** 2

    return SwitchedProblem(
        state_dim=2,
        control_dim=0,
        f0=f,
        f1=f,
        l0=l,
        l1=l,
        boundary=BoundarySpec(0.0, 2.0, [1.0, 0.0], [-10.0, -10.0], [10.0, 10.0]),
        control_set=ControlSet.empty(),
    )


def _solve_small(problem, beta=0.0, N=20, scheme="trapezoidal", inner=400):
    ep = embed(problem, beta)
    mesh = Mesh.uniform(N, problem.boundary.t0, problem.boundary.tf, scheme)
    nlp = transcribe(ep, mesh)
    res = solve(nlp, default_initializer(ep, mesh), SolveOptions(max_inner_iters=inner))
    return nlp, mesh, ep, res


def test_costates_zero_for_zero_cost():
    nlp, mesh, ep, res = _solve_small(_free_endpoint_problem(0.0))
    lam = estimate_costates(res, mesh, ep)
    np.testing.assert_allclose(lam.costates, 0.0, atol=1e-6)


def test_costates_scale_with_objective():
    nlp1, mesh, ep1, res1 = _solve_small(_free_endpoint_problem(1.0))
    nlp2, _, ep2, res2 = _solve_small(_free_endpoint_problem(2.0))
    lam1 = estimate_costates(res1, mesh, ep1).costates
    lam2 = estimate_costates(res2, mesh, ep2).costates
    mask = np.abs(lam1) > 0.05
    assert mask.any()
    ratio = lam2[mask] / lam1[mask]
    np.testing.assert_allclose(ratio, 2.0, rtol=0.05)


def test_costates_require_matching_multipliers():
    nlp, mesh, ep, res = _solve_small(_free_endpoint_problem(1.0))
    with pytest.raises(ValueError):
        estimate_costates(res, Mesh.uniform(7, 0.0, 2.0), ep)


@pytest.fixture(scope="module")
def di_solved():
    p = double_integrator()
    ep = embed(p, 0.05)
    mesh = Mesh.uniform(50, 0.0, 2.0, "hermite-simpson")
    nlp = transcribe(ep, mesh)
    res = solve(nlp, default_initializer(ep, mesh), SolveOptions(max_inner_iters=2000))
    return ep, mesh, nlp, res


def test_costate_switching_function_crosses_near_switch(di_solved):
    # PMP: the switching function for this problem is the x2 costate,
    # which must change sign near the analytic switch time t = 1
    ep, mesh, nlp, res = di_solved
    lam = estimate_costates(res, mesh, ep)
    lam2 = lam.costates[:, 1]
    sign_change = np.where(np.diff(np.sign(lam2[5:-5])) != 0)[0] + 5
    assert sign_change.size >= 1
    t_cross = mesh.grid[sign_change]
    assert np.min(np.abs(t_cross - 1.0)) <= 0.1


def test_hamiltonian_profile_matches_solution(di_solved):
    ep, mesh, nlp, res = di_solved
    traj = trajectory_from_vector(nlp, res.z_opt)
    lam = estimate_costates(res, mesh, ep)
    reports = hamiltonian_profile(ep, traj, lam)
    frac_match = np.mean([r.matches_solved for r in reports])
    frac_boundary = np.mean([r.at_boundary for r in reports])
    assert frac_match >= 0.9
    assert frac_boundary >= 0.9


def test_hamiltonian_profile_flat_when_slope_zero():
    p = double_integrator()
    ep = embed(p, 0.0)
    K = 5
    traj = Trajectory(
        times=np.linspace(0.0, 2.0, K),
        states=np.tile([1.0, 0.0], (K, 1)),
        controls_u0=np.zeros((K, 0)),
        controls_u1=np.zeros((K, 0)),
        mode_signal=np.full(K, 0.5),
    )
    # lambda2 = 0 makes h0 = h1, so with beta = 0 the profile is flat
    lam = CostateTrajectory(times=traj.times, costates=np.tile([3.0, 0.0], (K, 1)))
    reports = hamiltonian_profile(ep, traj, lam)
    assert all(r.flat for r in reports)


def test_hamiltonian_profile_boundary_minimizers_when_concave():
    p = double_integrator()
    ep = embed(p, 0.3)
    K = 5
    traj = Trajectory(
        times=np.linspace(0.0, 2.0, K),
        states=np.tile([1.0, 0.0], (K, 1)),
        controls_u0=np.zeros((K, 0)),
        controls_u1=np.zeros((K, 0)),
        mode_signal=np.zeros(K),
    )
    lam = CostateTrajectory(times=traj.times, costates=np.tile([0.0, 2.0], (K, 1)))
    reports = hamiltonian_profile(ep, traj, lam)
    assert all(r.at_boundary for r in reports)
    assert all(r.minimizer == 0.0 for r in reports)  # slope favors mode 0


def test_hamiltonian_profile_requires_matching_grids():
    p = double_integrator()
    ep = embed(p, 0.0)
    traj = _traj([0.0, 1.0], [0.0, 0.0])
    lam = CostateTrajectory(times=np.array([0.0, 2.0]), costates=np.zeros((2, 1)))
    with pytest.raises(ValueError):
        hamiltonian_profile(ep, traj, lam)


# --- aux-cost audit and sweeps ------------------------------------------


def test_aux_cost_quadrature_matches_trapezoid_weights():
    p = double_integrator()
    beta = 0.8
    mesh = Mesh.uniform(10, 0.0, 2.0)
    nlp = transcribe(embed(p, beta), mesh)
    rng = np.random.default_rng(4)
    z = default_initializer(nlp.problem, mesh)
    z[nlp.layout.v_offset :] = rng.random(nlp.layout.num_nodes)
    v = z[nlp.layout.v_offset :]
    w = np.zeros(v.size)
    w[:-1] += 0.5 * mesh.h
    w[1:] += 0.5 * mesh.h
    expected = float(w @ (4.0 * beta * (v - v * v)))
    assert aux_cost_quadrature(nlp, z) == pytest.approx(expected, rel=1e-12)


def test_beta_sweep_orders_and_single_beta_bitwise():
    p = double_integrator()
    mesh = Mesh.uniform(20, 0.0, 2.0)
    opts = SolveOptions(max_inner_iters=400)
    records, results = beta_sweep(p, [0.0], mesh, opts)
    nlp = transcribe(embed(p, 0.0), mesh)
    plain = solve(nlp, default_initializer(nlp.problem, mesh), opts)
    np.testing.assert_array_equal(results[0][0].z_opt, plain.z_opt)
    assert records[0].objective == plain.objective_value
    assert records[0].beta == 0.0


def test_beta_sweep_rejects_negative_beta():
    p = double_integrator()
    with pytest.raises(ValueError):
        beta_sweep(p, [-0.1], Mesh.uniform(5, 0.0, 2.0))


def test_beta_sweep_records_failures_without_aborting():
    def bad(t, x, u):
        return np.full((x.shape[0], 1), np.nan)

    def zero(t, x, u):
        return np.zeros(x.shape[0])

    p = SwitchedProblem(
        state_dim=1,
        control_dim=0,
        f0=bad,
        f1=bad,
        l0=zero,
        l1=zero,
        boundary=BoundarySpec(0.0, 1.0, [0.0], [-1.0], [1.0]),
        control_set=ControlSet.empty(),
    )
    records, _ = beta_sweep(p, [0.0, 0.1], Mesh.uniform(4, 0.0, 1.0))
    assert [r.solve_status for r in records] == ["failed", "failed"]
    assert all(not np.isfinite(r.max_boundary_violation) or r.max_boundary_violation > 0 for r in records)
