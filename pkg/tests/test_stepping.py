import dataclasses

import numpy as np
import pytest

import joulefem as jf
from joulefem.assembly import interpolate_nodal, joule_load
from joulefem.metrics import l2_norm, max_error_over_time
from joulefem.stepping import (
    PicardDivergenceError,
    assemble_operators,
    dump_trajectory,
    load_snapshot,
    run_simulation,
)


def zero_scalar(x, y):
    return np.zeros_like(np.asarray(x, dtype=float))


def zero_bc_spec():
    spec = jf.make_problem1()
    return dataclasses.replace(spec, phi_b=lambda t, x, y: zero_scalar(x, y))


@pytest.mark.parametrize("scheme", ["semi", "ie"])
def test_zero_data_fixed_point(scheme):
    traj = run_simulation(zero_bc_spec(), 4, 4, jf.StepperConfig(scheme=scheme))
    for s in traj.snapshots:
        assert np.all(s.theta == 0.0)
        assert np.all(s.phi == 0.0)
        assert np.all(s.u == 0.0)
        assert np.all(s.v == 0.0)


def test_initial_potential_is_linear_interpolant():
    traj = run_simulation(jf.make_problem1(), 8, 2, jf.StepperConfig(scheme="semi"))
    m = traj.mesh
    interp = interpolate_nodal(m, lambda x, y: 5.0 * (1.0 - x))
    assert np.max(np.abs(traj.snapshots[0].phi - interp)) < 1e-9


def test_semi_step_matches_manual_linear_algebra():
    """One semi-implicit step recomputed directly from the assembled systems."""
    spec = jf.make_problem1()
    # nonzero initial velocity exercises the pre-initial displacement point
    spec = dataclasses.replace(
        spec,
        v0=lambda x, y: (np.sin(np.pi * x) * np.sin(np.pi * y), zero_scalar(x, y)),
    )
    nx, nt = 4, 8
    traj = run_simulation(spec, nx, nt, jf.StepperConfig(scheme="semi"))
    m = traj.mesh
    ops = assemble_operators(m, spec, nt)
    k = ops.k

    s0, s1 = traj.snapshots[0], traj.snapshots[1]
    v0 = interpolate_nodal(m, spec.v0)
    np.testing.assert_allclose(s0.v, v0, atol=1e-15)

    # temperature solve: (M/k + K) theta1 = M theta0/k + joule(theta0, phi0) - C v0
    rhs = ops.mass_s @ s0.theta / k
    rhs = rhs + joule_load(m, s0.theta, s0.phi, spec.material.sigma)
    rhs = rhs - ops.coupling @ v0
    rhs = ops.free_scalar * rhs
    theta1 = ops.theta_solver.solve(rhs)
    np.testing.assert_allclose(s1.theta, theta1, atol=1e-12)

    # displacement solve: (M/k^2 + K_A/k + K_B) u1 = M(2u0 - u_prev)/k^2 + K_A u0/k + C' theta1
    u0 = np.zeros(2 * m.num_vertices)
    u_prev = u0 - k * v0
    rhs_u = ops.mass_v @ (2.0 * u0 - u_prev) / k**2 + ops.visc @ u0 / k
    rhs_u = rhs_u + ops.coupling.T @ theta1
    u1 = ops.u_solver.solve(ops.free_vector * rhs_u)
    np.testing.assert_allclose(s1.u, u1, atol=1e-12)
    np.testing.assert_allclose(s1.v, (u1 - u0) / k, atol=1e-12)


def test_temperature_solve_lags_potential_one_step():
    # switch the boundary potential on only after the first step: step 1 must
    # still see the zero initial potential, so the temperature stays zero
    spec = jf.make_problem1()
    nt = 4
    k = spec.t_final / nt
    lagged = dataclasses.replace(
        spec,
        phi_b=lambda t, x, y: np.where(t >= k, 5.0 * (1.0 - np.asarray(x, float)), 0.0),
    )
    traj = run_simulation(lagged, 4, nt, jf.StepperConfig(scheme="semi"))
    assert np.all(traj.snapshots[1].theta == 0.0)       # used phi^0 = 0
    assert np.max(np.abs(traj.snapshots[1].phi)) > 1.0  # phi^1 sees the new data
    assert np.max(traj.snapshots[2].theta) > 0.0        # joule kicks in at step 2


def test_picard_zero_data_single_sweep():
    traj = run_simulation(zero_bc_spec(), 4, 3, jf.StepperConfig(scheme="ie"))
    assert traj.picard_total == 3  # one sweep per step


def test_picard_linear_decoupled_two_sweeps():
    # constant conductivity, zero potential, no thermal coupling: nothing is
    # nonlinear, so sweep two only confirms the fixed point
    spec = zero_bc_spec()
    material = dataclasses.replace(spec.material, M=np.zeros((2, 2)), sigma=jf.sigma_constant(1.0))
    spec = dataclasses.replace(
        spec,
        material=material,
        v0=lambda x, y: (np.sin(np.pi * x) * np.sin(np.pi * y), zero_scalar(x, y)),
    )
    traj = run_simulation(spec, 4, 3, jf.StepperConfig(scheme="ie"))
    assert traj.picard_total == 6


def test_picard_converges_on_problem1_nx16():
    config = jf.StepperConfig(scheme="ie", picard_tol=1e-8, picard_max_iter=50)
    traj = run_simulation(jf.make_problem1(), 16, 128, config)
    assert traj.picard_total <= 50 * 128


def test_picard_cap_raises():
    config = jf.StepperConfig(scheme="ie", picard_tol=1e-15, picard_max_iter=1)
    with pytest.raises(jf.SolverError):
        run_simulation(jf.make_problem1(), 4, 2, config)
    try:
        run_simulation(jf.make_problem1(), 4, 2, config)
    except jf.SolverError as err:
        assert isinstance(err.__cause__, PicardDivergenceError)
        assert err.__cause__.increment > 0.0


def test_zero_viscosity_runs():
    spec = jf.make_problem2(0.0)
    traj = run_simulation(spec, 4, 4, jf.StepperConfig(scheme="semi"))
    assert len(traj.snapshots) == 5
    assert np.isfinite(traj.snapshots[-1].u).all()


def test_run_simulation_snapshot_counts():
    traj = run_simulation(zero_bc_spec(), 4, 1, jf.StepperConfig())
    assert len(traj.snapshots) == 2

    spec = jf.make_problem1()
    traj = run_simulation(spec, 4, 8, jf.StepperConfig(scheme="semi"))
    assert len(traj.snapshots) == 9
    assert traj.snapshots[-1].t == 1.0

    strided = run_simulation(spec, 4, 8, jf.StepperConfig(scheme="semi"), stride=4)
    assert [s.t for s in strided.snapshots] == [0.0, 0.5, 1.0]


def test_final_time_exact_for_awkward_step_counts():
    traj = run_simulation(zero_bc_spec(), 2, 10, jf.StepperConfig())
    assert traj.snapshots[-1].t == 1.0


def test_invalid_stride_and_nt():
    spec = jf.make_problem1()
    with pytest.raises(ValueError):
        run_simulation(spec, 4, 0, jf.StepperConfig())
    with pytest.raises(ValueError):
        run_simulation(spec, 4, 8, jf.StepperConfig(), stride=3)


def test_steady_state_residuals():
    # time-independent data settle into a stationary solution; once the
    # increments vanish the stationary equations must hold on interior dofs
    spec = jf.make_problem1()
    long = dataclasses.replace(spec, t_final=50.0)
    nx, nt = 4, 400
    traj = run_simulation(long, nx, nt, jf.StepperConfig(scheme="semi"))
    m = traj.mesh
    last, prev = traj.snapshots[-1], traj.snapshots[-11]
    assert l2_norm(m, last.theta - prev.theta) < 1e-12
    ops = assemble_operators(m, long, nt)

    free_s, free_v = ops.free_scalar, ops.free_vector
    res_theta = free_s * (
        ops.stiff_thermal @ last.theta
        - joule_load(m, last.theta, last.phi, spec.material.sigma)
    )
    assert np.max(np.abs(res_theta)) < 1e-9

    from joulefem.assembly import element_conductivity, stiffness_matrix
    K_sigma = stiffness_matrix(m, element_conductivity(m, last.theta, spec.material.sigma))
    assert np.max(np.abs(free_s * (K_sigma @ last.phi))) < 1e-9

    res_u = free_v * (ops.elast @ last.u - ops.coupling.T @ last.theta)
    assert np.max(np.abs(res_u)) < 1e-9


def test_schemes_stay_close_on_problem1(p1_semi_runs, p1_ie_runs, p1_reference_ie):
    # the two schemes differ by no more than an error-sized amount
    semi, ie = p1_semi_runs[8], p1_ie_runs[8]
    err_semi = max_error_over_time(semi, p1_reference_ie)
    m = ie.mesh
    gap = max(
        l2_norm(m, a.theta - b.theta)
        for a, b in zip(semi.snapshots[1:], ie.snapshots[1:])
    )
    assert gap <= 10.0 * err_semi.theta_l2


def test_trajectory_dump_roundtrip(tmp_path):
    spec = jf.make_problem1()
    traj = run_simulation(spec, 2, 4, jf.StepperConfig(scheme="semi"), stride=2)
    dump_trajectory(traj, tmp_path)
    index = (tmp_path / "index.txt").read_text().splitlines()
    assert index[0].startswith("problem1 semi nx=2 nt=4")
    assert len(index) == 1 + len(traj.snapshots)
    for snap in traj.snapshots:
        loaded = load_snapshot(tmp_path / f"snap_{snap.n:08d}.bin")
        assert loaded.n == snap.n and loaded.t == snap.t
        np.testing.assert_array_equal(loaded.theta, snap.theta)
        np.testing.assert_array_equal(loaded.phi, snap.phi)
        np.testing.assert_array_equal(loaded.u, snap.u)
        np.testing.assert_array_equal(loaded.v, snap.v)
