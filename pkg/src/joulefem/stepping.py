"""Time integration of the coupled temperature/potential/displacement system.

Two schemes on a fixed grid t_n = n*k:

* semi-implicit: each step performs three sequential linear solves.  The
  temperature solve treats conduction implicitly but lags the resistive
  heating sigma(Theta)|grad Phi|^2 and the strain-rate heat sink at step
  n-1, the potential solve uses the fresh temperature, and the displacement
  solve uses the fresh temperature.  The equations decouple, so each step
  costs three SPD solves.

* implicit Euler: all three fields are taken at step n and the coupled
  system is solved by Picard (fixed-point) iteration, lagging the nonlinear
  coefficients to the previous iterate.

Backward differences throughout: D u^n = (u^n - u^{n-1})/k, and the second
difference uses u^{n-2}.  The pre-initial displacement u^{-1} = u0 - k*v0
encodes the initial velocity.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .assembly import (
    coupling_matrix,
    elasticity_matrix,
    element_conductivity,
    interpolate_nodal,
    joule_load,
    load_vector,
    mass_matrix,
    stiffness_matrix,
    vector_mass_matrix,
)
from .mesh import Mesh, build_crisscross_mesh
from .problems import ProblemSpec
from .sparse_linalg import LinearSystem, SolverError, SPDSolver, apply_dirichlet


class PicardDivergenceError(SolverError):
    """Picard iteration hit the iteration cap without meeting its tolerance."""

    def __init__(self, message, increment):
        super().__init__(message)
        self.increment = increment


@dataclass
class StepperConfig:
    scheme: str = "semi"               # "semi" | "ie"
    picard_tol: float = 1e-8           # relative L2 increment
    picard_max_iter: int = 50
    solver_rel_tol: float = 1e-10

    def __post_init__(self):
        if self.scheme not in ("semi", "ie"):
            raise ValueError(f"scheme must be 'semi' or 'ie', got {self.scheme!r}")
        if self.picard_max_iter < 1:
            raise ValueError("picard_max_iter must be >= 1")


@dataclass
class State:
    """Nodal fields after step n; u_prev holds U^{n-1} so both backward
    differences are derivable.  At n = 0, u_prev = u0 - k*v0."""

    n: int
    t: float
    theta: np.ndarray
    phi: np.ndarray
    u: np.ndarray
    u_prev: np.ndarray
    picard_iterations: int | None = None


@dataclass
class Operators:
    """Matrices assembled once per (mesh, material, time grid), reused every step."""

    mesh: Mesh
    nt: int
    t_final: float
    k: float
    mass_s: sp.csr_matrix              # scalar mass
    mass_v: sp.csr_matrix              # vector mass, interleaved dofs
    stiff_thermal: sp.csr_matrix       # thermal-conductivity-weighted stiffness
    visc: sp.csr_matrix                # viscosity form K_A
    elast: sp.csr_matrix               # elasticity form K_B
    coupling: sp.csr_matrix            # C: scalar rows, vector columns
    theta_solver: SPDSolver            # rho*c*M/k + K_th with Dirichlet rows
    u_solver: SPDSolver                # rho*M_v/k^2 + K_A/k + K_B with Dirichlet rows
    free_scalar: np.ndarray            # 1.0 on interior dofs, 0.0 on boundary
    free_vector: np.ndarray
    solver_rel_tol: float = 1e-10
    _phi_cache: tuple | None = None    # (weights, matrix, solver) of the last potential solve

    def time_at(self, n: int) -> float:
        # (n * T) / nt rather than n*k: lands on exactly T at the final step
        return (n * self.t_final) / self.nt


def assemble_operators(
    mesh: Mesh, spec: ProblemSpec, nt: int, solver_rel_tol: float = 1e-10
) -> Operators:
    mat = spec.material
    k = spec.t_final / nt
    mass_s = mass_matrix(mesh)
    mass_v = vector_mass_matrix(mesh)
    stiff_th = stiffness_matrix(mesh, np.full(mesh.num_triangles, mat.k))
    visc = elasticity_matrix(mesh, mat.A)
    elast = elasticity_matrix(mesh, mat.B)
    coup = coupling_matrix(mesh, mat.M)

    nv = mesh.num_vertices
    bidx = mesh.boundary_indices
    free_s = np.ones(nv)
    free_s[bidx] = 0.0
    free_v = np.ones(2 * nv)
    free_v[2 * bidx] = 0.0
    free_v[2 * bidx + 1] = 0.0

    zero_s = {int(i): 0.0 for i in bidx}
    zero_v = {int(d): 0.0 for i in bidx for d in (2 * i, 2 * i + 1)}
    theta_mat = (mat.rho * mat.c / k) * mass_s + stiff_th
    theta_sys = apply_dirichlet(LinearSystem(theta_mat.tocsr(), np.zeros(nv)), zero_s)
    u_mat = (mat.rho / k**2) * mass_v + (1.0 / k) * visc + elast
    u_sys = apply_dirichlet(LinearSystem(u_mat.tocsr(), np.zeros(2 * nv)), zero_v)

    return Operators(
        mesh=mesh,
        nt=nt,
        t_final=spec.t_final,
        k=k,
        mass_s=mass_s,
        mass_v=mass_v,
        stiff_thermal=stiff_th,
        visc=visc,
        elast=elast,
        coupling=coup,
        theta_solver=SPDSolver(theta_sys.matrix),
        u_solver=SPDSolver(u_sys.matrix),
        free_scalar=free_s,
        free_vector=free_v,
        solver_rel_tol=solver_rel_tol,
    )


def solve_potential(ops: Operators, spec: ProblemSpec, theta: np.ndarray, t: float) -> np.ndarray:
    """Solve div(sigma(theta) grad phi) = 0 with phi = phi_b(t) on the boundary.

    The conductivity-weighted stiffness and its factorization are rebuilt
    whenever the element weights change and reused otherwise (constant
    conductivity laws then factorize exactly once per run).
    """
    mesh = ops.mesh
    weights = element_conductivity(mesh, theta, spec.material.sigma)
    if ops._phi_cache is not None and np.array_equal(ops._phi_cache[0], weights):
        K, solver = ops._phi_cache[1], ops._phi_cache[2]
    else:
        K = stiffness_matrix(mesh, weights)
        zero_bc = {int(i): 0.0 for i in mesh.boundary_indices}
        sys0 = apply_dirichlet(LinearSystem(K, np.zeros(mesh.num_vertices)), zero_bc)
        solver = SPDSolver(sys0.matrix)
        ops._phi_cache = (weights, K, solver)
    # lifting of the boundary data: rhs = -K g on free rows, g on constrained
    bidx = mesh.boundary_indices
    bx, by = mesh.vertices[bidx, 0], mesh.vertices[bidx, 1]
    g = np.zeros(mesh.num_vertices)
    g[bidx] = np.broadcast_to(np.asarray(spec.phi_b(t, bx, by), dtype=float), bidx.shape)
    rhs = ops.free_scalar * (-(K @ g)) + g
    return solver.solve(rhs, ops.solver_rel_tol)


def _theta_rhs(
    ops: Operators,
    spec: ProblemSpec,
    theta_mass: np.ndarray,
    theta_joule: np.ndarray,
    phi_joule: np.ndarray,
    dtu: np.ndarray,
    t: float,
) -> np.ndarray:
    """Right side of the temperature solve.

    theta_mass feeds the time-derivative term; theta_joule/phi_joule feed the
    resistive heating; dtu feeds the strain-rate heat sink.  The split is
    what distinguishes the schemes (old step versus current Picard iterate).
    """
    mat = spec.material
    rhs = (mat.rho * mat.c / ops.k) * (ops.mass_s @ theta_mass)
    rhs = rhs + joule_load(ops.mesh, theta_joule, phi_joule, mat.sigma)
    rhs = rhs - mat.theta_ref * (ops.coupling @ dtu)
    if spec.heat_source is not None:
        rhs = rhs + load_vector(ops.mesh, lambda x, y: spec.heat_source(t, x, y))
    return rhs


def _u_rhs(ops: Operators, spec: ProblemSpec, u1: np.ndarray, u2: np.ndarray,
           theta_new: np.ndarray, t: float) -> np.ndarray:
    """Right side of the displacement solve; u1 = U^{n-1}, u2 = U^{n-2}."""
    mat = spec.material
    rhs = (mat.rho / ops.k**2) * (ops.mass_v @ (2.0 * u1 - u2))
    rhs = rhs + (1.0 / ops.k) * (ops.visc @ u1)
    rhs = rhs + ops.coupling.T @ theta_new
    if spec.f is not None:
        rhs = rhs + load_vector(ops.mesh, lambda x, y: spec.f(t, x, y))
    return rhs


def semi_implicit_step(state: State, spec: ProblemSpec, ops: Operators, k: float) -> State:
    """Advance one step with the decoupled scheme (three sequential solves)."""
    n = state.n + 1
    t = ops.time_at(n)
    dtu_prev = (state.u - state.u_prev) / k

    rhs = _theta_rhs(ops, spec, state.theta, state.theta, state.phi, dtu_prev, t)
    theta = ops.theta_solver.solve(ops.free_scalar * rhs, ops.solver_rel_tol)

    phi = solve_potential(ops, spec, theta, t)

    rhs_u = _u_rhs(ops, spec, state.u, state.u_prev, theta, t)
    u = ops.u_solver.solve(ops.free_vector * rhs_u, ops.solver_rel_tol)

    return State(n=n, t=t, theta=theta, phi=phi, u=u, u_prev=state.u)


def _rel_increment(mass, new: np.ndarray, old: np.ndarray) -> float:
    d = new - old
    num = float(np.sqrt(max(d @ (mass @ d), 0.0)))
    den = float(np.sqrt(max(new @ (mass @ new), 0.0)))
    return num / den if den > 1e-14 else num


def implicit_euler_step(
    state: State, spec: ProblemSpec, ops: Operators, k: float, config: StepperConfig
) -> State:
    """Advance one step of the fully coupled scheme via Picard iteration.

    Each sweep solves temperature with coefficients from the current
    iterate, then potential with the fresh temperature, then displacement
    with the fresh temperature, and stops when the largest relative L2
    increment of the three fields drops below picard_tol.

    The lagged resistive heating makes the plain fixed-point map expansive
    when k * sigma' * |grad phi|^2 exceeds one (coarse time grids), so the
    update is relaxed adaptively: full steps while the increment shrinks,
    halved relaxation whenever it stops shrinking.  Converged sweeps always
    accept the unrelaxed map output, so linear problems still finish in one
    or two sweeps.
    """
    n = state.n + 1
    t = ops.time_at(n)
    theta_it, phi_it, u_it = state.theta, state.phi, state.u
    omega = 1.0
    prev_increment = None

    for sweep in range(1, config.picard_max_iter + 1):
        dtu_it = (u_it - state.u) / k
        rhs = _theta_rhs(ops, spec, state.theta, theta_it, phi_it, dtu_it, t)
        theta_new = ops.theta_solver.solve(ops.free_scalar * rhs, ops.solver_rel_tol)

        phi_new = solve_potential(ops, spec, theta_new, t)

        rhs_u = _u_rhs(ops, spec, state.u, state.u_prev, theta_new, t)
        u_new = ops.u_solver.solve(ops.free_vector * rhs_u, ops.solver_rel_tol)

        increment = max(
            _rel_increment(ops.mass_s, theta_new, theta_it),
            _rel_increment(ops.mass_s, phi_new, phi_it),
            _rel_increment(ops.mass_v, u_new, u_it),
        )
        if increment <= config.picard_tol:
            return State(
                n=n, t=t, theta=theta_new, phi=phi_new, u=u_new, u_prev=state.u,
                picard_iterations=sweep,
            )
        if prev_increment is not None and increment >= prev_increment:
            omega = max(0.5 * omega, 1.0 / 64.0)
        prev_increment = increment
        theta_it = theta_it + omega * (theta_new - theta_it)
        phi_it = phi_it + omega * (phi_new - phi_it)
        u_it = u_it + omega * (u_new - u_it)

    raise PicardDivergenceError(
        f"Picard iteration did not reach tolerance {config.picard_tol:g} in "
        f"{config.picard_max_iter} sweeps at step {n} (last increment {increment:.3e})",
        increment=increment,
    )


@dataclass
class Snapshot:
    n: int
    t: float
    theta: np.ndarray
    phi: np.ndarray
    u: np.ndarray
    v: np.ndarray                      # backward-difference velocity


@dataclass
class Trajectory:
    """Time-indexed snapshots of one simulation run."""

    problem: str
    scheme: str
    nx: int
    nt: int
    k: float
    t_final: float
    stride: int
    mesh: Mesh
    snapshots: list[Snapshot] = field(default_factory=list)
    picard_total: int = 0

    def snapshot_at_step(self, n: int) -> Snapshot:
        if n % self.stride:
            raise KeyError(f"step {n} not stored (stride {self.stride})")
        return self.snapshots[n // self.stride]


def _auto_stride(nt: int, snapshot_budget: int = 4096) -> int:
    stride = 1
    while nt // stride > snapshot_budget or nt % stride:
        stride += 1
    return stride


def run_simulation(
    spec: ProblemSpec,
    nx: int,
    nt: int,
    config: StepperConfig | None = None,
    stride: int | None = None,
) -> Trajectory:
    """Run nt steps of the requested scheme on the nx crisscross mesh.

    Assembles the constant operators once, solves the initial potential from
    sigma(theta0) with phi_b(0), then advances.  Snapshots are stored every
    `stride` steps (stride must divide nt); by default every step is stored
    up to 4096 snapshots.
    """
    if config is None:
        config = StepperConfig()
    if nt < 1:
        raise ValueError(f"step count must be >= 1, got {nt}")
    if stride is None:
        stride = _auto_stride(nt)
    if stride < 1 or nt % stride:
        raise ValueError(f"stride {stride} must be positive and divide nt={nt}")

    mesh = build_crisscross_mesh(nx)
    ops = assemble_operators(mesh, spec, nt, config.solver_rel_tol)
    k = ops.k

    theta0 = interpolate_nodal(mesh, spec.theta0)
    u0 = interpolate_nodal(mesh, spec.u0)
    v0 = interpolate_nodal(mesh, spec.v0)
    phi0 = solve_potential(ops, spec, theta0, 0.0)
    state = State(n=0, t=0.0, theta=theta0, phi=phi0, u=u0, u_prev=u0 - k * v0)

    traj = Trajectory(
        problem=spec.name, scheme=config.scheme, nx=nx, nt=nt, k=k,
        t_final=spec.t_final, stride=stride, mesh=mesh,
    )

    def record(s: State):
        traj.snapshots.append(Snapshot(
            n=s.n, t=s.t, theta=s.theta.copy(), phi=s.phi.copy(),
            u=s.u.copy(), v=(s.u - s.u_prev) / k,
        ))

    record(state)
    for n in range(1, nt + 1):
        try:
            if config.scheme == "semi":
                state = semi_implicit_step(state, spec, ops, k)
            else:
                state = implicit_euler_step(state, spec, ops, k, config)
                traj.picard_total += state.picard_iterations
        except SolverError as err:
            raise SolverError(f"step {n} of {nt} failed: {err}", getattr(err, "residual", None)) from err
        if state.n % stride == 0:
            record(state)
    return traj


_HEADER = struct.Struct("<qqqd")


def dump_trajectory(traj: Trajectory, directory) -> None:
    """Write one little-endian binary file per snapshot plus an index file.

    Layout per file: int64 nx, nt, n, float64 t, then the nodal arrays
    theta, phi, u, v as float64 in that order.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = []
    for snap in traj.snapshots:
        name = f"snap_{snap.n:08d}.bin"
        with open(directory / name, "wb") as fh:
            fh.write(_HEADER.pack(traj.nx, traj.nt, snap.n, snap.t))
            for arr in (snap.theta, snap.phi, snap.u, snap.v):
                fh.write(np.asarray(arr, dtype="<f8").tobytes())
        lines.append(f"{name} {snap.n} {snap.t!r}")
    index = "\n".join(
        [f"{traj.problem} {traj.scheme} nx={traj.nx} nt={traj.nt} stride={traj.stride}"]
        + lines
    )
    (directory / "index.txt").write_text(index + "\n")


def load_snapshot(path) -> Snapshot:
    raw = Path(path).read_bytes()
    nx, nt, n, t = _HEADER.unpack_from(raw)
    nv = (nx + 1) ** 2 + nx * nx
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    expected = nv + nv + 2 * nv + 2 * nv
    if body.size != expected:
        raise ValueError(f"snapshot payload has {body.size} floats, expected {expected}")
    theta, phi = body[:nv], body[nv:2 * nv]
    u = body[2 * nv:4 * nv]
    v = body[4 * nv:]
    return Snapshot(n=n, t=t, theta=theta, phi=phi, u=u, v=v)
