"""Discrete norms, nested-mesh transfer and observed convergence orders.

Errors between runs on different grids are measured by transferring the
coarse piecewise-linear fields to the reference mesh (exact, since the
reference mesh resolves them) and evaluating the norms there, at the time
points the two grids share.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .assembly import elasticity_matrix, mass_matrix, stiffness_matrix, vector_mass_matrix
from .mesh import Mesh
from .stepping import Trajectory

# Voigt form of the Frobenius strain inner product: under engineering shear
# (gamma = 2*eps12) the shear block carries 1/2 so that the quadratic form is
# eps11^2 + eps22^2 + 2*eps12^2.
_STRAIN_VOIGT = np.diag([1.0, 1.0, 0.5])


@lru_cache(maxsize=32)
def _mass(mesh: Mesh):
    return mass_matrix(mesh)


@lru_cache(maxsize=32)
def _vector_mass(mesh: Mesh):
    return vector_mass_matrix(mesh)


@lru_cache(maxsize=32)
def _stiffness_unit(mesh: Mesh):
    return stiffness_matrix(mesh)


@lru_cache(maxsize=32)
def _strain_form(mesh: Mesh):
    return elasticity_matrix(mesh, _STRAIN_VOIGT)


def _quadratic_norm(matrix, x: np.ndarray) -> float:
    return float(np.sqrt(max(x @ (matrix @ x), 0.0)))


def l2_norm(mesh: Mesh, field: np.ndarray) -> float:
    """L2 norm of a nodal field; handles scalar and interleaved vector fields."""
    field = np.asarray(field, dtype=float)
    if field.size == mesh.num_vertices:
        return _quadratic_norm(_mass(mesh), field)
    if field.size == 2 * mesh.num_vertices:
        return _quadratic_norm(_vector_mass(mesh), field)
    raise ValueError(f"field length {field.size} does not match mesh {mesh!r}")


def h1_seminorm(mesh: Mesh, field: np.ndarray) -> float:
    """H1 seminorm (gradient L2 norm) of a scalar nodal field."""
    field = np.asarray(field, dtype=float)
    if field.size != mesh.num_vertices:
        raise ValueError(f"field length {field.size} does not match mesh {mesh!r}")
    return _quadratic_norm(_stiffness_unit(mesh), field)


def strain_norm(mesh: Mesh, vfield: np.ndarray) -> float:
    """Strain-energy norm ||eps(u)|| (Frobenius) of an interleaved vector field."""
    vfield = np.asarray(vfield, dtype=float)
    if vfield.size != 2 * mesh.num_vertices:
        raise ValueError(f"field length {vfield.size} does not match mesh {mesh!r}")
    return _quadratic_norm(_strain_form(mesh), vfield)


def _locate_all(coarse: Mesh, points: np.ndarray):
    """Vectorized point location on the crisscross structure.

    Returns (triangle indices, barycentric coordinates); ties on edges are
    resolved by the cell arithmetic, which is irrelevant for evaluating the
    continuous piecewise-linear field.
    """
    n = coarse.nx
    x, y = points[:, 0], points[:, 1]
    sx, sy = x * n, y * n
    i = np.clip(np.floor(sx).astype(np.int64), 0, n - 1)
    j = np.clip(np.floor(sy).astype(np.int64), 0, n - 1)
    u, v = sx - i, sy - j
    below_rising = v <= u          # below the SW-NE diagonal
    below_falling = v <= 1.0 - u   # below the NW-SE diagonal
    local = np.where(
        below_rising & below_falling, 0,
        np.where(below_rising, 1, np.where(below_falling, 3, 2)),
    )
    tri = 4 * (j * n + i) + local

    corners = coarse.vertices[coarse.triangles[tri]]  # (npts, 3, 2)
    x0, y0 = corners[:, 0, 0], corners[:, 0, 1]
    x1, y1 = corners[:, 1, 0], corners[:, 1, 1]
    x2, y2 = corners[:, 2, 0], corners[:, 2, 1]
    det = (y1 - y2) * (x0 - x2) + (x2 - x1) * (y0 - y2)
    l0 = ((y1 - y2) * (x - x2) + (x2 - x1) * (y - y2)) / det
    l1 = ((y2 - y0) * (x - x2) + (x0 - x2) * (y - y2)) / det
    lam = np.stack([l0, l1, 1.0 - l0 - l1], axis=1)
    return tri, lam


def transfer_to_fine(coarse_mesh: Mesh, field: np.ndarray, fine_mesh: Mesh) -> np.ndarray:
    """Evaluate a coarse P1 field at every fine vertex.

    Exact up to round-off because the fine mesh resolves the coarse one; at
    coincident vertices the values are preserved bitwise.  The fine
    subdivision count must be an integer multiple of the coarse one.
    """
    if fine_mesh.nx % coarse_mesh.nx:
        raise ValueError(
            f"fine nx={fine_mesh.nx} is not a multiple of coarse nx={coarse_mesh.nx}"
        )
    field = np.asarray(field, dtype=float)
    tri, lam = _locate_all(coarse_mesh, fine_mesh.vertices)
    nodes = coarse_mesh.triangles[tri]  # (npts, 3)
    if field.size == coarse_mesh.num_vertices:
        vals = field[nodes]
        return lam[:, 0] * vals[:, 0] + lam[:, 1] * vals[:, 1] + lam[:, 2] * vals[:, 2]
    if field.size == 2 * coarse_mesh.num_vertices:
        out = np.empty(2 * fine_mesh.num_vertices)
        for d in range(2):
            vals = field[2 * nodes + d]
            out[d::2] = (
                lam[:, 0] * vals[:, 0] + lam[:, 1] * vals[:, 1] + lam[:, 2] * vals[:, 2]
            )
        return out
    raise ValueError(f"field length {field.size} does not match mesh {coarse_mesh!r}")


@dataclass
class ErrorReport:
    """Max-in-time errors of one run against a reference run.

    The displacement is reported three ways: the displacement L2 error, the
    backward-difference velocity L2 error and the velocity strain-energy
    error.
    """

    coarse_nx: int
    ref_nx: int
    scheme: str
    ref_scheme: str
    times: list[float]
    theta_l2: float
    theta_h1: float                    # H1 seminorm
    phi_l2: float
    phi_h1: float                      # H1 seminorm
    u_l2: float
    dtu_l2: float
    dtu_strain: float

    @property
    def theta_h1_full(self) -> float:
        """Full H1 norm, sqrt(L2^2 + seminorm^2)."""
        return float(np.hypot(self.theta_l2, self.theta_h1))

    @property
    def phi_h1_full(self) -> float:
        return float(np.hypot(self.phi_l2, self.phi_h1))


def max_error_over_time(traj: Trajectory, ref: Trajectory) -> ErrorReport:
    """Compare a run against a reference on a finer (or equal) grid.

    The reference nx and nt must be integer multiples of the run's; fields
    are transferred to the reference mesh and the norms of the differences
    are maximized over the shared time points t_n with n >= 1.
    """
    if ref.mesh.nx % traj.mesh.nx:
        raise ValueError(f"reference nx={ref.mesh.nx} not divisible by run nx={traj.mesh.nx}")
    if ref.nt % traj.nt:
        raise ValueError(f"reference nt={ref.nt} not divisible by run nt={traj.nt}")
    ratio = ref.nt // traj.nt
    fine = ref.mesh

    maxima = dict(theta_l2=0.0, theta_h1=0.0, phi_l2=0.0, phi_h1=0.0,
                  u_l2=0.0, dtu_l2=0.0, dtu_strain=0.0)
    times = []
    for snap in traj.snapshots:
        if snap.n == 0:
            continue
        ref_snap = ref.snapshot_at_step(snap.n * ratio)
        times.append(snap.t)
        d_theta = transfer_to_fine(traj.mesh, snap.theta, fine) - ref_snap.theta
        d_phi = transfer_to_fine(traj.mesh, snap.phi, fine) - ref_snap.phi
        d_u = transfer_to_fine(traj.mesh, snap.u, fine) - ref_snap.u
        d_v = transfer_to_fine(traj.mesh, snap.v, fine) - ref_snap.v
        maxima["theta_l2"] = max(maxima["theta_l2"], l2_norm(fine, d_theta))
        maxima["theta_h1"] = max(maxima["theta_h1"], h1_seminorm(fine, d_theta))
        maxima["phi_l2"] = max(maxima["phi_l2"], l2_norm(fine, d_phi))
        maxima["phi_h1"] = max(maxima["phi_h1"], h1_seminorm(fine, d_phi))
        maxima["u_l2"] = max(maxima["u_l2"], l2_norm(fine, d_u))
        maxima["dtu_l2"] = max(maxima["dtu_l2"], l2_norm(fine, d_v))
        maxima["dtu_strain"] = max(maxima["dtu_strain"], strain_norm(fine, d_v))
    if not times:
        raise ValueError("no shared time points with n >= 1 between run and reference")

    return ErrorReport(
        coarse_nx=traj.mesh.nx, ref_nx=ref.mesh.nx,
        scheme=traj.scheme, ref_scheme=ref.scheme,
        times=times, **maxima,
    )


def observed_order(errors, hs) -> list[float]:
    """Pairwise slopes log(e_i/e_{i+1}) / log(h_i/h_{i+1})."""
    errors = [float(e) for e in errors]
    hs = [float(h) for h in hs]
    if len(errors) != len(hs) or len(errors) < 2:
        raise ValueError("need matching error/h lists of length >= 2")
    if any(e <= 0.0 for e in errors) or any(h <= 0.0 for h in hs):
        raise ValueError("errors and mesh widths must be positive")
    return [
        np.log(errors[i] / errors[i + 1]) / np.log(hs[i] / hs[i + 1])
        for i in range(len(errors) - 1)
    ]
