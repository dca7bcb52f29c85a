"""P1 finite element assembly on crisscross meshes.

Scalar fields carry one value per vertex; vector fields use the interleaved
layout (2*i, 2*i + 1) = (u_x, u_y) at vertex i.  Rank-4 tensors acting on
symmetric strains are given in Voigt form with engineering shear: a 3x3
symmetric matrix T acting on (du1/dx, du2/dy, du1/dy + du2/dx), so the
isotropic tensor 2*mu*eps + lambda*tr(eps)*I becomes
[[2mu+la, la, 0], [la, 2mu+la, 0], [0, 0, mu]].

All integrals use the 3-point edge-midpoint rule (exact for quadratics),
which integrates every bilinear form here exactly; only the temperature
dependence of the conductivity makes the Joule load inexact.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh
from .sparse_linalg import from_triplets


class CoercivityError(ValueError):
    """A coefficient violates the positivity required for solvability."""


# hat function values at the edge midpoints m01, m12, m20
_PHI_AT_MIDPOINTS = np.array([
    [0.5, 0.0, 0.5],
    [0.5, 0.5, 0.0],
    [0.0, 0.5, 0.5],
])  # [node, midpoint]

_EDGE_PAIRS = ((0, 1), (1, 2), (2, 0))


def _scatter(mesh: Mesh, local: np.ndarray, dof_map: np.ndarray, ndof: int) -> sp.csr_matrix:
    """Assemble per-element dense blocks local[e, i, j] into a global CSR."""
    nloc = dof_map.shape[1]
    rows = np.repeat(dof_map, nloc, axis=1).ravel()
    cols = np.tile(dof_map, (1, nloc)).ravel()
    return from_triplets(ndof, rows, cols, local.ravel())


def mass_matrix(mesh: Mesh) -> sp.csr_matrix:
    """Consistent P1 mass matrix (diagonal area/6, off-diagonal area/12)."""
    base = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
    local = mesh.areas[:, None, None] * base
    return _scatter(mesh, local, mesh.triangles, mesh.num_vertices)


def vector_mass_matrix(mesh: Mesh) -> sp.csr_matrix:
    """Mass matrix on interleaved vector fields (kron of scalar mass with I2)."""
    m = sp.kron(mass_matrix(mesh), sp.eye(2), format="csr")
    m.sort_indices()
    return m


def stiffness_matrix(mesh: Mesh, coeff=None) -> sp.csr_matrix:
    """Scalar stiffness with per-element weights (defaults to 1).

    Raises CoercivityError if any weight is nonpositive, since the operator
    must stay coercive on the Dirichlet-constrained space.
    """
    if coeff is None:
        coeff = np.ones(mesh.num_triangles)
    coeff = np.asarray(coeff, dtype=float)
    if coeff.shape != (mesh.num_triangles,):
        raise ValueError("coeff must provide one weight per triangle")
    if np.any(coeff <= 0.0):
        bad = int(np.argmin(coeff))
        raise CoercivityError(
            f"stiffness weight {coeff[bad]:g} on element {bad} is not positive; "
            "the diffusion coefficient must have a positive lower bound"
        )
    local = np.einsum("e,eid,ejd->eij", coeff * mesh.areas, mesh.grads, mesh.grads)
    return _scatter(mesh, local, mesh.triangles, mesh.num_vertices)


def _check_voigt(T) -> np.ndarray:
    T = np.asarray(T, dtype=float)
    if T.shape != (3, 3) or not np.allclose(T, T.T, rtol=0.0, atol=1e-12):
        raise ValueError("Voigt tensor must be a symmetric 3x3 matrix")
    return T


def _vector_dof_map(mesh: Mesh) -> np.ndarray:
    tri = mesh.triangles
    dof = np.empty((mesh.num_triangles, 6), dtype=np.int64)
    dof[:, 0::2] = 2 * tri
    dof[:, 1::2] = 2 * tri + 1
    return dof


def _strain_displacement(mesh: Mesh) -> np.ndarray:
    """Per-element 3x6 matrices mapping interleaved nodal u to Voigt strain."""
    B = np.zeros((mesh.num_triangles, 3, 6))
    g = mesh.grads
    for i in range(3):
        B[:, 0, 2 * i] = g[:, i, 0]        # du1/dx
        B[:, 1, 2 * i + 1] = g[:, i, 1]    # du2/dy
        B[:, 2, 2 * i] = g[:, i, 1]        # engineering shear
        B[:, 2, 2 * i + 1] = g[:, i, 0]
    return B


def elasticity_matrix(mesh: Mesh, T) -> sp.csr_matrix:
    """Bilinear form (u, v) -> integral of voigt(v)' T voigt(u).

    Exact for P1 (strains are piecewise constant).  T must be symmetric.
    """
    T = _check_voigt(T)
    B = _strain_displacement(mesh)
    local = np.einsum("e,eki,kl,elj->eij", mesh.areas, B, T, B)
    return _scatter(mesh, local, _vector_dof_map(mesh), 2 * mesh.num_vertices)


def lame_voigt(mu: float, lam: float) -> np.ndarray:
    """Voigt matrix of the isotropic tensor 2*mu*eps + lam*tr(eps)*I."""
    if mu <= 0.0:
        raise CoercivityError(f"shear modulus must be positive, got {mu:g}")
    if lam < 0.0:
        raise ValueError(f"second parameter must be nonnegative, got {lam:g}")
    return np.array([
        [2.0 * mu + lam, lam, 0.0],
        [lam, 2.0 * mu + lam, 0.0],
        [0.0, 0.0, mu],
    ])


def lame_from_youngs(E: float, nu: float) -> tuple[float, float]:
    """(mu, lambda) from Young's modulus and Poisson's ratio."""
    mu = E / (2.0 * (1.0 + nu))
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    return mu, lam


def coupling_matrix(mesh: Mesh, M) -> sp.csr_matrix:
    """Thermal coupling matrix C[i, j] = integral of (M : eps(psi_j)) * phi_i.

    Rows are scalar dofs, columns interleaved vector dofs.  C maps a
    displacement to the weak form of M : eps(u) against scalar test
    functions; its transpose realizes the thermal-stress load
    (theta -> integral of theta * M : eps(chi)).  Exact for P1.
    """
    M = np.asarray(M, dtype=float)
    if M.shape != (2, 2) or not np.allclose(M, M.T, rtol=0.0, atol=1e-12):
        raise ValueError("coupling matrix must be a symmetric 2x2 matrix")
    m_voigt = np.array([M[0, 0], M[1, 1], M[0, 1]])
    B = _strain_displacement(mesh)
    # integral of phi_i over the element is area/3 for every node
    traction = np.einsum("k,ekj->ej", m_voigt, B)       # M : eps per vector dof
    local = (mesh.areas[:, None, None] / 3.0) * traction[:, None, :]
    local = np.broadcast_to(local, (mesh.num_triangles, 3, 6))
    rows = np.repeat(mesh.triangles, 6, axis=1).ravel()
    cols = np.tile(_vector_dof_map(mesh), (1, 3)).ravel()
    n, m = mesh.num_vertices, 2 * mesh.num_vertices
    mat = sp.csr_matrix(
        (local.ravel(), (rows, cols)), shape=(n, m)
    )
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def _midpoint_values(mesh: Mesh, nodal: np.ndarray) -> np.ndarray:
    """P1 field values at the three edge midpoints, shape (nt, 3)."""
    v = nodal[mesh.triangles]
    return np.column_stack([
        0.5 * (v[:, a] + v[:, b]) for a, b in _EDGE_PAIRS
    ])


def element_conductivity(mesh: Mesh, theta: np.ndarray, sigma: Callable) -> np.ndarray:
    """Quadrature-averaged conductivity per element.

    sigma is evaluated at the edge midpoints of the P1 interpolant of theta
    and averaged with the equal midpoint weights.
    """
    return np.asarray(sigma(_midpoint_values(mesh, theta))).mean(axis=1)


def joule_load(mesh: Mesh, theta: np.ndarray, phi: np.ndarray, sigma: Callable) -> np.ndarray:
    """Load vector of the resistive heating term sigma(theta) |grad phi|^2.

    grad phi is the constant P1 gradient per element; sigma is sampled at the
    edge midpoints from the P1 interpolant of theta.
    """
    grad_phi = np.einsum("eid,ei->ed", mesh.grads, phi[mesh.triangles])
    intensity = np.einsum("ed,ed->e", grad_phi, grad_phi)
    sig = np.asarray(sigma(_midpoint_values(mesh, theta)))  # (nt, 3)
    w = (mesh.areas / 3.0)[:, None] * intensity[:, None] * sig
    local = w @ _PHI_AT_MIDPOINTS.T  # (nt, 3) contributions per node
    load = np.zeros(mesh.num_vertices)
    np.add.at(load, mesh.triangles, local)
    return load


def _quad_points(mesh: Mesh) -> np.ndarray:
    """Edge midpoint coordinates per element, shape (nt, 3, 2)."""
    p = mesh.corners
    return np.stack([0.5 * (p[:, a] + p[:, b]) for a, b in _EDGE_PAIRS], axis=1)


def load_vector(mesh: Mesh, f: Callable) -> np.ndarray:
    """Weak load of a continuous source via edge-midpoint quadrature.

    f(x, y) may return a scalar (scalar load, one entry per vertex) or a
    2-vector (interleaved vector load); x and y arrive as arrays.
    """
    q = _quad_points(mesh)
    vals = np.asarray(f(q[..., 0], q[..., 1]), dtype=float)
    if vals.shape == q.shape[:2]:  # scalar source
        w = (mesh.areas / 3.0)[:, None] * vals
        local = w @ _PHI_AT_MIDPOINTS.T
        load = np.zeros(mesh.num_vertices)
        np.add.at(load, mesh.triangles, local)
        return load
    if vals.shape == (2,):  # constant vector source
        vals = vals[:, None, None]
    vals = np.broadcast_to(vals, (2,) + q.shape[:2])  # (component, nt, 3)
    load = np.zeros(2 * mesh.num_vertices)
    for d in range(2):
        w = (mesh.areas / 3.0)[:, None] * vals[d]
        local = w @ _PHI_AT_MIDPOINTS.T
        np.add.at(load, 2 * mesh.triangles + d, local)
    return load


def interpolate_nodal(mesh: Mesh, g: Callable) -> np.ndarray:
    """Nodal interpolant of g; scalar g gives (nv,), 2-vector g interleaved (2*nv,)."""
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    vals = np.asarray(g(x, y), dtype=float)
    if vals.shape == x.shape:
        return vals
    if vals.shape == (2,):
        vals = vals[:, None]
    vals = np.broadcast_to(vals, (2, x.size))
    out = np.empty(2 * x.size)
    out[0::2] = vals[0]
    out[1::2] = vals[1]
    return out
