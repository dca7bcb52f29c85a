import math

import numpy as np
import pytest

from joulefem.assembly import (
    CoercivityError,
    coupling_matrix,
    elasticity_matrix,
    element_conductivity,
    interpolate_nodal,
    joule_load,
    lame_from_youngs,
    lame_voigt,
    load_vector,
    mass_matrix,
    stiffness_matrix,
    vector_mass_matrix,
)
from joulefem.mesh import Mesh, build_crisscross_mesh
from joulefem.problems import BENCHMARK_VOIGT, sigma_problem1
from joulefem.sparse_linalg import LinearSystem, apply_dirichlet, solve_spd


def unit_right_triangle():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    return Mesh(1, verts, np.array([[0, 1, 2]]), np.ones(3, bool), 3)


def element_matrices_oracle(mesh):
    """Analytic P1 element matrices assembled densely, built independently
    of the production gradient formulas (via 3x3 coordinate-matrix inverse)."""
    n = mesh.num_vertices
    M = np.zeros((n, n))
    K = np.zeros((n, n))
    base = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
    for tri in mesh.triangles:
        p = mesh.vertices[tri]
        H = np.column_stack([np.ones(3), p])
        area = 0.5 * np.linalg.det(H)
        G = np.linalg.inv(H)[1:, :].T  # rows are the nodal basis gradients
        M[np.ix_(tri, tri)] += area * base
        K[np.ix_(tri, tri)] += area * (G @ G.T)
    return M, K


def test_mass_partition_of_unity():
    m = build_crisscross_mesh(4)
    assert abs(mass_matrix(m).sum() - 1.0) <= 1e-13


def test_mass_single_right_triangle_analytic():
    m = unit_right_triangle()
    M = mass_matrix(m).toarray()
    area = 0.5
    np.testing.assert_allclose(np.diag(M), area / 6.0, atol=1e-15)
    off = M[~np.eye(3, dtype=bool)]
    np.testing.assert_allclose(off, area / 12.0, atol=1e-15)


def test_mass_and_stiffness_match_element_oracle():
    m = build_crisscross_mesh(2)
    M_ref, K_ref = element_matrices_oracle(m)
    np.testing.assert_allclose(mass_matrix(m).toarray(), M_ref, atol=1e-14)
    np.testing.assert_allclose(stiffness_matrix(m).toarray(), K_ref, atol=1e-13)
    assert abs((mass_matrix(m) @ np.ones(m.num_vertices)).sum() - 1.0) < 1e-13


def test_stiffness_constant_in_kernel():
    m = build_crisscross_mesh(3)
    K = stiffness_matrix(m)
    assert np.max(np.abs(K @ np.ones(m.num_vertices))) <= 1e-13


def test_stiffness_reproduces_linear_boundary_data():
    # constant coefficient, Dirichlet g = 5(1-x) everywhere: the discrete
    # solution is the nodal interpolant (P1 reproduces linears)
    m = build_crisscross_mesh(4)
    K = stiffness_matrix(m)
    bc = {int(i): 5.0 * (1.0 - m.vertices[i, 0]) for i in m.boundary_indices}
    sys = apply_dirichlet(LinearSystem(K, np.zeros(m.num_vertices)), bc)
    phi = solve_spd(sys.matrix, sys.rhs)
    interp = interpolate_nodal(m, lambda x, y: 5.0 * (1.0 - x))
    assert np.max(np.abs(phi - interp)) <= 1e-10


def test_stiffness_linear_in_coefficient():
    m = build_crisscross_mesh(2)
    K1 = stiffness_matrix(m, np.ones(m.num_triangles))
    K2 = stiffness_matrix(m, 2.0 * np.ones(m.num_triangles))
    np.testing.assert_array_equal(K2.toarray(), 2.0 * K1.toarray())


def test_stiffness_rejects_nonpositive_weight():
    m = build_crisscross_mesh(2)
    w = np.ones(m.num_triangles)
    w[3] = 0.0
    with pytest.raises(CoercivityError):
        stiffness_matrix(m, w)


def test_elasticity_rigid_translation_kernel():
    m = build_crisscross_mesh(3)
    K = elasticity_matrix(m, lame_voigt(1.0, 1.0))
    u = interpolate_nodal(m, lambda x, y: (np.full_like(x, 0.7), np.full_like(x, -1.3)))
    assert np.max(np.abs(K @ u)) <= 1e-13


def test_elasticity_benchmark_null_direction():
    # (x, -y) is divergence-free with zero shear: annihilated by the
    # benchmark Voigt matrix, whose normal block is singular
    m = build_crisscross_mesh(2)
    K = elasticity_matrix(m, BENCHMARK_VOIGT)
    u = interpolate_nodal(m, lambda x, y: (x, -y))
    assert abs(u @ (K @ u)) <= 1e-13


def test_elasticity_energy_constant_strain():
    # mu=1, lambda=0, u=(x, 0): energy = int 2*eps11^2 = 2
    m = build_crisscross_mesh(3)
    K = elasticity_matrix(m, lame_voigt(1.0, 0.0))
    u = interpolate_nodal(m, lambda x, y: (x, np.zeros_like(x)))
    assert abs(u @ (K @ u) - 2.0) <= 1e-12


def test_elasticity_energy_elementwise_oracle():
    m = build_crisscross_mesh(2)
    T = lame_voigt(1.5, 0.5)
    K = elasticity_matrix(m, T)
    rng = np.random.default_rng(2)
    u = rng.standard_normal(2 * m.num_vertices)
    # oracle: per-element constant strain from the P1 gradient
    energy = 0.0
    for e in range(m.num_triangles):
        tri = m.triangles[e]
        grad = np.zeros((2, 2))  # grad[i, j] = d u_i / d x_j
        for loc in range(3):
            g = m.grads[e, loc]
            grad[0] += u[2 * tri[loc]] * g
            grad[1] += u[2 * tri[loc] + 1] * g
        voigt = np.array([grad[0, 0], grad[1, 1], grad[0, 1] + grad[1, 0]])
        energy += m.areas[e] * (voigt @ T @ voigt)
    assert abs(u @ (K @ u) - energy) <= 1e-12 * max(abs(energy), 1.0)


def test_elasticity_rejects_asymmetric_tensor():
    m = build_crisscross_mesh(1)
    T = np.array([[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    with pytest.raises(ValueError):
        elasticity_matrix(m, T)


def test_lame_voigt_values():
    np.testing.assert_array_equal(
        lame_voigt(1.0, 0.0), [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]]
    )
    np.testing.assert_array_equal(
        lame_voigt(1e6, 5e6), [[7e6, 5e6, 0.0], [5e6, 7e6, 0.0], [0.0, 0.0, 1e6]]
    )
    with pytest.raises(CoercivityError):
        lame_voigt(0.0, 1.0)


def test_lame_from_youngs():
    mu, lam = lame_from_youngs(150e7, 0.01)
    assert np.isclose(mu, 150e7 / (2 * 1.01), rtol=1e-12)
    assert np.isclose(lam, 150e7 * 0.01 / (1.01 * 0.98), rtol=1e-12)
    assert np.isclose(mu, 7.4257425742574255e8, rtol=1e-12)
    assert np.isclose(lam, 1.5154576682158012e7, rtol=1e-12)


def test_coupling_divergence_of_identity_map():
    m = build_crisscross_mesh(3)
    C = coupling_matrix(m, np.eye(2))
    v = interpolate_nodal(m, lambda x, y: (x, y))
    ref = mass_matrix(m) @ (2.0 * np.ones(m.num_vertices))
    assert np.max(np.abs(C @ v - ref)) <= 1e-12


def test_coupling_kernel_fields():
    m = build_crisscross_mesh(3)
    C = coupling_matrix(m, np.eye(2))
    rigid = interpolate_nodal(m, lambda x, y: (np.ones_like(x), np.ones_like(x)))
    shear = interpolate_nodal(m, lambda x, y: (y, np.zeros_like(x)))
    assert np.max(np.abs(C @ rigid)) <= 1e-13
    assert np.max(np.abs(C @ shear)) <= 1e-13


def test_coupling_rejects_asymmetric_matrix():
    m = build_crisscross_mesh(1)
    with pytest.raises(ValueError):
        coupling_matrix(m, np.array([[1.0, 0.2], [0.0, 1.0]]))


def test_discrete_integration_by_parts():
    # <M:eps(v), chi> computed via the coupling matrix must equal the
    # independently assembled -<v, M grad chi> for chi vanishing on the
    # boundary (both integrands are polynomial, the quadrature is exact)
    m = build_crisscross_mesh(3)
    M = np.array([[1.3, 0.2], [0.2, 0.8]])
    C = coupling_matrix(m, M)
    rng = np.random.default_rng(42)
    pairs = ((0, 1), (1, 2), (2, 0))
    for _ in range(4):
        v = rng.standard_normal(2 * m.num_vertices)
        chi = rng.standard_normal(m.num_vertices)
        chi[m.boundary_indices] = 0.0
        lhs = chi @ (C @ v)
        rhs = 0.0
        for e in range(m.num_triangles):
            tri = m.triangles[e]
            gchi = sum(chi[tri[i]] * m.grads[e, i] for i in range(3))
            Mg = M @ gchi
            for a, b in pairs:
                vq = 0.5 * np.array([v[2 * tri[a]] + v[2 * tri[b]],
                                     v[2 * tri[a] + 1] + v[2 * tri[b] + 1]])
                rhs += (m.areas[e] / 3.0) * (vq @ Mg)
        assert abs(lhs + rhs) <= 1e-12 * max(abs(lhs), 1.0)


def test_joule_zero_potential():
    m = build_crisscross_mesh(3)
    out = joule_load(m, np.zeros(m.num_vertices), np.zeros(m.num_vertices), sigma_problem1())
    assert np.all(out == 0.0)


def test_joule_total_power_problem1_data():
    # theta = 0, phi = 5(1-x): |grad phi|^2 = 25 on every element and the
    # hat functions sum to one, so the loads sum to 25*sigma(0)
    m = build_crisscross_mesh(4)
    phi = interpolate_nodal(m, lambda x, y: 5.0 * (1.0 - x))
    load = joule_load(m, np.zeros(m.num_vertices), phi, sigma_problem1())
    expected = 25.0 * (2.5 + math.atan(10.0))
    assert np.isclose(load.sum(), expected, rtol=1e-13)


def test_joule_unit_conductivity():
    m = build_crisscross_mesh(2)
    phi = interpolate_nodal(m, lambda x, y: x)
    load = joule_load(m, np.zeros(m.num_vertices), phi, lambda th: np.ones_like(th))
    assert np.isclose(load.sum(), 1.0, rtol=1e-14)


def test_joule_constant_sigma_matches_lumped_mass():
    # constant sigma: load_i = sigma*|grad phi|^2 * int(phi_i), and the
    # integral of a hat function is the mass-matrix row sum
    m = build_crisscross_mesh(3)
    phi = interpolate_nodal(m, lambda x, y: 2.0 * x - y)
    load = joule_load(m, np.zeros(m.num_vertices), phi, lambda th: np.full_like(th, 1.7))
    rowsum = np.asarray(mass_matrix(m).sum(axis=1)).ravel()
    np.testing.assert_allclose(load, 1.7 * 5.0 * rowsum, rtol=1e-13)


def test_element_conductivity_midpoint_average():
    m = build_crisscross_mesh(2)
    theta = interpolate_nodal(m, lambda x, y: x)
    w = element_conductivity(m, theta, lambda th: th)
    # sigma = theta linear: the midpoint average equals theta at the centroid
    centroids = m.vertices[m.triangles].mean(axis=1)
    np.testing.assert_allclose(w, centroids[:, 0], atol=1e-14)


def test_load_vector_zero_and_constant():
    m = build_crisscross_mesh(3)
    z = load_vector(m, lambda x, y: (np.zeros_like(x), np.zeros_like(x)))
    assert np.all(z == 0.0)
    f = load_vector(m, lambda x, y: (np.ones_like(x), np.zeros_like(x)))
    assert np.isclose(f[0::2].sum(), 1.0, atol=1e-14)
    assert np.isclose(f[1::2].sum(), 0.0, atol=1e-14)


def test_scalar_load_partition_of_unity():
    m = build_crisscross_mesh(3)
    f = load_vector(m, lambda x, y: np.ones_like(x))
    assert np.isclose(f.sum(), 1.0, atol=1e-14)


def test_interpolate_nodal():
    m = build_crisscross_mesh(2)
    g = interpolate_nodal(m, lambda x, y: 5.0 * (1.0 - x))
    i = int(np.flatnonzero((m.vertices[:, 0] == 0.0) & (m.vertices[:, 1] == 0.5))[0])
    assert g[i] == 5.0
    v = interpolate_nodal(m, lambda x, y: (x, y))
    assert v.shape == (2 * m.num_vertices,)
    np.testing.assert_array_equal(v[0::2], m.vertices[:, 0])


@pytest.mark.parametrize("builder", [
    lambda m: mass_matrix(m),
    lambda m: vector_mass_matrix(m),
    lambda m: stiffness_matrix(m),
    lambda m: elasticity_matrix(m, BENCHMARK_VOIGT),
    lambda m: elasticity_matrix(m, lame_voigt(2.0, 1.0)),
])
def test_assembled_matrices_symmetric_and_psd(builder):
    m = build_crisscross_mesh(3)
    A = builder(m)
    diff = (A - A.T).tocsr()
    scale = np.max(np.abs(A.data))
    assert (np.max(np.abs(diff.data)) if diff.nnz else 0.0) <= 1e-12 * scale
    rng = np.random.default_rng(31)
    for _ in range(5):
        x = rng.standard_normal(A.shape[0])
        assert x @ (A @ x) >= -1e-12 * (x @ x)
