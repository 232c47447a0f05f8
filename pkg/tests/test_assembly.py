import numpy as np
import pytest
import scipy.sparse as sp
from _oracles import (bary_gradients, collapsed_gauss, oracle_mass, oracle_stiffness,
                      random_tensor, random_tet, whitney, whitney_curls)
from hypothesis import given, settings
from hypothesis import strategies as st

from cavity_modes.assembly import (QUAD_BARY, QUAD_WEIGHTS, AssemblyError,
                                   assemble_constraint_direct, assemble_system,
                                   check_identities, edge_curls, edge_functions,
                                   element_constraint, element_mass, element_stiffness,
                                   read_triplets, tet_geometry, write_triplets)
from cavity_modes.materials import PAPER_CASE2, PAPER_CASE4, VACUUM, MaterialTensors
from cavity_modes.mesh import (LOCAL_EDGES, TetMesh, build_connectivity_matrix,
                               extract_edges, generate_box_mesh, generate_cylinder_mesh)

SIGNS = np.array([1, -1, 1, 1, -1, 1.0])


def test_quadrature_rule_is_exact_for_quadratics():
    # int over the reference tet of L_i L_j = (1 + delta_ij) / 20 * volume
    exact = (np.ones((4, 4)) + np.eye(4)) / 20
    got = np.einsum("q,qi,qj->ij", QUAD_WEIGHTS, QUAD_BARY, QUAD_BARY)
    assert np.allclose(got, exact, atol=1e-16)


def test_oracle_rule_exact_for_degree_seven():
    bary, w = collapsed_gauss()
    # int L0^2 L1^2 L2 L3^2 dV / V = 3! * 2!2!1!2! / (7 + 3)!
    val = (w * bary[:, 0] ** 2 * bary[:, 1] ** 2 * bary[:, 2] * bary[:, 3] ** 2).sum()
    assert val == pytest.approx(6 * 8 / 3628800, rel=1e-13)


def test_geometry_matches_cross_product_gradients():
    rng = np.random.default_rng(1)
    for _ in range(20):
        P = random_tet(rng)
        g = tet_geometry(P)
        assert np.allclose(g.grads, bary_gradients(P), rtol=0, atol=1e-13 * np.abs(g.grads).max())
        assert np.allclose(g.grads.sum(axis=0), 0, atol=1e-13)


def test_degenerate_tet_rejected():
    with pytest.raises(AssemblyError):
        tet_geometry(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0.0]]))


def test_edge_functions_and_curls_match_oracle():
    rng = np.random.default_rng(2)
    P = random_tet(rng)
    bary = rng.dirichlet(np.ones(4), size=7)
    g = tet_geometry(P)
    assert np.allclose(edge_functions(g.grads, SIGNS, bary), whitney(P, SIGNS, bary), atol=1e-13)
    assert np.allclose(edge_curls(g.grads, SIGNS), whitney_curls(P, SIGNS), atol=1e-12)


def test_tangential_moments_are_kronecker():
    # int along edge j of N_i . t = delta_ij for unit-sign functions
    rng = np.random.default_rng(3)
    P = random_tet(rng)
    g = tet_geometry(P)
    nodes, weights = np.polynomial.legendre.leggauss(3)
    nodes, weights = (nodes + 1) / 2, weights / 2
    ones = np.ones(6)
    for j, (a, b) in enumerate(LOCAL_EDGES):
        bary = np.zeros((3, 4))
        bary[:, a] = 1 - nodes
        bary[:, b] = nodes
        N = edge_functions(g.grads, ones, bary)
        moments = np.einsum("q,qia,a->i", weights, N, P[b] - P[a])
        assert np.allclose(moments, np.eye(6)[j], atol=1e-13)


def test_constant_and_rotation_fields_are_reproduced():
    mesh = generate_box_mesh(1.0, 0.5, 0.75, 2, 2, 2)
    sys = assemble_system(mesh, mat=VACUUM)
    e = extract_edges(mesh).edges
    tangent = mesh.nodes[e[:, 1]] - mesh.nodes[e[:, 0]]
    mid = (mesh.nodes[e[:, 1]] + mesh.nodes[e[:, 0]]) / 2
    u = np.array([0.3, -1.0, 2.0])
    xi = tangent @ u
    assert np.abs(sys.A @ xi).max() < 1e-12
    assert (xi @ (sys.M @ xi)).real == pytest.approx(0.375 * u @ u, rel=1e-13)
    # u(x) = w x x has curl 2w
    w = np.array([0.5, 0.2, -1.0])
    xi = np.einsum("ka,ka->k", np.cross(w, mid), tangent)
    assert (xi @ (sys.A @ xi)).real == pytest.approx(0.375 * 4 * w @ w, rel=1e-12)


def test_element_matrices_match_degree5_oracle():
    rng = np.random.default_rng(4)
    for _ in range(25):
        P = random_tet(rng, scale=rng.uniform(0.1, 3))
        signs = rng.choice([-1.0, 1.0], size=6)
        eps_inv, mu = random_tensor(rng), random_tensor(rng)
        g = tet_geometry(P)
        K, Ko = element_stiffness(g, eps_inv, signs), oracle_stiffness(P, eps_inv, signs)
        M, Mo = element_mass(g, mu, signs), oracle_mass(P, mu, signs)
        assert np.abs(K - Ko).max() <= 1e-13 * np.abs(Ko).max()
        assert np.abs(M - Mo).max() <= 1e-13 * np.abs(Mo).max()


def test_element_matrices_hermitian_for_hermitian_tensors():
    g = tet_geometry(random_tet(np.random.default_rng(5)))
    K = element_stiffness(g, PAPER_CASE2.mu_r, SIGNS)
    M = element_mass(g, PAPER_CASE2.mu_r, SIGNS)
    assert np.allclose(K, K.conj().T, atol=1e-14 * np.abs(K).max())
    assert np.allclose(M, M.conj().T, atol=1e-14 * np.abs(M).max())
    assert np.linalg.eigvalsh(M).min() > 0


def test_element_constraint_equals_local_gradient_expansion():
    rng = np.random.default_rng(6)
    P = random_tet(rng)
    g = tet_geometry(P)
    Yl = np.zeros((4, 6))
    for e, (a, b) in enumerate(LOCAL_EDGES):
        Yl[a, e], Yl[b, e] = -SIGNS[e], SIGNS[e]
    mu = random_tensor(rng)
    assert np.allclose(element_constraint(g, mu, SIGNS), Yl @ element_mass(g, mu, SIGNS),
                       atol=1e-13)
    assert np.allclose(Yl @ element_stiffness(g, np.eye(3), SIGNS), 0, atol=1e-12)


def test_batched_equals_single():
    mesh = generate_box_mesh(1, 1, 1, 1, 1, 1)
    edges = extract_edges(mesh)
    g = tet_geometry(mesh.nodes[mesh.tets])
    batch = element_mass(g, np.broadcast_to(PAPER_CASE4.mu_r, (6, 3, 3)), edges.tet_signs)
    for k in range(6):
        gk = tet_geometry(mesh.nodes[mesh.tets[k]])
        assert np.allclose(batch[k], element_mass(gk, PAPER_CASE4.mu_r, edges.tet_signs[k]),
                           rtol=0, atol=1e-15)


@pytest.mark.parametrize("mat", [VACUUM, PAPER_CASE2, PAPER_CASE4])
def test_identities_on_box(mat):
    mesh = generate_box_mesh(1, 0.5, 0.75, 2, 2, 3)
    edges = extract_edges(mesh)
    sys = assemble_system(mesh, edges, mat=mat)
    rep = check_identities(sys, assemble_constraint_direct(mesh, edges, mat))
    assert rep.ok, rep.flags
    assert rep.rank_y == sys.m - 1
    names = [k for k, _ in rep.rows()]
    assert names[:3] == ["ya_residual", "c_minus_ym_residual", "c_direct_residual"]


def test_identity_check_flags_corruption():
    mesh = generate_box_mesh(1, 1, 1, 1, 1, 1)
    sys = assemble_system(mesh, mat=VACUUM)
    bad = sys.C.tolil()
    bad[0, 0] += 1.0
    rep = check_identities(sys, bad.tocsr())
    assert "C_direct != YM" in rep.flags and not rep.ok


def test_shapes_and_sparsity():
    mesh = generate_cylinder_mesh(0.2, 0.5, 1)
    sys = assemble_system(mesh, mat=PAPER_CASE2)
    assert sys.A.shape == sys.M.shape == (sys.n, sys.n)
    assert sys.C.shape == sys.Y.shape == (sys.m, sys.n)
    assert sys.n == len(extract_edges(mesh).edges) and sys.m == mesh.num_nodes
    assert sys.A.nnz == sys.M.nnz < sys.n**2 / 4
    assert str(sys.case) == "Case2"


def test_assembly_is_bitwise_independent_of_tet_order():
    mesh = generate_cylinder_mesh(0.2, 0.5, 1)
    perm = np.random.default_rng(7).permutation(mesh.num_tets)
    shuffled = TetMesh(mesh.nodes, mesh.tets[perm])
    a = assemble_system(mesh, mat=PAPER_CASE4)
    b = assemble_system(shuffled, mat=PAPER_CASE4)
    for name in ("A", "M", "C"):
        x, y = getattr(a, name), getattr(b, name)
        assert np.array_equal(x.indptr, y.indptr) and np.array_equal(x.indices, y.indices)
        assert np.array_equal(x.data, y.data), name


@settings(max_examples=10, deadline=None)
@given(st.floats(0.05, 20))
def test_scale_covariance(s):
    mesh = generate_box_mesh(1, 1, 1, 1, 1, 2)
    big = TetMesh(mesh.nodes * s, mesh.tets)
    a = assemble_system(mesh, mat=PAPER_CASE2)
    b = assemble_system(big, mat=PAPER_CASE2)
    assert np.allclose((b.A * s).toarray(), a.A.toarray(), rtol=1e-12, atol=1e-12)
    assert np.allclose((b.M / s**3).toarray() * s**2, a.M.toarray(), rtol=1e-12, atol=1e-12)


def test_region_materials():
    mesh = generate_box_mesh(1, 1, 1, 1, 1, 2)
    regions = (mesh.nodes[mesh.tets].mean(axis=1)[:, 2] > 0.5).astype(int)
    same = assemble_system(mesh, mat=[PAPER_CASE2, PAPER_CASE2], regions=regions)
    single = assemble_system(mesh, mat=PAPER_CASE2)
    assert np.array_equal(same.M.toarray(), single.M.toarray())
    mixed = assemble_system(mesh, mat=[VACUUM, PAPER_CASE2], regions=regions)
    assert not np.allclose(mixed.M.toarray(), single.M.toarray())
    assert mixed.case is None
    with pytest.raises(AssemblyError):
        assemble_system(mesh, mat=[VACUUM], regions=regions)
    with pytest.raises(AssemblyError):
        assemble_system(mesh, mat=[VACUUM, VACUUM])


def test_assembly_argument_errors():
    mesh = generate_box_mesh(1, 1, 1, 1, 1, 1)
    with pytest.raises(AssemblyError, match="material"):
        assemble_system(mesh)
    with pytest.raises(AssemblyError, match="shape"):
        assemble_system(mesh, Y=sp.csr_matrix((3, 3)), mat=VACUUM)


def test_triplet_round_trip(tmp_path):
    sys = assemble_system(generate_box_mesh(1, 1, 1, 1, 1, 1), mat=PAPER_CASE4)
    for name in ("A", "M", "C", "Y"):
        path = tmp_path / f"{name}.txt"
        write_triplets(getattr(sys, name), path)
        back = read_triplets(path)
        assert np.array_equal(back.toarray(), getattr(sys, name).toarray().astype(complex))
    first = (tmp_path / "Y.txt").read_text().splitlines()[:2]
    assert first[0] == f"# {sys.m} {sys.n} {sys.Y.nnz}"
    assert first[1].split()[:2] == ["1", "1"]


def test_global_gradient_expansion_pointwise():
    # grad L_i = sum_k y_ik N_k inside every tet of a small mesh
    mesh = generate_box_mesh(1, 0.5, 0.75, 1, 1, 1)
    edges = extract_edges(mesh)
    Y = build_connectivity_matrix(edges, mesh.num_nodes).toarray()
    rng = np.random.default_rng(8)
    for t in range(mesh.num_tets):
        P = mesh.nodes[mesh.tets[t]]
        G = bary_gradients(P)
        bary = rng.dirichlet(np.ones(4), size=5)
        N = whitney(P, edges.tet_signs[t], bary)  # (q, 6, 3)
        for loc, node in enumerate(mesh.tets[t]):
            coeff = Y[node, edges.tet_edges[t]]
            assert np.allclose(np.einsum("k,qka->qa", coeff, N), G[loc], atol=1e-12)


def test_vacuum_matrices_real_symmetric():
    sys = assemble_system(generate_box_mesh(1, 1, 1, 2, 1, 1), mat=VACUUM)
    A, M = sys.A.toarray(), sys.M.toarray()
    assert not np.any(A.imag) and not np.any(M.imag)
    assert np.allclose(A, A.T, atol=1e-14) and np.allclose(M, M.T, atol=1e-15)


def test_custom_anisotropic_material():
    mat = MaterialTensors(np.diag([1, 2, 3]), np.diag([3, 2, 1]))
    sys = assemble_system(generate_box_mesh(1, 1, 1, 1, 1, 1), mat=mat)
    rep = check_identities(sys)
    assert rep.ok


def test_hermitian_forms_are_semidefinite_and_definite():
    hermitian = MaterialTensors(np.array([[2, 0.5j, 0], [-0.5j, 1.5, 0], [0, 0, 1]]),
                                PAPER_CASE2.mu_r)
    sys = assemble_system(generate_box_mesh(1, 0.5, 0.75, 2, 1, 2), mat=hermitian)
    A, M = sys.A.toarray(), sys.M.toarray()
    assert np.abs(A - A.conj().T).max() <= 1e-12 * np.abs(A).max()
    assert np.abs(M - M.conj().T).max() <= 1e-12 * np.abs(M).max()
    rng = np.random.default_rng(9)
    for _ in range(20):
        x = rng.normal(size=sys.n) + 1j * rng.normal(size=sys.n)
        assert (x.conj() @ A @ x).real >= -1e-12 * np.abs(A).max() * (x.conj() @ x).real
        assert (x.conj() @ M @ x).real > 0


def test_one_cube_stiffness_rank_and_real_ritz_values():
    sys = assemble_system(generate_box_mesh(1, 1, 1, 1, 1, 1), mat=VACUUM)
    A, M = sys.A.toarray(), sys.M.toarray()
    assert (sys.n, sys.m) == (19, 8)
    assert np.linalg.matrix_rank(A) == sys.n - (sys.m - 1) == 12
    lam = np.linalg.eigvals(np.linalg.solve(M, A))
    assert np.abs(lam.imag).max() <= 1e-10 * np.abs(lam).max()
    assert lam.real.min() >= -1e-10 * np.abs(lam).max()
