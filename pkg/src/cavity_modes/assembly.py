"""Element and global matrices of the edge-element discretisation.

Unknowns live on every edge (curl-curl ``A`` and mass ``M``, both n x n) and
every node (the constraint ``C = Y M``, m x n).  The boundary conditions are
natural, so nothing is eliminated.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .materials import MaterialTensors, MediumCase, classify_medium, invert_tensor
from .mesh import LOCAL_EDGES, EdgeNumbering, TetMesh, build_connectivity_matrix, extract_edges

# Symmetric 4-point rule, exact for quadratics on a tetrahedron.
_QA, _QB = 0.5854101966249685, 0.1381966011250105
QUAD_BARY = np.array([[_QA, _QB, _QB, _QB],
                      [_QB, _QA, _QB, _QB],
                      [_QB, _QB, _QA, _QB],
                      [_QB, _QB, _QB, _QA]])
QUAD_WEIGHTS = np.full(4, 0.25)


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True)
class ElementGeometry:
    grads: np.ndarray   # (..., 4, 3) gradients of the barycentric coordinates
    volume: np.ndarray  # (...,)


def tet_geometry(points: np.ndarray) -> ElementGeometry:
    """Geometry of one tet (points (4,3)) or a batch (points (t,4,3))."""
    points = np.asarray(points, dtype=float)
    P = np.concatenate([np.ones(points.shape[:-1] + (1,)), points], axis=-1)
    det = np.linalg.det(P)
    scale = np.abs(points[..., 1:, :] - points[..., :1, :]).max(axis=(-1, -2))
    if np.any(np.abs(det) <= 1e-13 * scale**3):
        raise AssemblyError("degenerate tetrahedron")
    coef = np.linalg.inv(P)
    grads = np.swapaxes(coef[..., 1:, :], -1, -2)
    return ElementGeometry(grads, np.abs(det) / 6.0)


def element_geometry(mesh: TetMesh, k: int) -> ElementGeometry:
    return tet_geometry(mesh.nodes[mesh.tets[k]])


def edge_curls(grads: np.ndarray, signs) -> np.ndarray:
    """Constant curls 2 s_i (grad L_a x grad L_b) of the six edge functions."""
    ga = grads[..., LOCAL_EDGES[:, 0], :]
    gb = grads[..., LOCAL_EDGES[:, 1], :]
    return 2.0 * np.asarray(signs)[..., None] * np.cross(ga, gb)


def edge_functions(grads: np.ndarray, signs, bary: np.ndarray) -> np.ndarray:
    """Signed edge functions s_i (L_a grad L_b - L_b grad L_a) at barycentric
    points ``bary`` (q,4).  Returns (..., q, 6, 3)."""
    la = bary[:, LOCAL_EDGES[:, 0]]  # (q, 6)
    lb = bary[:, LOCAL_EDGES[:, 1]]
    ga = grads[..., None, LOCAL_EDGES[:, 0], :]  # (..., 1, 6, 3)
    gb = grads[..., None, LOCAL_EDGES[:, 1], :]
    N = la[..., None] * gb - lb[..., None] * ga
    return np.asarray(signs)[..., None, :, None] * N


def element_stiffness(geom: ElementGeometry, eps_inv, signs) -> np.ndarray:
    """Local curl-curl matrix; entry (i, k) = V (eps_inv c_k) . c_i."""
    c = edge_curls(geom.grads, signs)
    ec = np.einsum("...ab,...kb->...ka", np.asarray(eps_inv, dtype=complex), c)
    return np.asarray(geom.volume)[..., None, None] * np.einsum("...ia,...ka->...ik", c, ec)


def element_mass(geom: ElementGeometry, mu, signs) -> np.ndarray:
    """Local mass matrix; entry (i, k) = int_K (mu N_k) . N_i by the 4-point rule."""
    N = edge_functions(geom.grads, signs, QUAD_BARY)  # (..., q, 6, 3)
    muN = np.einsum("...ab,...qkb->...qka", np.asarray(mu, dtype=complex), N)
    integrand = np.einsum("...qia,...qka->...qik", N, muN)
    w = np.asarray(geom.volume)[..., None] * QUAD_WEIGHTS
    return np.einsum("...q,...qik->...ik", w, integrand)


def element_constraint(geom: ElementGeometry, mu, signs) -> np.ndarray:
    """Local (4 x 6) block of int_K (mu N_l) . grad L_i, by quadrature."""
    N = edge_functions(geom.grads, signs, QUAD_BARY)
    muN = np.einsum("...ab,...qlb->...qla", np.asarray(mu, dtype=complex), N)
    integrand = np.einsum("...ia,...qla->...qil", geom.grads, muN)
    w = np.asarray(geom.volume)[..., None] * QUAD_WEIGHTS
    return np.einsum("...q,...qil->...il", w, integrand)


def _scatter(rows, cols, vals, shape) -> sp.csr_matrix:
    """Sum duplicate triplets in a canonical order so the result does not
    depend on the order of the element loop."""
    rows, cols, vals = rows.ravel(), cols.ravel(), vals.ravel()
    order = np.lexsort((vals.imag, vals.real, cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    start = np.ones(len(rows), dtype=bool)
    start[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
    heads = np.flatnonzero(start)
    summed = np.add.reduceat(vals, heads) if len(vals) else vals
    r, c = rows[heads], cols[heads]
    indptr = np.searchsorted(r, np.arange(shape[0] + 1))
    return sp.csr_matrix((summed, c, indptr), shape=shape)


def _per_tet(mat, regions, t):
    """Per-tet (eps_inv, mu) arrays for one material or a region table."""
    if isinstance(mat, MaterialTensors):
        return (np.broadcast_to(mat.eps_inv, (t, 3, 3)),
                np.broadcast_to(mat.mu_r, (t, 3, 3)))
    mats = list(mat)
    if regions is None:
        raise AssemblyError("region ids required for a material list")
    regions = np.asarray(regions)
    if regions.shape != (t,) or regions.min() < 0 or regions.max() >= len(mats):
        raise AssemblyError("region ids do not match the mesh/material list")
    eps_inv = np.stack([m.eps_inv for m in mats])[regions]
    mu = np.stack([m.mu_r for m in mats])[regions]
    return eps_inv, mu


@dataclass(frozen=True)
class AssembledSystem:
    A: sp.csr_matrix
    M: sp.csr_matrix
    Y: sp.csr_matrix
    C: sp.csr_matrix
    n: int
    m: int
    mesh_h: float
    case: MediumCase | None = None
    label: str = ""


def assemble_system(mesh: TetMesh, edges: EdgeNumbering | None = None, Y=None,
                    mat: MaterialTensors | list = None, regions=None) -> AssembledSystem:
    if edges is None:
        edges = extract_edges(mesh)
    m, n = mesh.num_nodes, edges.n
    if Y is None:
        Y = build_connectivity_matrix(edges, m)
    if Y.shape != (m, n):
        raise AssemblyError(f"connectivity matrix has shape {Y.shape}, expected {(m, n)}")
    if mat is None:
        raise AssemblyError("material required")
    eps_inv, mu = _per_tet(mat, regions, mesh.num_tets)

    geom = tet_geometry(mesh.nodes[mesh.tets])
    signs = edges.tet_signs
    Ke = element_stiffness(geom, eps_inv, signs)
    Me = element_mass(geom, mu, signs)
    gid = edges.tet_edges
    rows = np.broadcast_to(gid[:, :, None], Ke.shape)
    cols = np.broadcast_to(gid[:, None, :], Ke.shape)
    A = _scatter(rows, cols, Ke, (n, n))
    M = _scatter(rows, cols, Me, (n, n))
    C = (Y @ M).tocsr()
    C.sort_indices()
    case = classify_medium(mat) if isinstance(mat, MaterialTensors) else None
    return AssembledSystem(A, M, Y, C, n, m, mesh.h, case, mesh.label)


def assemble_constraint_direct(mesh: TetMesh, edges: EdgeNumbering,
                               mat: MaterialTensors | list, regions=None) -> sp.csr_matrix:
    """C by direct quadrature of int (mu N_l) . grad L_i; a cross-check for C = Y M."""
    _, mu = _per_tet(mat, regions, mesh.num_tets)
    geom = tet_geometry(mesh.nodes[mesh.tets])
    Ce = element_constraint(geom, mu, edges.tet_signs)
    rows = np.broadcast_to(mesh.tets[:, :, None], Ce.shape)
    cols = np.broadcast_to(edges.tet_edges[:, None, :], Ce.shape)
    return _scatter(rows, cols, Ce, (mesh.num_nodes, edges.n))


def _maxabs(S) -> float:
    if sp.issparse(S):
        S = S.tocoo()
        return float(np.abs(S.data).max()) if S.nnz else 0.0
    return float(np.abs(S).max()) if np.size(S) else 0.0


@dataclass
class IdentityReport:
    ya: float                   # |YA|_max / |A|_max
    c_minus_ym: float           # |C - YM|_max / |M|_max
    c_direct: float | None      # |C_direct - YM|_max / |M|_max
    yt_beta: float              # |Y^T 1|_max
    rank_y: int | None
    m: int
    n: int
    tol: float = 1e-12
    flags: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.flags

    def rows(self):
        yield "ya_residual", self.ya
        yield "c_minus_ym_residual", self.c_minus_ym
        if self.c_direct is not None:
            yield "c_direct_residual", self.c_direct
        yield "yt_beta", self.yt_beta
        if self.rank_y is not None:
            yield "rank_y", self.rank_y
        yield "m_minus_1", self.m - 1


def check_identities(sys: AssembledSystem, C_direct=None, rank_limit: int = 500,
                     tol: float = 1e-12) -> IdentityReport:
    Yf = sys.Y.astype(float)
    ya = _maxabs(Yf @ sys.A) / max(_maxabs(sys.A), np.finfo(float).tiny)
    mnorm = max(_maxabs(sys.M), np.finfo(float).tiny)
    YM = Yf @ sys.M
    cym = _maxabs(sys.C - YM) / mnorm
    cd = None if C_direct is None else _maxabs(C_direct - YM) / mnorm
    ytb = float(np.abs(sys.Y.T @ np.ones(sys.m)).max()) if sys.n else 0.0
    rank = None
    if sys.m <= rank_limit:
        rank = int(np.linalg.matrix_rank(sys.Y.toarray().astype(float)))
    rep = IdentityReport(ya, cym, cd, ytb, rank, sys.m, sys.n, tol)
    if ya > tol:
        rep.flags.append("YA != 0")
    if cym > tol:
        rep.flags.append("C != YM")
    if cd is not None and cd > tol:
        rep.flags.append("C_direct != YM")
    if ytb != 0:
        rep.flags.append("Y^T beta != 0")
    if rank is not None and rank != sys.m - 1:
        rep.flags.append("rank(Y) != m-1")
    return rep


def write_triplets(S, path, digits: int = 17) -> None:
    """Dump a sparse matrix as 1-based ``row col re im`` lines to a path or
    an open text stream."""
    S = sp.coo_matrix(S)
    order = np.lexsort((S.col, S.row))
    lines = [f"# {S.shape[0]} {S.shape[1]} {S.nnz}\n"]
    for i, j, v in zip(S.row[order], S.col[order], S.data[order]):
        v = complex(v)
        lines.append(f"{i + 1} {j + 1} {v.real:.{digits}g} {v.imag:.{digits}g}\n")
    if hasattr(path, "write"):
        path.writelines(lines)
    else:
        with open(path, "w", encoding="utf-8") as f:
            f.writelines(lines)


def read_triplets(path) -> sp.csr_matrix:
    with open(path, encoding="utf-8") as f:
        header = f.readline().lstrip("#").split()
        shape = (int(header[0]), int(header[1]))
        data = np.loadtxt(f, ndmin=2)
    if not len(data):
        return sp.csr_matrix(shape, dtype=complex)
    vals = data[:, 2] + 1j * data[:, 3]
    return sp.csr_matrix((vals, (data[:, 0].astype(int) - 1, data[:, 1].astype(int) - 1)),
                         shape=shape)
