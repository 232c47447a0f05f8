"""Solvers for the constrained pencil  A x = lam M x,  C x = 0.

Three constrained routes (penalty, augmented, projection) plus the raw
unconstrained solve, all on a dense generalized eigen-backend.
"""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .assembly import AssembledSystem
from .materials import MediumCase

PHYSICAL, SPURIOUS, UNCLASSIFIED = "physical", "spurious", "unclassified"


class SolverError(RuntimeError):
    pass


class DenseLimitError(SolverError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    alpha: float = 800.0
    k: int | None = 20
    dense_limit: int = 4000
    qz_tol: float = 1e-10
    rank_tol_factor: float = float(np.finfo(float).eps)
    backend: str = "auto"  # "auto" or "qz"


@dataclass
class Mode:
    lam: complex
    xi: np.ndarray
    residual_constraint: float
    residual_eigen: float
    zeta: np.ndarray | None = None
    label: str = UNCLASSIFIED

    @property
    def zeta_spread(self) -> float | None:
        """max|zeta_i - mean(zeta)| / max|zeta_i|."""
        if self.zeta is None:
            return None
        top = np.abs(self.zeta).max()
        if top == 0:
            return 0.0
        return float(np.abs(self.zeta - self.zeta.mean()).max() / top)


@dataclass
class EigenSolution:
    modes: list
    method: str
    params: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([md.lam for md in self.modes], dtype=complex)

    def physical(self) -> np.ndarray:
        return np.array([md.lam for md in self.modes if md.label == PHYSICAL], dtype=complex)

    def __len__(self):
        return len(self.modes)


# ---------------------------------------------------------------------------
# dense backend

@dataclass
class GEVPResult:
    alpha: np.ndarray
    beta: np.ndarray
    vectors: np.ndarray | None
    finite: np.ndarray

    @property
    def eigenvalues(self) -> np.ndarray:
        lam = np.full(len(self.alpha), np.inf + 0j)
        f = self.finite
        lam[f] = self.alpha[f] / self.beta[f]
        return lam


def _is_hermitian(X, tol=1e-12) -> bool:
    scale = np.abs(X).max()
    return scale == 0 or np.abs(X - X.conj().T).max() <= tol * scale


def _qz(A, B, qz_tol, vectors):
    if vectors:
        w, V = la.eig(A, B, homogeneous_eigvals=True, check_finite=False)
    else:
        w, V = la.eig(A, B, homogeneous_eigvals=True, right=False, check_finite=False), None
    alpha, beta = w[0], w[1]
    bmax = np.abs(beta).max() if len(beta) else 0.0
    finite = np.abs(beta) > qz_tol * bmax
    return GEVPResult(alpha, beta, V, finite)


def dense_gevp(A, B, qz_tol: float = 1e-10, backend: str = "auto",
               vectors: bool = True) -> GEVPResult:
    """Eigenpairs of the dense pencil (A, B).

    ``backend="qz"`` always runs the generalized Schur (QZ) algorithm and
    returns the (alpha, beta) pairs; pairs with |beta| <= qz_tol * max|beta|
    are flagged infinite.  ``"auto"`` keeps QZ for singular or
    ill-conditioned B and otherwise reduces to a standard problem, which is
    the same spectrum at a fraction of the cost:
    Hermitian-definite pencils go to a Cholesky-based Hermitian solver,
    Hermitian positive definite B to a Cholesky-reduced standard problem,
    and other invertible B to B^-1 A.
    """
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    N = A.shape[0]
    if A.shape != (N, N) or B.shape != (N, N):
        raise SolverError(f"pencil shapes {A.shape}, {B.shape} are not square and equal")
    if N == 0:
        return GEVPResult(np.zeros(0, complex), np.zeros(0, complex),
                          np.zeros((0, 0), complex) if vectors else None, np.zeros(0, bool))
    try:
        if backend == "qz":
            return _qz(A, B, qz_tol, vectors)
        if backend != "auto":
            raise SolverError(f"unknown dense backend {backend!r}")
        ones = np.ones(N, dtype=complex)
        if _is_hermitian(B):
            Bh = (B + B.conj().T) / 2
            try:
                L = la.cholesky(Bh, lower=True, check_finite=False)
            except la.LinAlgError:
                L = None
            if L is not None and _cond_ok(np.abs(np.diag(L)) ** 2):
                if _is_hermitian(A):
                    Ah = (A + A.conj().T) / 2
                    if vectors:
                        lam, V = la.eigh(Ah, Bh, check_finite=False)
                    else:
                        lam, V = la.eigh(Ah, Bh, eigvals_only=True, check_finite=False), None
                    return GEVPResult(lam.astype(complex), ones, V, np.ones(N, bool))
                W = la.solve_triangular(L, A, lower=True, check_finite=False)
                W = la.solve_triangular(L, W.conj().T, lower=True, check_finite=False).conj().T
                if vectors:
                    lam, Yv = la.eig(W, check_finite=False)
                    V = la.solve_triangular(L, Yv, lower=True, trans="C", check_finite=False)
                else:
                    lam, V = la.eig(W, right=False, check_finite=False), None
                return GEVPResult(lam, ones, V, np.ones(N, bool))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", la.LinAlgWarning)  # singular B falls through to QZ
            lu, piv = la.lu_factor(B, check_finite=False)
        if _cond_ok(np.abs(np.diag(lu))):
            W = la.lu_solve((lu, piv), A, check_finite=False)
            if vectors:
                lam, V = la.eig(W, check_finite=False)
            else:
                lam, V = la.eig(W, right=False, check_finite=False), None
            return GEVPResult(lam, ones, V, np.ones(N, bool))
        return _qz(A, B, qz_tol, vectors)
    except (la.LinAlgError, ValueError) as exc:
        raise SolverError(f"dense eigen-backend failed: {exc}") from exc


def _cond_ok(diag, limit=1e-10):
    top = diag.max()
    return top > 0 and diag.min() > limit * top


# ---------------------------------------------------------------------------
# helpers

def _check_limit(sys: AssembledSystem, config: SolverConfig, what: str):
    size = sys.n + sys.m
    if size > config.dense_limit:
        raise DenseLimitError(
            f"{what}: n+m = {size} exceeds dense_limit = {config.dense_limit}; "
            "use a coarser mesh or raise solver.dense_limit")


def _order(lam):
    return np.lexsort((lam.imag, lam.real, np.abs(lam)))


def _build_modes(sys, lam, X, k, label=UNCLASSIFIED, zetas=None):
    order = _order(lam)
    if k is not None:
        order = order[:k]
    lam, X = lam[order], X[:, order]
    norms = np.linalg.norm(X, axis=0)
    norms[norms == 0] = 1.0
    X = X / norms
    if zetas is not None:
        zetas = zetas[:, order] / norms
    CX = sys.C @ X
    R = sys.A @ X - (sys.M @ X) * lam
    rc = np.linalg.norm(CX, axis=0)
    re = np.linalg.norm(R, axis=0)
    modes = []
    for j in range(len(lam)):
        modes.append(Mode(complex(lam[j]), X[:, j], float(rc[j]), float(re[j]),
                          None if zetas is None else zetas[:, j], label))
    return modes


def _dense(S):
    return S.toarray() if sp.issparse(S) else np.asarray(S)


def _config(config, **over):
    config = config or SolverConfig()
    over = {key: v for key, v in over.items() if v is not None}
    if over:
        config = SolverConfig(**{**config.__dict__, **over})
    return config


# ---------------------------------------------------------------------------
# solvers

def solve_unconstrained(sys: AssembledSystem, k: int | None = None,
                        config: SolverConfig | None = None) -> EigenSolution:
    """Smallest-|lam| pairs of A x = lam M x with the constraint ignored."""
    config = _config(config)
    _check_limit(sys, config, "unconstrained")
    t0 = time.perf_counter()
    res = dense_gevp(_dense(sys.A), _dense(sys.M), config.qz_tol, config.backend)
    f = res.finite
    modes = _build_modes(sys, res.eigenvalues[f], res.vectors[:, f], k)
    return EigenSolution(modes, "unconstrained", {"k": k}, time.perf_counter() - t0)


def penalty_matrix(sys: AssembledSystem, alpha: float) -> sp.csr_matrix:
    CH = sys.C.conj().T.tocsr()
    return (sys.A + alpha * (CH @ sys.C)).tocsr()


def solve_penalty(sys: AssembledSystem, alpha: float | None = None, k: int | None = None,
                  config: SolverConfig | None = None) -> EigenSolution:
    """(A + alpha C^H C) x = lam M x, |x| = 1."""
    config = _config(config, alpha=alpha)
    if not config.alpha > 0:
        raise SolverError("penalty alpha must be positive")
    _check_limit(sys, config, "penalty")
    t0 = time.perf_counter()
    K = penalty_matrix(sys, config.alpha)
    res = dense_gevp(_dense(K), _dense(sys.M), config.qz_tol, config.backend)
    f = res.finite
    modes = _build_modes(sys, res.eigenvalues[f], res.vectors[:, f], k)
    return EigenSolution(modes, "penalty", {"alpha": config.alpha, "k": k},
                         time.perf_counter() - t0)


def augmented_pencil(sys: AssembledSystem):
    CH = sys.C.conj().T
    K = sp.bmat([[sys.A, CH], [sys.C, None]], format="csr")
    B = sp.bmat([[sys.M, None], [None, sp.csr_matrix((sys.m, sys.m))]], format="csr")
    return K, B


def _uniform_complement(m: int) -> np.ndarray:
    """Orthonormal basis (m x m-1) of the vectors with zero mean, from the
    Householder reflector that maps e_1 onto the normalised all-ones vector."""
    u = np.full(m, 1 / np.sqrt(m))
    v = u.copy()
    v[0] -= 1.0
    vv = v @ v
    if vv == 0:
        return np.zeros((m, m - 1))
    H = np.eye(m) - (2 / vv) * np.outer(v, v)
    return H[:, 1:]


def solve_augmented(sys: AssembledSystem, k: int | None = None,
                    config: SolverConfig | None = None) -> EigenSolution:
    """Block pencil [[A, C^H], [C, 0]] [x; z] = lam [[M, 0], [0, 0]] [x; z].

    [0; 1] lies in the null space of both block matrices (the rows of C sum
    to zero), so the pencil is singular and QZ on it is unreliable.  That
    direction is split off exactly by writing z = W w + c 1 with W spanning
    the zero-mean vectors; QZ then runs on the regular (n+m-1) pencil and the
    infinite pairs are dropped.  The multiplier block is rescaled to the size
    of A before QZ, which keeps ``zeta`` accurate.  The free uniform part c is fixed so that
    |c 1| = 1, and ``zeta`` is scaled by the factor that normalises ``xi``.
    """
    config = _config(config)
    _check_limit(sys, config, "augmented")
    t0 = time.perf_counter()
    n, m = sys.n, sys.m
    W = _uniform_complement(m)
    CW = _dense(sys.C).conj().T @ W  # n x (m-1)
    a_max = np.abs(_dense(sys.A)).max()
    c_max = np.abs(CW).max()
    scale_z = a_max / c_max if a_max > 0 and c_max > 0 else 1.0
    CW = CW * scale_z
    K = np.zeros((n + m - 1, n + m - 1), dtype=complex)
    K[:n, :n] = _dense(sys.A)
    K[:n, n:] = CW
    K[n:, :n] = CW.conj().T
    B = np.zeros_like(K)
    B[:n, :n] = _dense(sys.M)
    res = dense_gevp(K, B, config.qz_tol, backend="qz")
    f = res.finite
    V = res.vectors[:, f]
    X = V[:n]
    scale = np.linalg.norm(X, axis=0)
    scale[scale == 0] = 1.0
    zetas = scale_z * (W @ V[n:]) + scale / np.sqrt(m)
    label = PHYSICAL if sys.case in (MediumCase.CASE1, MediumCase.CASE2) else UNCLASSIFIED
    modes = _build_modes(sys, res.eigenvalues[f], X, k, label, zetas=zetas)
    return EigenSolution(modes, "augmented", {"k": k, "infinite": int((~f).sum())},
                         time.perf_counter() - t0)


@dataclass
class NullspaceBasis:
    Q: np.ndarray
    r: int
    rank: int
    sigma_min_kept: float
    sigma_max_dropped: float


def nullspace_basis(C, rank_tol_factor: float = float(np.finfo(float).eps)) -> NullspaceBasis:
    """Orthonormal basis of null(C) from the trailing right singular vectors."""
    Cd = _dense(C).astype(complex)
    m, n = Cd.shape
    try:
        _, s, Vh = la.svd(Cd, full_matrices=True, check_finite=False)
    except la.LinAlgError as exc:
        raise SolverError(f"SVD of the constraint matrix failed: {exc}") from exc
    smax = s[0] if len(s) else 0.0
    rank = int(np.sum(s > smax * max(m, n) * rank_tol_factor))
    Q = Vh[rank:].conj().T
    kept = float(s[rank - 1]) if rank else 0.0
    dropped = float(s[rank]) if rank < len(s) else 0.0
    return NullspaceBasis(Q, n - rank, rank, kept, dropped)


def solve_projection(sys: AssembledSystem, k: int | None = None,
                     config: SolverConfig | None = None,
                     basis: NullspaceBasis | None = None) -> EigenSolution:
    """Galerkin problem (Q^H A Q) y = lam (Q^H M Q) y on the null space of C."""
    config = _config(config)
    _check_limit(sys, config, "projection")
    t0 = time.perf_counter()
    if basis is None:
        basis = nullspace_basis(sys.C, config.rank_tol_factor)
    Q = basis.Q
    if basis.r == 0:
        raise SolverError("constraint null space is trivial (r = 0)")
    QH = Q.conj().T
    Ar = QH @ (sys.A @ Q)
    Mr = QH @ (sys.M @ Q)
    res = dense_gevp(Ar, Mr, config.qz_tol, config.backend)
    f = res.finite
    X = Q @ res.vectors[:, f]
    modes = _build_modes(sys, res.eigenvalues[f], X, k, PHYSICAL)
    return EigenSolution(modes, "projection",
                         {"k": k, "r": basis.r, "rank": basis.rank},
                         time.perf_counter() - t0)


SOLVERS = {
    "unconstrained": solve_unconstrained,
    "penalty": solve_penalty,
    "augmented": solve_augmented,
    "projection": solve_projection,
}


def solve(method: str, sys: AssembledSystem, config: SolverConfig | None = None,
          k: int | None = None) -> EigenSolution:
    config = _config(config)
    k = config.k if k is None else k
    try:
        fn = SOLVERS[method]
    except KeyError:
        raise SolverError(f"unknown method {method!r}") from None
    return fn(sys, k=k, config=config)


# ---------------------------------------------------------------------------
# diagnostics

def zero_tolerance(eigenvalues, rel: float = 1e-8) -> float:
    """rel * median |lam| over the clearly nonzero eigenvalues."""
    a = np.abs(np.asarray(eigenvalues))
    a = a[np.isfinite(a)]
    if not len(a):
        return 0.0
    nonzero = a[a > 1e-10 * a.max()]
    return rel * float(np.median(nonzero)) if len(nonzero) else 0.0


def count_zero_eigenvalues(eigenvalues, tol: float | None = None) -> int:
    a = np.abs(np.asarray(eigenvalues))
    if tol is None:
        tol = zero_tolerance(eigenvalues)
    return int(np.sum(a <= tol))


def augmented_rank_condition(sys: AssembledSystem):
    """(rank(M^H Y^H), rank(Y M^H Y^H)); equal ranks mean the augmented and
    constrained problems share eigenpairs.  Dense, small meshes only."""
    Y = sys.Y.toarray().astype(complex)
    MH = _dense(sys.M).conj().T
    left = MH @ Y.T
    return (int(np.linalg.matrix_rank(left)), int(np.linalg.matrix_rank(Y @ left)))
