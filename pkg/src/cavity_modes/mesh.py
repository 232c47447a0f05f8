"""Tetrahedral meshes, test geometries, edge numbering and the node-edge
connectivity matrix.

Node and tet indices are 0-based in memory and 1-based in mesh files.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

# Local edges of a tetrahedron, in the order of the six edge basis functions.
# Edge i runs from local vertex LOCAL_EDGES[i][0] to LOCAL_EDGES[i][1].
LOCAL_EDGES = np.array([(0, 1), (1, 2), (0, 2), (2, 3), (0, 3), (1, 3)])

_VOLUME_EPS = 1e-14


class MeshError(ValueError):
    """Raised for invalid meshes or malformed mesh files."""


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


def signed_volumes(nodes: np.ndarray, tets: np.ndarray) -> np.ndarray:
    p = nodes[tets]
    d = p[:, 1:] - p[:, :1]
    return np.linalg.det(d) / 6.0


@dataclass(frozen=True)
class TetMesh:
    nodes: np.ndarray
    tets: np.ndarray
    label: str = ""

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float).reshape(-1, 3)
        tets = np.asarray(self.tets, dtype=np.int64).reshape(-1, 4)
        m = len(nodes)
        if tets.size and (tets.min() < 0 or tets.max() >= m):
            raise MeshError("node index out of range")
        srt = np.sort(tets, axis=1)
        if np.any(srt[:, 1:] == srt[:, :-1]):
            raise MeshError("tet with repeated vertices")
        vol = signed_volumes(nodes, tets)
        scale = _edge_scale(nodes, tets)
        bad = np.abs(vol) <= _VOLUME_EPS * scale**3
        if np.any(bad):
            raise MeshError(f"degenerate tet {int(np.flatnonzero(bad)[0])}")
        # canonical orientation: swap the last two vertices of inverted tets
        neg = vol < 0
        if np.any(neg):
            tets = tets.copy()
            tets[neg, 2], tets[neg, 3] = tets[neg, 3], tets[neg, 2].copy()
        object.__setattr__(self, "nodes", _readonly(nodes))
        object.__setattr__(self, "tets", _readonly(tets))

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_tets(self) -> int:
        return len(self.tets)

    def volumes(self) -> np.ndarray:
        return signed_volumes(self.nodes, self.tets)

    @property
    def h(self) -> float:
        """Longest edge length."""
        p = self.nodes[self.tets[:, LOCAL_EDGES]]
        return float(np.linalg.norm(p[:, :, 1] - p[:, :, 0], axis=-1).max())

    def check_conforming(self) -> None:
        """Face-pairing check: every triangular face is shared by at most two
        tets, and no tet is listed twice."""
        faces = np.sort(self.tets[:, [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]]], axis=2)
        _, counts = np.unique(faces.reshape(-1, 3), axis=0, return_counts=True)
        if np.any(counts > 2):
            raise MeshError("non-conforming mesh: face shared by more than two tets")
        _, tcounts = np.unique(np.sort(self.tets, axis=1), axis=0, return_counts=True)
        if np.any(tcounts > 1):
            raise MeshError("non-conforming mesh: duplicated tet")


def _edge_scale(nodes, tets):
    if not len(tets):
        return np.zeros(0)
    p = nodes[tets[:, LOCAL_EDGES]]
    return np.linalg.norm(p[:, :, 1] - p[:, :, 0], axis=-1).max(axis=1)


# ---------------------------------------------------------------------------
# file format

def parse_mesh(text: str, label: str = "", strict: bool = False) -> TetMesh:
    """Parse the ``nodes``/``tets`` text format (1-based ids, '#' comments)."""
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        s = raw.split("#", 1)[0].strip()
        if s:
            lines.append((lineno, s.split()))
    it = iter(lines)

    def header(name):
        try:
            lineno, tok = next(it)
        except StopIteration:
            raise MeshError(f"missing '{name}' header") from None
        if len(tok) != 2 or tok[0] != name:
            raise MeshError(f"line {lineno}: expected '{name} <count>'")
        try:
            count = int(tok[1])
        except ValueError:
            raise MeshError(f"line {lineno}: bad {name} count {tok[1]!r}") from None
        if count < 0:
            raise MeshError(f"line {lineno}: negative {name} count")
        return count

    def records(count, width, conv, what):
        out, where = [], []
        for expected in range(1, count + 1):
            try:
                lineno, tok = next(it)
            except StopIteration:
                raise MeshError(f"unexpected end of file reading {what} {expected}") from None
            if len(tok) != width + 1:
                raise MeshError(f"line {lineno}: expected {width + 1} fields, got {len(tok)}")
            try:
                ident = int(tok[0])
                vals = [conv(t) for t in tok[1:]]
            except ValueError:
                raise MeshError(f"line {lineno}: malformed {what} record") from None
            if ident != expected:
                raise MeshError(f"line {lineno}: {what} id {ident}, expected {expected}")
            out.append(vals)
            where.append(lineno)
        return out, where

    m = header("nodes")
    nodes, _ = records(m, 3, float, "node")
    t = header("tets")
    tets, tet_lines = records(t, 4, int, "tet")
    extra = next(it, None)
    if extra is not None:
        raise MeshError(f"line {extra[0]}: trailing content")

    nodes = np.array(nodes, dtype=float).reshape(-1, 3)
    tets = np.array(tets, dtype=np.int64).reshape(-1, 4) - 1
    for k, row in enumerate(tets):
        if row.min() < 0 or row.max() >= m:
            raise MeshError(f"line {tet_lines[k]}: node index out of range")
        if len(set(row.tolist())) != 4:
            raise MeshError(f"line {tet_lines[k]}: tet with repeated vertices")
    if len(tets):
        vol = signed_volumes(nodes, tets)
        bad = np.abs(vol) <= _VOLUME_EPS * _edge_scale(nodes, tets) ** 3
        if np.any(bad):
            raise MeshError(f"line {tet_lines[int(np.flatnonzero(bad)[0])]}: zero-volume tet")
    mesh = TetMesh(nodes, tets, label)
    if strict:
        mesh.check_conforming()
    return mesh


def read_mesh(path, strict: bool = False) -> TetMesh:
    with open(path, encoding="utf-8") as f:
        return parse_mesh(f.read(), label=str(path), strict=strict)


def format_mesh(mesh: TetMesh) -> str:
    out = []
    if mesh.label:
        out.append(f"# {mesh.label}")
    out.append(f"nodes {mesh.num_nodes}")
    out.extend(f"{i} {x:.17g} {y:.17g} {z:.17g}"
               for i, (x, y, z) in enumerate(mesh.nodes.tolist(), start=1))
    out.append(f"tets {mesh.num_tets}")
    out.extend(f"{i} {a + 1} {b + 1} {c + 1} {d + 1}"
               for i, (a, b, c, d) in enumerate(mesh.tets.tolist(), start=1))
    return "\n".join(out) + "\n"


def write_mesh(mesh: TetMesh, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(format_mesh(mesh))


# ---------------------------------------------------------------------------
# generators

def _kuhn_grid(xs, ys, zs):
    """Structured grid on the tensor product of 1-D coordinate arrays, every
    cell split into the six Kuhn tetrahedra sharing its main diagonal."""
    nx, ny, nz = len(xs) - 1, len(ys) - 1, len(zs) - 1
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    nodes = np.column_stack([X.ravel(order="F"), Y.ravel(order="F"), Z.ravel(order="F")])

    def idx(i, j, k):
        return i + (nx + 1) * (j + (ny + 1) * k)

    I, J, K = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    I, J, K = I.ravel(order="F"), J.ravel(order="F"), K.ravel(order="F")
    tets = []
    for perm in itertools.permutations(range(3)):
        path = [np.zeros(3, int)]
        for axis in perm:
            step = path[-1].copy()
            step[axis] = 1
            path.append(step)
        tets.append(np.column_stack([idx(I + d[0], J + d[1], K + d[2]) for d in path]))
    tets = np.stack(tets, axis=1).reshape(-1, 4)
    return nodes, tets


def generate_box_mesh(a, b, c, nx, ny, nz) -> TetMesh:
    """Box [0,a]x[0,b]x[0,c] with nx*ny*nz cells, six tets per cell."""
    if min(a, b, c) <= 0:
        raise MeshError("box dimensions must be positive")
    if min(nx, ny, nz) < 1:
        raise MeshError("box divisions must be >= 1")
    nodes, tets = _kuhn_grid(np.linspace(0, a, nx + 1), np.linspace(0, b, ny + 1),
                             np.linspace(0, c, nz + 1))
    return TetMesh(nodes, tets, f"box {a}x{b}x{c} [{nx},{ny},{nz}]")


def cells_per_side(level: int) -> int:
    """Cells across the base square/cube of the ball and cylinder generators."""
    return level + 2


def _radial(p):
    # p -> p * |p|_inf / |p|_2, origin fixed
    inf = np.abs(p).max(axis=1)
    two = np.linalg.norm(p, axis=1)
    f = np.divide(inf, two, out=np.ones_like(inf), where=two > 0)
    return p * f[:, None]


def _equiangular(p):
    # Shells |p|_inf = rho go to spheres of radius rho, with the cube-face
    # coordinates warped by tan(pi/4 t) so boundary cells subtend nearly equal
    # angles; blended towards the identity by rho so the core stays a
    # regular grid.
    rho = np.abs(p).max(axis=1)
    d = np.divide(p, rho[:, None], out=np.zeros_like(p), where=rho[:, None] > 0)
    w = np.tan(np.pi / 4 * d)
    nw = np.linalg.norm(w, axis=1)
    nw[nw == 0] = 1.0
    mapped = w / nw[:, None] * rho[:, None]
    return p + (mapped - p) * rho[:, None]


MAPPINGS = {"radial": _radial, "equiangular": _equiangular}


def _round(p, mapping):
    try:
        return MAPPINGS[mapping](p)
    except KeyError:
        raise MeshError(f"unknown mapping {mapping!r}; choose from {sorted(MAPPINGS)}") from None


def _mapped_mesh(nodes, tets, label):
    try:
        return TetMesh(nodes, tets, label)
    except MeshError as exc:
        raise MeshError(f"{label}: {exc}; retry at a higher level") from None


def _symmetric_axis(n):
    s = np.linspace(-1.0, 1.0, n + 1)
    if n % 2 == 0:
        s[n // 2] = 0.0
    return s


def generate_ball_mesh(r, level, mapping: str = "equiangular") -> TetMesh:
    """Ball of radius ``r``: the cube [-1,1]^3 with ``level + 2`` cells per
    side, mapped onto the ball with every boundary node on the sphere.

    ``mapping="radial"`` is the plain p * |p|_inf / |p|_2 projection;
    the default ``"equiangular"`` map has better-shaped boundary cells and a
    smaller volume deficit at the same node count.
    """
    if r <= 0:
        raise MeshError("radius must be positive")
    if level < 1:
        raise MeshError("level must be >= 1")
    s = _symmetric_axis(cells_per_side(level))
    nodes, tets = _kuhn_grid(s, s, s)
    nodes = r * _round(nodes, mapping)
    return _mapped_mesh(nodes, tets, f"ball r={r} level={level} {mapping}")


def cylinder_layers(r, height, level) -> int:
    """Number of z layers matching the cross-section spacing 2r/(level+2)."""
    return max(1, int(np.ceil(cells_per_side(level) * height / (2 * r) - 1e-9)))


def generate_cylinder_mesh(r, height, level, mapping: str = "equiangular") -> TetMesh:
    """Cylinder of radius ``r`` on z in [0, height]: the square [-1,1]^2 with
    ``level + 2`` cells per side mapped onto the disk, extruded in layers of
    matching thickness."""
    if r <= 0 or height <= 0:
        raise MeshError("radius and height must be positive")
    if level < 1:
        raise MeshError("level must be >= 1")
    s = _symmetric_axis(cells_per_side(level))
    z = np.linspace(0.0, height, cylinder_layers(r, height, level) + 1)
    nodes, tets = _kuhn_grid(s, s, z)
    nodes[:, :2] = r * _round(nodes[:, :2], mapping)
    return _mapped_mesh(nodes, tets, f"cylinder r={r} height={height} level={level} {mapping}")


# ---------------------------------------------------------------------------
# edges and connectivity

@dataclass(frozen=True)
class EdgeNumbering:
    """Global edges (low, high) sorted lexicographically, plus for every tet
    the global id and orientation sign of each of its six local edges."""

    edges: np.ndarray
    tet_edges: np.ndarray
    tet_signs: np.ndarray

    @property
    def n(self) -> int:
        return len(self.edges)


def extract_edges(mesh: TetMesh) -> EdgeNumbering:
    pairs = mesh.tets[:, LOCAL_EDGES]  # (t, 6, 2)
    a, b = pairs[..., 0], pairs[..., 1]
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    key = np.stack([lo.ravel(), hi.ravel()], axis=1)
    edges, inverse = np.unique(key, axis=0, return_inverse=True)
    signs = np.where(a < b, 1, -1).astype(np.int8)
    return EdgeNumbering(_readonly(edges),
                         _readonly(inverse.reshape(-1, 6)),
                         _readonly(signs))


def build_connectivity_matrix(edges: EdgeNumbering, m: int) -> sp.csr_matrix:
    """Signed node-edge incidence: -1 at the initial (lower) node, +1 at the
    terminal node of every edge."""
    n = edges.n
    rows = edges.edges.T.ravel()
    cols = np.concatenate([np.arange(n), np.arange(n)])
    data = np.concatenate([-np.ones(n, dtype=np.int64), np.ones(n, dtype=np.int64)])
    Y = sp.csr_matrix((data, (rows, cols)), shape=(m, n))
    Y.sort_indices()
    return Y


def vertex_degrees(edges: EdgeNumbering, m: int) -> np.ndarray:
    return np.bincount(edges.edges.ravel(), minlength=m)
