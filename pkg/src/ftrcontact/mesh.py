"""Two-body simplicial meshes in 2D.

A :class:`Mesh` stores both bodies in one vertex array with global
numbering.  Boundary segments carry one of the markers in
:data:`MARKERS` and are oriented so that the owning triangle lies on the
left, i.e. the outward normal of a segment with direction ``(ex, ey)`` is
``(ey, -ex)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
NONMORTAR = "contact_nonmortar"
MORTAR = "contact_mortar"
MARKERS = (DIRICHLET, NEUMANN, NONMORTAR, MORTAR)

DIM = 2


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class Mesh:
    vertices: np.ndarray          # (n, 2) reference coordinates
    triangles: np.ndarray         # (nt, 3) vertex indices, counter-clockwise
    segments: np.ndarray          # (ns, 2) boundary vertex pairs
    markers: tuple                # (ns,) marker names
    body: np.ndarray              # (nt,) body id per triangle (1 or 2)

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.ascontiguousarray(self.vertices, dtype=float))
        object.__setattr__(self, "triangles", np.ascontiguousarray(self.triangles, dtype=np.int64))
        object.__setattr__(self, "segments", np.ascontiguousarray(self.segments, dtype=np.int64).reshape(-1, 2))
        object.__setattr__(self, "markers", tuple(self.markers))
        object.__setattr__(self, "body", np.ascontiguousarray(self.body, dtype=np.int64))
        for m in self.markers:
            if m not in MARKERS:
                raise MeshError(f"unknown boundary marker {m!r}")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_dofs(self) -> int:
        return DIM * len(self.vertices)

    def identity(self) -> np.ndarray:
        """Coefficient vector of the identity deformation."""
        return self.vertices.ravel().copy()

    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def vertex_body(self) -> np.ndarray:
        vb = np.zeros(self.n_vertices, dtype=np.int64)
        vb[self.triangles.ravel()] = np.repeat(self.body, 3)
        return vb

    def marked_segments(self, marker: str) -> np.ndarray:
        mask = np.array([m == marker for m in self.markers], dtype=bool)
        return self.segments[mask] if len(mask) else self.segments[:0]

    def marked_vertices(self, marker: str) -> np.ndarray:
        return np.unique(self.marked_segments(marker).ravel())

    def polyline(self, marker: str) -> np.ndarray:
        """Vertex indices of the marked boundary as one ordered open polyline.

        The order follows the segment orientation (body on the left).  An
        absent marker yields an empty array.
        """
        segs = self.marked_segments(marker)
        if len(segs) == 0:
            return np.zeros(0, dtype=np.int64)
        nxt = {}
        for a, b in segs:
            if a in nxt:
                raise MeshError(f"{marker} boundary branches at vertex {a}")
            nxt[int(a)] = int(b)
        heads = set(nxt) - set(nxt.values())
        if len(heads) != 1:
            raise MeshError(f"{marker} boundary is not a single open polyline")
        v = heads.pop()
        chain = [v]
        while v in nxt:
            v = nxt[v]
            chain.append(v)
        if len(chain) != len(segs) + 1:
            raise MeshError(f"{marker} boundary is not a single open polyline")
        return np.array(chain, dtype=np.int64)

    def validate(self) -> None:
        if np.any(self.areas() <= 0):
            raise MeshError("triangle with non-positive reference area")
        vb = self.vertex_body()
        for marker, owner in ((NONMORTAR, 1), (MORTAR, 2)):
            segs = self.marked_segments(marker)
            if len(segs) and np.any(vb[segs.ravel()] != owner):
                raise MeshError(f"{marker} boundary must lie on body {owner}")
            self.polyline(marker)
        dsegs = self.marked_segments(DIRICHLET)
        for b in np.unique(self.body):
            if not np.any(vb[dsegs.ravel()] == b):
                raise MeshError(f"body {b} has no Dirichlet boundary")


def _edges(triangles):
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    e = np.sort(e, axis=1)
    uniq, inv = np.unique(e, axis=0, return_inverse=True)
    return uniq, inv.reshape(3, -1).T


def refine_uniform(mesh: Mesh) -> Mesh:
    """Split every triangle into four by edge midpoints."""
    n = mesh.n_vertices
    edges, tri_edges = _edges(mesh.triangles)
    mid = n + np.arange(len(edges))
    verts = np.vstack([mesh.vertices, 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])])
    a, b, c = mesh.triangles.T
    m01, m12, m20 = mid[tri_edges[:, 0]], mid[tri_edges[:, 1]], mid[tri_edges[:, 2]]
    tris = np.vstack([
        np.column_stack([a, m01, m20]),
        np.column_stack([m01, b, m12]),
        np.column_stack([m20, m12, c]),
        np.column_stack([m01, m12, m20]),
    ])
    body = np.tile(mesh.body, 4)

    lookup = {(int(p), int(q)): int(k) for k, (p, q) in enumerate(edges)}
    segs, markers = [], []
    for (p, q), m in zip(mesh.segments, mesh.markers):
        k = mid[lookup[(min(p, q), max(p, q))]]
        segs += [(p, k), (k, q)]
        markers += [m, m]
    return Mesh(verts, tris, np.array(segs, dtype=np.int64).reshape(-1, 2), markers, body)


def prolongation(coarse: Mesh, fine: Mesh) -> sp.csr_matrix:
    """Scalar P1 interpolation from ``coarse`` to its uniform refinement ``fine``."""
    nc = coarse.n_vertices
    edges, _ = _edges(coarse.triangles)
    rows = np.concatenate([np.arange(nc), nc + np.arange(len(edges)), nc + np.arange(len(edges))])
    cols = np.concatenate([np.arange(nc), edges[:, 0], edges[:, 1]])
    vals = np.concatenate([np.ones(nc), np.full(2 * len(edges), 0.5)])
    return sp.csr_matrix((vals, (rows, cols)), shape=(fine.n_vertices, nc))


@dataclass(frozen=True)
class MeshHierarchy:
    levels: list                        # coarse -> fine
    prolongations: list = field(default_factory=list)   # scalar P_l: level l -> l+1

    @classmethod
    def uniform(cls, coarse: Mesh, n_refine: int) -> "MeshHierarchy":
        levels = [coarse]
        prolongs = []
        for _ in range(n_refine):
            fine = refine_uniform(levels[-1])
            prolongs.append(prolongation(levels[-1], fine))
            levels.append(fine)
        return cls(levels, prolongs)

    @property
    def finest(self) -> Mesh:
        return self.levels[-1]

    def block_prolongations(self, d: int = DIM) -> list:
        """Prolongations acting on interleaved block vectors, coarse -> fine."""
        eye = sp.identity(d, format="csr")
        return [sp.kron(p, eye, format="csr") for p in self.prolongations]


@dataclass(frozen=True)
class DofMap:
    """Block ordering ``(u1_C, u2_C, u_I)`` of the global vertex numbering.

    ``order[k]`` is the vertex placed at block position ``k``; DOF ``i`` of
    vertex ``v`` has native index ``d*v + i``.
    """

    nonmortar: np.ndarray
    mortar: np.ndarray
    interior: np.ndarray
    d: int = DIM

    @classmethod
    def from_mesh(cls, mesh: Mesh) -> "DofMap":
        nm = mesh.polyline(NONMORTAR)
        mo = mesh.polyline(MORTAR)
        rest = np.setdiff1d(np.arange(mesh.n_vertices), np.concatenate([nm, mo]))
        return cls(nm, mo, rest)

    @property
    def m1(self) -> int:
        return len(self.nonmortar)

    @property
    def m2(self) -> int:
        return len(self.mortar)

    @property
    def order(self) -> np.ndarray:
        return np.concatenate([self.nonmortar, self.mortar, self.interior])

    def dofs(self, vertices) -> np.ndarray:
        v = np.asarray(vertices, dtype=np.int64)
        return (self.d * v[:, None] + np.arange(self.d)).ravel()

    @property
    def permutation(self) -> np.ndarray:
        """Native DOF index of each position in the partitioned ordering."""
        return self.dofs(self.order)


def deformed_boundary(mesh: Mesh, z: np.ndarray, marker: str) -> np.ndarray:
    """Deformed positions of the marked boundary polyline, shape ``(k, 2)``.

    Absent markers give an empty ``(0, 2)`` array.
    """
    idx = mesh.polyline(marker)
    return np.asarray(z, dtype=float).reshape(-1, DIM)[idx]


def boundary_length(mesh: Mesh, z=None, marker=None) -> float:
    x = mesh.vertices if z is None else np.asarray(z).reshape(-1, DIM)
    segs = mesh.segments if marker is None else mesh.marked_segments(marker)
    return float(np.linalg.norm(x[segs[:, 1]] - x[segs[:, 0]], axis=1).sum())


def orient_segments(triangles: np.ndarray, segments: np.ndarray) -> np.ndarray:
    """Flip boundary segments so the adjacent triangle lies on their left."""
    directed = {}
    for t in triangles:
        for i in range(3):
            directed[(int(t[i]), int(t[(i + 1) % 3]))] = True
    out = np.array(segments, dtype=np.int64).reshape(-1, 2).copy()
    for k, (a, b) in enumerate(out):
        if (int(a), int(b)) in directed:
            continue
        if (int(b), int(a)) in directed:
            out[k] = (b, a)
        else:
            raise MeshError(f"boundary segment ({a}, {b}) is not a triangle edge")
    return out


def fix_orientation(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p = vertices[triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    neg = (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]) < 0
    tris = triangles.copy()
    tris[neg] = tris[neg][:, [0, 2, 1]]
    return tris
