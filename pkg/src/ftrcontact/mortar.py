"""Mortar contact geometry on deformed boundary polylines.

The non-mortar side carries the constraint rows: for every non-mortar
vertex ``q``

    c_q(z) = int_{gamma^1} g(s) theta_q(s) ds,
    g(s)   = n_h(Phi(s)) . (s - Phi(s)),

with ``theta_q`` the P1 hat on the deformed non-mortar polyline (or, with
``basis="dual"``, the segment-wise biorthogonal function ``2 theta_q -
theta_r``), ``Phi``
the closest point on the deformed mortar polyline and ``n_h`` the P1
interpolation of averaged vertex normals.  Each non-mortar segment is cut
where the foot point changes its supporting feature (segment interior or
vertex) and every piece is integrated with 3-point Gauss quadrature.

The constraint Jacobian ``(D | M | 0)`` is computed by central differences
of the gap with respect to contact-boundary DOFs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse as sp

from .mesh import DIM, MORTAR, NONMORTAR, Mesh

_GAUSS_X = np.array([0.5 - 0.5 * np.sqrt(0.6), 0.5, 0.5 + 0.5 * np.sqrt(0.6)])
_GAUSS_W = np.array([5.0, 8.0, 5.0]) / 18.0
_SAMPLES = 4
BASES = ("lagrange", "dual")


class DegenerateGeometryError(ValueError):
    pass


def segment_normals(P) -> np.ndarray:
    """Unit outward normals of the segments of polyline ``P`` (body on the left)."""
    P = np.asarray(P, dtype=float)
    e = P[1:] - P[:-1]
    L = np.hypot(e[:, 0], e[:, 1])
    if np.any(L <= 0):
        raise DegenerateGeometryError(f"zero-length segment {int(np.argmin(L))}")
    return np.column_stack([e[:, 1], -e[:, 0]]) / L[:, None]


def averaged_normals(P) -> np.ndarray:
    """Unit vertex normals: normalised sum of the adjacent segment normals."""
    P = np.asarray(P, dtype=float)
    if len(P) < 2:
        raise DegenerateGeometryError("polyline needs at least one segment")
    ns = segment_normals(P)
    acc = np.zeros((len(P), 2))
    acc[:-1] += ns
    acc[1:] += ns
    norm = np.hypot(acc[:, 0], acc[:, 1])
    if np.any(norm <= 1e-14):
        raise DegenerateGeometryError(f"vertex {int(np.argmin(norm))} has opposite adjacent normals")
    return acc / norm[:, None]


@numba.njit(cache=True)
def _project(px, py, M, N):
    best = np.inf
    bj = 0
    bt = 0.0
    bfx = M[0, 0]
    bfy = M[0, 1]
    for j in range(M.shape[0] - 1):
        ax, ay, bx, by = M[j, 0], M[j, 1], M[j + 1, 0], M[j + 1, 1]
        dx = max(min(ax, bx) - px, 0.0, px - max(ax, bx))
        dy = max(min(ay, by) - py, 0.0, py - max(ay, by))
        if dx * dx + dy * dy >= best:
            continue
        ex = bx - ax
        ey = by - ay
        t = ((px - ax) * ex + (py - ay) * ey) / (ex * ex + ey * ey)
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
        fx = ax + t * ex
        fy = ay + t * ey
        d2 = (px - fx) ** 2 + (py - fy) ** 2
        if d2 < best:
            best = d2
            bj = j
            bt = t
            bfx = fx
            bfy = fy
    if bt <= 0.0:
        label = 2 * bj
    elif bt >= 1.0:
        label = 2 * bj + 2
    else:
        label = 2 * bj + 1
    nx = (1.0 - bt) * N[bj, 0] + bt * N[bj + 1, 0]
    ny = (1.0 - bt) * N[bj, 1] + bt * N[bj + 1, 1]
    gap = nx * (px - bfx) + ny * (py - bfy)
    return gap, label, bj, bt, bfx, bfy, nx, ny


@numba.njit(cache=True)
def _label(xa, ya, xb, yb, t, M, N):
    return _project(xa + t * (xb - xa), ya + t * (yb - ya), M, N)[1]


@numba.njit(cache=True)
def _integrate_piece(xa, ya, xb, yb, t0, t1, L, M, N, gx, gw, dual):
    c0 = 0.0
    c1 = 0.0
    for k in range(3):
        t = t0 + (t1 - t0) * gx[k]
        g = _project(xa + t * (xb - xa), ya + t * (yb - ya), M, N)[0]
        w = gw[k] * (t1 - t0) * L * g
        if dual:
            # biorthogonal to the hats on this segment
            c0 += w * (2.0 - 3.0 * t)
            c1 += w * (3.0 * t - 1.0)
        else:
            c0 += w * (1.0 - t)
            c1 += w * t
    return c0, c1


@numba.njit(cache=True)
def _segment(xa, ya, xb, yb, M, N, gx, gw, nsamp, dual):
    """Contributions of one non-mortar segment to its two end rows.

    Returns (c_a, c_b, jump, jmin, jmax) where ``jump`` marks a
    non-adjacent feature change (foot point jumps) and ``[jmin, jmax]`` is
    the range of mortar segments touched by the foot point.
    """
    L = np.hypot(xb - xa, yb - ya)
    labs = np.empty(nsamp + 1, dtype=np.int64)
    for i in range(nsamp + 1):
        labs[i] = _label(xa, ya, xb, yb, i / nsamp, M, N)
    c0 = 0.0
    c1 = 0.0
    jump = False
    jmin = (labs[0] - 1) // 2
    jmax = labs[0] // 2
    start = 0.0
    for i in range(nsamp):
        lo = i / nsamp
        hi = (i + 1) / nsamp
        A = labs[i]
        B = labs[i + 1]
        while A != B:
            a = lo
            b = hi
            for _ in range(200):
                mid = 0.5 * (a + b)
                if mid <= a or mid >= b:
                    break
                if _label(xa, ya, xb, yb, mid, M, N) == A:
                    a = mid
                else:
                    b = mid
            Bp = _label(xa, ya, xb, yb, b, M, N)
            if abs(Bp - A) != 1:
                jump = True
            jmin = min(jmin, (Bp - 1) // 2)
            jmax = max(jmax, Bp // 2)
            cut = b
            if cut > start:
                p0, p1 = _integrate_piece(xa, ya, xb, yb, start, cut, L, M, N, gx, gw, dual)
                c0 += p0
                c1 += p1
                start = cut
            lo = b
            A = Bp
    if start < 1.0:
        p0, p1 = _integrate_piece(xa, ya, xb, yb, start, 1.0, L, M, N, gx, gw, dual)
        c0 += p0
        c1 += p1
    return c0, c1, jump, jmin, jmax


@numba.njit(cache=True)
def _segments(S, M, N, ids, gx, gw, nsamp, dual):
    n = ids.shape[0]
    out = np.zeros((n, 2))
    jump = np.zeros(n, dtype=np.bool_)
    jr = np.zeros((n, 2), dtype=np.int64)
    for k in range(n):
        e = ids[k]
        c0, c1, jp, j0, j1 = _segment(S[e, 0], S[e, 1], S[e + 1, 0], S[e + 1, 1], M, N, gx, gw, nsamp, dual)
        out[k, 0] = c0
        out[k, 1] = c1
        jump[k] = jp
        jr[k, 0] = j0
        jr[k, 1] = j1
    return out, jump, jr


@numba.njit(cache=True)
def _project_many(P, M, N):
    n = P.shape[0]
    gap = np.empty(n)
    foot = np.empty((n, 2))
    normal = np.empty((n, 2))
    seg = np.empty(n, dtype=np.int64)
    tau = np.empty(n)
    for i in range(n):
        g, lab, j, t, fx, fy, nx, ny = _project(P[i, 0], P[i, 1], M, N)
        gap[i] = g
        foot[i, 0] = fx
        foot[i, 1] = fy
        normal[i, 0] = nx
        normal[i, 1] = ny
        seg[i] = j
        tau[i] = t
    return gap, foot, normal, seg, tau


@dataclass(frozen=True)
class ProjectionResult:
    foot: np.ndarray
    segment: int
    tau: float          # barycentric coordinate of the foot on its segment
    gap: float
    normal: np.ndarray  # n_h at the foot (not renormalised)


def closest_point(s, mortar_polyline, normals=None) -> ProjectionResult:
    """Closest point of ``s`` on the polyline and the signed gap there."""
    M = np.ascontiguousarray(mortar_polyline, dtype=float)
    N = averaged_normals(M) if normals is None else np.ascontiguousarray(normals, dtype=float)
    g, _, j, t, fx, fy, nx, ny = _project(float(s[0]), float(s[1]), M, N)
    return ProjectionResult(np.array([fx, fy]), int(j), float(t), float(g), np.array([nx, ny]))


def _gap_parts(S, M, N, ids=None, dual=False):
    if ids is None:
        ids = np.arange(len(S) - 1)
    return _segments(S, M, N, np.asarray(ids, dtype=np.int64), _GAUSS_X, _GAUSS_W, _SAMPLES, dual)


def polyline_gap(S, M, dual: bool = False) -> np.ndarray:
    """Weak gap vector for non-mortar polyline ``S`` against mortar polyline ``M``."""
    S = np.ascontiguousarray(S, dtype=float)
    M = np.ascontiguousarray(M, dtype=float)
    parts, _, _ = _gap_parts(S, M, averaged_normals(M), dual=dual)
    c = np.zeros(len(S))
    c[:-1] += parts[:, 0]
    c[1:] += parts[:, 1]
    return c


@dataclass(frozen=True)
class ContactLinearisation:
    """Gap vector and its Jacobian blocks at one configuration.

    ``D`` has shape ``(m1, d*m1)``, ``M`` has shape ``(m1, d*m2)``; their
    columns follow the polyline vertex order, ``d`` components per vertex.
    ``normals[p]`` is the unit ``n_h`` at the foot point of non-mortar
    vertex ``p``.
    """

    c: np.ndarray
    D: sp.csr_matrix
    M: sp.csr_matrix
    normals: np.ndarray
    flagged: np.ndarray
    nm_dofs: np.ndarray
    m_dofs: np.ndarray
    n_dofs: int

    def jacobian(self) -> sp.csr_matrix:
        """Full ``(m1, n_dofs)`` Jacobian in native DOF numbering."""
        cols = np.concatenate([self.nm_dofs, self.m_dofs])
        blk = sp.hstack([self.D, self.M]).tocoo()
        return sp.csr_matrix((blk.data, (blk.row, cols[blk.col])), shape=(len(self.c), self.n_dofs))


class ContactPair:
    """Non-mortar / mortar boundary pair of a two-body mesh."""

    def __init__(self, mesh: Mesh, fd_step: float = 1e-7, basis: str = "lagrange"):
        if basis not in BASES:
            raise ValueError(f"unknown mortar basis {basis!r}, expected one of {BASES}")
        self.mesh = mesh
        self.basis = basis
        self.dual = basis == "dual"
        self.nm = mesh.polyline(NONMORTAR)
        self.mo = mesh.polyline(MORTAR)
        if len(self.nm) < 2 or len(self.mo) < 2:
            raise DegenerateGeometryError("both contact boundaries need at least one segment")
        ref = np.vstack([mesh.vertices[self.nm], mesh.vertices[self.mo]])
        self.scale = float(np.max(ref.max(axis=0) - ref.min(axis=0)))
        self.h = fd_step * self.scale
        self.nm_dofs = (DIM * self.nm[:, None] + np.arange(DIM)).ravel()
        self.m_dofs = (DIM * self.mo[:, None] + np.arange(DIM)).ravel()

    @property
    def m1(self):
        return len(self.nm)

    @property
    def m2(self):
        return len(self.mo)

    def boundaries(self, z):
        x = np.asarray(z, dtype=float).reshape(-1, DIM)
        return np.ascontiguousarray(x[self.nm]), np.ascontiguousarray(x[self.mo])

    def gap(self, z) -> np.ndarray:
        S, M = self.boundaries(z)
        return polyline_gap(S, M, self.dual)

    def pointwise_gap(self, z, samples: int = 16) -> np.ndarray:
        """Signed gap at ``samples`` equispaced points per non-mortar segment (endpoints included)."""
        S, M = self.boundaries(z)
        t = np.linspace(0.0, 1.0, samples + 1)
        P = (S[:-1, None, :] * (1 - t)[None, :, None] + S[1:, None, :] * t[None, :, None]).reshape(-1, 2)
        return _project_many(np.ascontiguousarray(P), M, averaged_normals(M))[0]

    def linearise(self, z) -> ContactLinearisation:
        S, M = self.boundaries(z)
        N = averaged_normals(M)
        m1, m2, h = self.m1, self.m2, self.h
        base, jump, jr = _gap_parts(S, M, N, dual=self.dual)
        c = np.zeros(m1)
        c[:-1] += base[:, 0]
        c[1:] += base[:, 1]
        flagged = np.zeros(m1, dtype=bool)
        flagged[:-1] |= jump
        flagged[1:] |= jump

        # normals at the foot points of the non-mortar vertices
        _, _, nrm, _, _ = _project_many(S, M, N)
        nlen = np.hypot(nrm[:, 0], nrm[:, 1])
        if np.any(nlen <= 1e-14):
            raise DegenerateGeometryError("vanishing interpolated normal at a foot point")
        normals = nrm / nlen[:, None]

        def column(parts_p, parts_m, ids):
            dc = np.zeros(m1)
            diff = (parts_p - parts_m) / (2 * h)
            np.add.at(dc, ids, diff[:, 0])
            np.add.at(dc, ids + 1, diff[:, 1])
            return dc

        Dd = np.zeros((m1, DIM * m1))
        for q in range(m1):
            ids = np.array([e for e in (q - 1, q) if 0 <= e < m1 - 1], dtype=np.int64)
            for i in range(DIM):
                Sp = S.copy()
                Sp[q, i] += h
                Sm = S.copy()
                Sm[q, i] -= h
                pp, _, _ = _gap_parts(Sp, M, N, ids, self.dual)
                pm, _, _ = _gap_parts(Sm, M, N, ids, self.dual)
                Dd[:, DIM * q + i] = column(pp, pm, ids)

        Md = np.zeros((m1, DIM * m2))
        for r in range(m2):
            touched = (jr[:, 1] >= r - 3) & (jr[:, 0] <= r + 2)
            ids = np.flatnonzero(touched).astype(np.int64)
            if len(ids) == 0:
                continue
            for i in range(DIM):
                Mp = M.copy()
                Mp[r, i] += h
                Mm = M.copy()
                Mm[r, i] -= h
                pp, _, _ = _gap_parts(S, Mp, averaged_normals(Mp), ids, self.dual)
                pm, _, _ = _gap_parts(S, Mm, averaged_normals(Mm), ids, self.dual)
                Md[:, DIM * r + i] = column(pp, pm, ids)

        return ContactLinearisation(c, sp.csr_matrix(Dd), sp.csr_matrix(Md), normals, flagged,
                                    self.nm_dofs, self.m_dofs, self.mesh.n_dofs)


def assemble_gap(mesh: Mesh, z) -> np.ndarray:
    return ContactPair(mesh).gap(z)


def assemble_jacobian(mesh: Mesh, z) -> ContactLinearisation:
    return ContactPair(mesh).linearise(z)
