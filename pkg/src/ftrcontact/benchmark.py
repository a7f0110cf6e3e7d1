"""Two-dimensional ironing benchmark.

A stiff half-disc (body 2, mortar side) is pressed into a soft rectangular
block (body 1, non-mortar side) and then swept across it.  Dimensions:

* block ``[-4, 4] x [-3, 0]``, coarse grid 16 x 6 squares split into
  triangles; bottom fixed, top is the contact boundary, sides free;
* half-disc of radius 2 centred at ``(-1.05, 2)``, flat side up, 16 arc
  segments and 3 rings; the flat side carries the prescribed motion and
  the lower arc is the contact boundary.  Initially the arc touches the
  block in one point.

Phase 1 moves the flat side down by 1.4, phase 2 then moves it right by 2.1.

The non-mortar boundary of each phase is the part of the block top below
the arc's horizontal footprint at the end of that phase (``ZONES``, in
reference coordinates on coarse grid lines).  Block vertices far beside
the pipe would otherwise project onto the steep arc ends, where the
contact normal is nearly tangent to the block surface; such rows make the
non-mortar matrix strongly non-diagonal and ruin its row-sum lumping.
:meth:`IroningBenchmark.uncovered_gap` checks the rest of the block top.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .hyperelastic import DirichletData, MaterialParams, reference_gradients
from .mesh import DIM, DIRICHLET, MORTAR, NEUMANN, NONMORTAR, Mesh, MeshHierarchy, orient_segments
from .mortar import ContactPair
from .problem import ContactProblem

BLOCK = MaterialParams(lam=0.75, mu=0.375)
PIPE = MaterialParams(lam=450.0, mu=225.0)
PRESS = 1.4
SWEEP = 2.1
ZONES = {1: (-3.0, 1.0), 2: (-1.0, 3.0)}


def block_mesh(nx=16, ny=6, x0=-4.0, x1=4.0, y0=-3.0, y1=0.0, contact=(-4.0, 4.0)):
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    verts = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    tris = []
    for j in range(ny):
        for i in range(nx):
            a, b, c, d = idx[j, i], idx[j, i + 1], idx[j + 1, i + 1], idx[j + 1, i]
            # alternate diagonals to avoid a directional bias
            if (i + j) % 2 == 0:
                tris += [(a, b, c), (a, c, d)]
            else:
                tris += [(a, b, d), (b, c, d)]
    segs, marks = [], []
    for i in range(nx):
        segs.append((idx[0, i], idx[0, i + 1])); marks.append(DIRICHLET)
        segs.append((idx[ny, i], idx[ny, i + 1]))
        inside = contact[0] - 1e-12 <= xs[i] and xs[i + 1] <= contact[1] + 1e-12
        marks.append(NONMORTAR if inside else NEUMANN)
    for j in range(ny):
        segs.append((idx[j, 0], idx[j + 1, 0])); marks.append(NEUMANN)
        segs.append((idx[j, nx], idx[j + 1, nx])); marks.append(NEUMANN)
    return verts, np.array(tris), np.array(segs), marks


def half_disc_mesh(center=(-1.05, 2.0), radius=2.0, n_arc=16, n_rings=3):
    cx, cy = center
    ang = np.pi + np.pi * np.arange(n_arc + 1) / n_arc
    verts = [(cx, cy)]
    ring = []
    for r in range(1, n_rings + 1):
        rad = radius * r / n_rings
        ring.append(len(verts) + np.arange(n_arc + 1))
        verts += [(cx + rad * np.cos(t), cy + rad * np.sin(t)) for t in ang]
    # the arc endpoints must lie exactly on the flat side
    verts = np.array(verts)
    for rr in ring:
        verts[rr[[0, -1]], 1] = cy
    tris = [(0, ring[0][k], ring[0][k + 1]) for k in range(n_arc)]
    for r in range(n_rings - 1):
        a, b = ring[r], ring[r + 1]
        for k in range(n_arc):
            tris += [(a[k], b[k], b[k + 1]), (a[k], b[k + 1], a[k + 1])]
    outer = ring[-1]
    segs = [(outer[k], outer[k + 1]) for k in range(n_arc)]
    marks = [MORTAR] * n_arc
    top = [r[0] for r in ring[::-1]] + [0] + [r[-1] for r in ring]
    segs += [(top[k], top[k + 1]) for k in range(len(top) - 1)]
    marks += [DIRICHLET] * (len(top) - 1)
    return verts, np.array(tris), np.array(segs), marks


def ironing_mesh(nx=16, ny=6, n_arc=16, n_rings=3, center=(-1.05, 2.0), radius=2.0,
                 contact=(-4.0, 4.0)) -> Mesh:
    bv, bt, bs, bm = block_mesh(nx, ny, contact=contact)
    pv, pt, ps, pm = half_disc_mesh(center, radius, n_arc, n_rings)
    off = len(bv)
    verts = np.vstack([bv, pv])
    tris = np.vstack([bt, pt + off])
    p = verts[tris]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    neg = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0] < 0
    tris[neg] = tris[neg][:, [0, 2, 1]]
    segs = orient_segments(tris, np.vstack([bs, ps + off]))
    body = np.concatenate([np.ones(len(bt), int), np.full(len(pt), 2)])
    mesh = Mesh(verts, tris, segs, list(bm) + list(pm), body)
    mesh.validate()
    return mesh


def restrict_nonmortar(mesh: Mesh, zone) -> Mesh:
    """Copy of ``mesh`` whose non-mortar segments outside ``zone`` become Neumann.

    ``zone = (x0, x1)`` bounds the reference x-coordinates of both segment
    endpoints.
    """
    x0, x1 = zone
    x = mesh.vertices[:, 0]
    tol = 1e-9 * max(1.0, float(np.abs(x).max()))
    markers = list(mesh.markers)
    for i, (a, b) in enumerate(mesh.segments):
        if markers[i] != NONMORTAR:
            continue
        if min(x[a], x[b]) < x0 - tol or max(x[a], x[b]) > x1 + tol:
            markers[i] = NEUMANN
    if NONMORTAR not in markers:
        raise ValueError(f"contact zone {zone} contains no non-mortar segment")
    out = Mesh(mesh.vertices, mesh.triangles, mesh.segments, markers, mesh.body)
    out.validate()
    return out


def laplace_matrix(mesh: Mesh) -> sp.csr_matrix:
    G, area = reference_gradients(mesh)
    Ke = area[:, None, None] * np.einsum("eaj,ebj->eab", G, G)
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    return sp.csr_matrix((Ke.ravel(), (rows, cols)), shape=(mesh.n_vertices,) * 2)


def harmonic_extension(mesh: Mesh, vertices, values) -> np.ndarray:
    """Displacement field, harmonic per component, matching ``values`` on ``vertices``.

    Returns an interleaved block vector.  A body whose prescribed values are
    all equal is translated rigidly.
    """
    vertices = np.asarray(vertices, dtype=np.int64)
    values = np.asarray(values, dtype=float).reshape(len(vertices), DIM)
    L = laplace_matrix(mesh).tocsr()
    n = mesh.n_vertices
    fixed = np.zeros(n, dtype=bool)
    fixed[vertices] = True
    free = np.flatnonzero(~fixed)
    out = np.zeros((n, DIM))
    out[vertices] = values
    if len(free):
        lu = spla.splu(L[free][:, free].tocsc())
        rhs = -(L[free][:, vertices] @ values)
        out[free] = lu.solve(np.asarray(rhs))
    return out.ravel()


@dataclass
class IroningBenchmark:
    """Geometry, hierarchy and phase data of the ironing benchmark.

    ``refine`` counts uniform refinements of the coarse mesh; the multigrid
    hierarchy uses all levels.
    """

    refine: int = 1
    press: float = PRESS
    sweep: float = SWEEP
    block: MaterialParams = BLOCK
    pipe: MaterialParams = PIPE
    coarse: Mesh = field(default=None)
    basis: str = "dual"
    zones: dict = field(default_factory=lambda: dict(ZONES))

    def __post_init__(self):
        if self.refine < 0:
            raise ValueError("refinement level must be non-negative")
        if self.coarse is None:
            self.coarse = ironing_mesh()
        self.hierarchy = MeshHierarchy.uniform(self.coarse, self.refine)
        self.mesh = self.hierarchy.finest
        self.params = {1: self.block, 2: self.pipe}
        vb = self.mesh.vertex_body()
        dv = self.mesh.marked_vertices(DIRICHLET)
        self.block_fixed = dv[vb[dv] == 1]
        self.pipe_fixed = dv[vb[dv] == 2]
        self.fixed_vertices = np.concatenate([self.block_fixed, self.pipe_fixed])
        self._phase_meshes = {}

    def phase_mesh(self, phase: int) -> Mesh:
        """Finest mesh with the non-mortar marker restricted to the phase's zone."""
        if phase not in self._phase_meshes:
            zone = self.zones.get(phase) if self.zones else None
            if zone is None:
                self._phase_meshes[phase] = self.mesh
            else:
                self._phase_meshes[phase] = restrict_nonmortar(self.mesh, zone)
        return self._phase_meshes[phase]

    def pipe_offset(self, phase: int) -> np.ndarray:
        if phase == 1:
            return np.array([0.0, -self.press])
        if phase == 2:
            return np.array([self.sweep, -self.press])
        raise ValueError(f"unknown phase {phase}")

    def dirichlet(self, phase: int) -> DirichletData:
        disp = np.zeros((len(self.fixed_vertices), DIM))
        disp[len(self.block_fixed):] = self.pipe_offset(phase)
        vals = self.mesh.vertices[self.fixed_vertices] + disp
        dofs = (DIM * self.fixed_vertices[:, None] + np.arange(DIM)).ravel()
        return DirichletData(dofs, vals.ravel())

    def problem(self, phase: int) -> ContactProblem:
        P = self.hierarchy.block_prolongations(DIM)
        return ContactProblem(self.phase_mesh(phase), self.params, self.dirichlet(phase), P, basis=self.basis)

    def uncovered_gap(self, z, phase: int, samples: int = 4) -> np.ndarray:
        """Pointwise gap against the arc on the block top outside the phase's zone.

        Complements the weak gap of a phase, which only covers its zone.
        Empty when the zone is the whole top.
        """
        pair = ContactPair(self.mesh, basis=self.basis)
        g = pair.pointwise_gap(z, samples).reshape(len(pair.nm) - 1, samples + 1)
        inside = set(self.phase_mesh(phase).marked_vertices(NONMORTAR).tolist())
        seg_out = np.array([not (a in inside and b in inside) for a, b in zip(pair.nm[:-1], pair.nm[1:])])
        return g[seg_out].ravel()

    def initial_guess(self, phase: int, z_prev=None, resolve_penetration: bool = True) -> np.ndarray:
        """Start for ``phase`` from the previous state ``z_prev``.

        The Dirichlet increment is extended harmonically (the pipe moves
        rigidly).  With ``resolve_penetration`` the non-mortar vertices that
        end up inside the pipe are then pushed vertically onto its surface
        and that push is extended harmonically into the block.  The push is
        halved until no element is inverted; what penetration remains is
        left to the solver.
        """
        z_prev = self.mesh.identity() if z_prev is None else np.asarray(z_prev, dtype=float)
        target = self.dirichlet(phase)
        inc = (target.values - z_prev[target.dofs]).reshape(-1, DIM)
        z = target.apply(z_prev + harmonic_extension(self.mesh, self.fixed_vertices, inc))
        if resolve_penetration:
            z = self._push_out(z, phase)
        return z

    def _push_out(self, z, phase):
        mesh = self.phase_mesh(phase)
        nm = mesh.polyline(NONMORTAR)
        x = z.reshape(-1, DIM)
        S = x[nm]
        M = x[mesh.polyline(MORTAR)]
        order = np.argsort(M[:, 0])
        mx, my = M[order, 0], M[order, 1]
        within = (S[:, 0] > mx[0]) & (S[:, 0] < mx[-1])
        arc = np.interp(S[:, 0], mx, my)
        inside = within & (S[:, 1] > arc)
        if not inside.any():
            return z
        vb = mesh.vertex_body()
        held = np.concatenate([self.block_fixed, nm[inside], np.flatnonzero(vb == 2)])
        vals = np.zeros((len(held), DIM))
        vals[len(self.block_fixed):len(self.block_fixed) + inside.sum(), 1] = arc[inside] - S[inside, 1]
        push = harmonic_extension(mesh, held, vals)
        for _ in range(20):
            if oriented(mesh, z + push):
                return z + push
            push *= 0.5
        return z

    def run(self, phases=(1, 2), config=None, callback=None):
        """Solve the phases in order, each warm-started from the previous one."""
        from .filter import ftr_solve

        results = []
        z = None
        done = 0
        for phase in phases:
            # a phase-2 run without phase 1 starts from the pressed rigid position
            for ph in range(done + 1, phase):
                z = self.initial_guess(ph, z)
            prob = self.problem(phase)
            z0 = self.initial_guess(phase, z)
            res = ftr_solve(prob, z0, config, callback)
            results.append((phase, prob, res))
            z = res.z
            done = phase
            if not res.converged:
                break
        return results


def oriented(mesh: Mesh, z) -> bool:
    """True when every deformed triangle keeps a positive orientation."""
    x = np.asarray(z, dtype=float).reshape(-1, DIM)[mesh.triangles]
    e1, e2 = x[:, 1] - x[:, 0], x[:, 2] - x[:, 0]
    return bool(np.all(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0] > 0))
