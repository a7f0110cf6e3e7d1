"""Shared fixtures: small two-body meshes and deformation helpers."""

from __future__ import annotations

import numpy as np
import pytest

from ftrcontact.hyperelastic import DirichletData, MaterialParams
from ftrcontact.mesh import DIRICHLET, MORTAR, NEUMANN, NONMORTAR, Mesh, orient_segments


def grid(x0, x1, y0, y1, nx, ny):
    """Structured triangulation of a rectangle; returns vertices, triangles and side segments."""
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    verts = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    tris = []
    for j in range(ny):
        for i in range(nx):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            tris += [(a, b, c), (a, c, d)]
    sides = {
        "bottom": [(vid(i, 0), vid(i + 1, 0)) for i in range(nx)],
        "top": [(vid(i, ny), vid(i + 1, ny)) for i in range(nx)],
        "left": [(vid(0, j), vid(0, j + 1)) for j in range(ny)],
        "right": [(vid(nx, j), vid(nx, j + 1)) for j in range(ny)],
    }
    return verts, np.array(tris), sides


def two_blocks(gap=0.1, shift=0.0, n1=(4, 2), n2=(6, 2), lower=(0.0, 1.0), upper=(-0.25, 1.25)):
    """Lower block (body 1, non-mortar top) below an upper block (body 2, mortar bottom).

    The lower block spans ``lower`` in x and ``[-1, 0]`` in y; the upper
    block spans ``upper`` shifted by ``shift`` in x and ``[gap, gap + 0.5]``
    in y.  Bottom of body 1 and top of body 2 are Dirichlet.
    """
    v1, t1, s1 = grid(lower[0], lower[1], -1.0, 0.0, *n1)
    v2, t2, s2 = grid(upper[0] + shift, upper[1] + shift, gap, gap + 0.5, *n2)
    off = len(v1)
    verts = np.vstack([v1, v2])
    tris = np.vstack([t1, t2 + off])
    segs, marks = [], []
    for name, marker in (("bottom", DIRICHLET), ("top", NONMORTAR), ("left", NEUMANN), ("right", NEUMANN)):
        segs += s1[name]
        marks += [marker] * len(s1[name])
    for name, marker in (("top", DIRICHLET), ("bottom", MORTAR), ("left", NEUMANN), ("right", NEUMANN)):
        segs += [(a + off, b + off) for a, b in s2[name]]
        marks += [marker] * len(s2[name])
    segs = orient_segments(tris, np.array(segs))
    body = np.concatenate([np.ones(len(t1), int), np.full(len(t2), 2)])
    mesh = Mesh(verts, tris, segs, marks, body)
    mesh.validate()
    return mesh


SOFT = MaterialParams(lam=0.75, mu=0.375)
STIFF = MaterialParams(lam=4.0, mu=2.0)
PARAMS = {1: SOFT, 2: STIFF}


def dirichlet_of(mesh, z=None):
    """Dirichlet data holding the Dirichlet vertices at their positions in ``z``."""
    z = mesh.identity() if z is None else np.asarray(z)
    v = mesh.marked_vertices(DIRICHLET)
    dofs = (2 * v[:, None] + np.arange(2)).ravel()
    return DirichletData(dofs, z[dofs])


def random_state(mesh, rng, amplitude=0.05):
    """Smooth random perturbation of the identity that keeps every triangle positive."""
    X = mesh.vertices
    a = rng.uniform(-1, 1, size=(2, 6))
    u = np.column_stack([
        a[0, 0] * np.sin(X[:, 0] + a[0, 1]) * np.cos(X[:, 1] * a[0, 2]) + a[0, 3] * X[:, 0] * X[:, 1]
        + a[0, 4] * X[:, 1] + a[0, 5],
        a[1, 0] * np.cos(X[:, 0] * a[1, 1]) * np.sin(X[:, 1] + a[1, 2]) + a[1, 3] * X[:, 0] ** 2
        + a[1, 4] * X[:, 0] + a[1, 5],
    ])
    z = (X + amplitude * u).ravel()
    p = z.reshape(-1, 2)[mesh.triangles]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    assert np.all(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0] > 0)
    return z


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def flat_pair():
    return two_blocks()
