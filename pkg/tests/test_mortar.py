import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_state, two_blocks
from ftrcontact.mesh import MORTAR, NONMORTAR
from ftrcontact.mortar import (ContactPair, DegenerateGeometryError, assemble_gap, averaged_normals,
                               closest_point, polyline_gap)

# -- independent oracle: brute-force projection and composite Gauss-Legendre ----------

_GX, _GW = np.polynomial.legendre.leggauss(6)


def oracle_gap_at(s, M, N):
    best = (np.inf, None, None)
    for j in range(len(M) - 1):
        a, b = M[j], M[j + 1]
        e = b - a
        t = np.clip(np.dot(s - a, e) / np.dot(e, e), 0.0, 1.0)
        d = np.sum((s - (a + t * e)) ** 2)
        if d < best[0]:
            best = (d, j, t)
    _, j, t = best
    foot = M[j] + t * (M[j + 1] - M[j])
    n = (1 - t) * N[j] + t * N[j + 1]
    return float(n @ (s - foot))


def oracle_weak_gap(S, M, pieces=300, dual=False):
    N = averaged_normals(M)
    c = np.zeros(len(S))
    for e in range(len(S) - 1):
        a, b = S[e], S[e + 1]
        L = np.linalg.norm(b - a)
        for k in range(pieces):
            t = (k + 0.5 * (_GX + 1)) / pieces
            w = _GW / (2 * pieces) * L
            g = np.array([oracle_gap_at(a + ti * (b - a), M, N) for ti in t])
            if dual:
                c[e] += np.sum(w * g * (2 - 3 * t))
                c[e + 1] += np.sum(w * g * (3 * t - 1))
            else:
                c[e] += np.sum(w * g * (1 - t))
                c[e + 1] += np.sum(w * g * t)
    return c


def arc(center, radius, a0, a1, n):
    phi = np.linspace(a0, a1, n + 1)
    return np.column_stack([center[0] + radius * np.cos(phi), center[1] + radius * np.sin(phi)])


# -- normals -----------------------------------------------------------------------

def test_straight_line_normals():
    N = averaged_normals([[0, 0], [1, 0], [2, 0], [3, 0]])
    assert np.allclose(N, [[0, -1]] * 4)


def test_corner_normal_is_normalised_sum():
    N = averaged_normals([[0, 0], [1, 0], [1, -1]])
    assert np.allclose(N[1], np.array([-1, -1]) / np.sqrt(2))
    assert np.allclose(N[0], [0, -1]) and np.allclose(N[2], [-1, 0])


def test_opposite_normals_and_zero_segments_are_degenerate():
    with pytest.raises(DegenerateGeometryError):
        averaged_normals([[0, 0], [1, 0], [0, 0]])
    with pytest.raises(DegenerateGeometryError):
        averaged_normals([[0, 0], [0, 0], [1, 0]])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(0.1, 1.0), st.floats(-0.7, 0.7)), min_size=1, max_size=8))
def test_averaged_normals_are_unit(steps):
    P = np.cumsum(np.vstack([[0, 0], steps]), axis=0)
    assert np.allclose(np.linalg.norm(averaged_normals(P), axis=1), 1.0)


# -- closest point -------------------------------------------------------------------

def test_closest_point_above_and_below_segment():
    M = np.array([[1.0, 0.0], [0.0, 0.0]])      # outward normal (0, 1)
    r = closest_point([0.5, 0.3], M)
    assert np.allclose(r.foot, [0.5, 0.0]) and r.gap == pytest.approx(0.3)
    assert closest_point([0.5, -0.2], M).gap == pytest.approx(-0.2)


def test_closest_point_beyond_endpoint_matches_dense_sampling():
    M = arc((0, 2), 2.0, -2.5, -0.6, 7)
    N = averaged_normals(M)
    dense = np.vstack([M[j] + np.linspace(0, 1, 2001)[:, None] * (M[j + 1] - M[j]) for j in range(len(M) - 1)])
    for s in ([-3.0, -0.5], [2.5, 1.2], [0.3, 0.4]):
        r = closest_point(s, M)
        k = np.argmin(np.linalg.norm(dense - s, axis=1))
        assert np.linalg.norm(r.foot - dense[k]) < 2e-3
        assert r.gap == pytest.approx(oracle_gap_at(np.array(s, float), M, N), abs=1e-12)


# -- weak gap ------------------------------------------------------------------------

@pytest.mark.parametrize("dual", [False, True])
@pytest.mark.parametrize("g0", [0.3, 0.0, -0.15])
def test_flat_on_flat_gap_is_half_g0(dual, g0):
    S = np.array([[1.0, 0.0], [0.0, 0.0]])
    M = np.array([[-0.5, g0], [1.5, g0]])
    c = polyline_gap(S, M, dual)
    assert np.allclose(c, [g0 / 2, g0 / 2], atol=1e-15)
    assert np.allclose(c, oracle_weak_gap(S, M, 20, dual), atol=1e-14)


@pytest.mark.parametrize("dual", [False, True])
@pytest.mark.parametrize("seed", range(3))
def test_curved_gap_matches_quadrature_oracle(dual, seed):
    rng = np.random.default_rng(seed)
    x = np.sort(rng.uniform(-1.5, 1.5, 6))[::-1]
    S = np.column_stack([x, 0.05 * rng.normal(size=6)])
    M = arc((rng.uniform(-0.3, 0.3), 2.0 + rng.uniform(-0.1, 0.1)), 2.0, -2.6, -0.55, 9)
    c = polyline_gap(S, M, dual)
    assert np.allclose(c, oracle_weak_gap(S, M, 300, dual), atol=1e-6)


def test_touching_bodies_have_zero_gap():
    mesh = two_blocks(gap=0.0)
    assert np.abs(assemble_gap(mesh, mesh.identity())).max() < 1e-15


def test_uniform_penetration_flips_sign_of_weights():
    sep = ContactPair(two_blocks(gap=0.1)).gap(two_blocks(gap=0.1).identity())
    mesh = two_blocks(gap=-0.1)
    pen = ContactPair(mesh).gap(mesh.identity())
    assert np.allclose(pen, -sep, atol=1e-15)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(-0.08, 0.08), st.floats(-0.3, 0.3))
def test_dual_and_lagrange_rows_have_equal_sum(seed, gap, shift):
    mesh = two_blocks(gap=gap, shift=shift)
    z = random_state(mesh, np.random.default_rng(seed), 0.03)
    lag = ContactPair(mesh).gap(z)
    dual = ContactPair(mesh, basis="dual").gap(z)
    assert lag.sum() == pytest.approx(dual.sum(), abs=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(-0.06, 0.06))
def test_negative_gap_detected_iff_some_sample_penetrates(seed, gap):
    mesh = two_blocks(gap=gap)
    z = random_state(mesh, np.random.default_rng(seed), 0.02)
    pair = ContactPair(mesh)
    c = pair.gap(z)
    g = pair.pointwise_gap(z, 64)
    if (c < -1e-12).any():
        assert g.min() < 0
    if g.min() < -1e-3:
        assert (c < 0).any()


def test_unknown_basis_rejected():
    with pytest.raises(ValueError):
        ContactPair(two_blocks(), basis="quadratic")


# -- Jacobian -----------------------------------------------------------------------

def contact_state(seed, gap=0.02):
    mesh = two_blocks(gap=gap, shift=0.1 * seed - 0.1)
    return mesh, random_state(mesh, np.random.default_rng(seed), 0.04)


@pytest.mark.parametrize("basis", ["lagrange", "dual"])
@pytest.mark.parametrize("seed", range(3))
def test_jacobian_matches_directional_differences(basis, seed):
    mesh, z = contact_state(seed)
    pair = ContactPair(mesh, basis=basis)
    lin = pair.linearise(z)
    J = lin.jacobian()
    rng = np.random.default_rng(100 + seed)
    h = 1e-6
    for _ in range(5):
        v = rng.normal(size=mesh.n_dofs)
        fd = (pair.gap(z + h * v) - pair.gap(z - h * v)) / (2 * h)
        assert np.linalg.norm(J @ v - fd) <= 1e-4 * np.linalg.norm(fd)


def test_jacobian_columns_restricted_to_contact_dofs():
    mesh, z = contact_state(1)
    lin = ContactPair(mesh).linearise(z)
    cols = np.unique(lin.jacobian().tocoo().col)
    allowed = np.concatenate([lin.nm_dofs, lin.m_dofs])
    assert np.isin(cols, allowed).all()
    assert lin.D.shape == (len(lin.c), 2 * len(lin.c))
    assert lin.M.shape == (len(lin.c), len(lin.m_dofs))


@pytest.mark.parametrize("basis", ["lagrange", "dual"])
def test_normal_translation_row_sums_reproduce_gap_weights(basis):
    mesh = two_blocks(gap=0.05)
    pair = ContactPair(mesh, basis=basis)
    lin = pair.linearise(mesh.identity())
    up = np.tile([0.0, 1.0], pair.m1)           # non-mortar body moves towards the mortar side
    weights = lin.c / 0.05                      # uniform gap: c = g0 * (integral of the test function)
    assert np.allclose(lin.D @ up, -weights, atol=1e-7)


def test_tangential_mortar_translation_leaves_interior_rows_unchanged():
    mesh = two_blocks(gap=0.05)
    pair = ContactPair(mesh)
    lin = pair.linearise(mesh.identity())
    side = np.tile([1.0, 0.0], pair.m2)
    assert np.abs((lin.M @ side)[1:-1]).max() < 1e-7


def test_nonmortar_polyline_matches_markers():
    mesh = two_blocks()
    pair = ContactPair(mesh)
    assert set(pair.nm.tolist()) == set(mesh.marked_vertices(NONMORTAR).tolist())
    assert set(pair.mo.tolist()) == set(mesh.marked_vertices(MORTAR).tolist())
