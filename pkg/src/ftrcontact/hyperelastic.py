"""Neo-Hookean energy, gradient and Hessian on P1 triangles.

The stored energy density is

    W(F) = lam/4 (det F^2 - 1) - (lam/2 + mu) log det F + mu tr E,
    E = (F^T F - I) / 2,

integrated with one point per triangle (exact, F is element-wise constant).
Configurations with ``det F <= 0`` in any element have energy ``inf``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .mesh import DIM, Mesh


class OrientationError(ArithmeticError):
    """Raised when a derivative is requested at an orientation-violating state."""


@dataclass(frozen=True)
class MaterialParams:
    lam: float
    mu: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not self.lam >= 0:
            raise ValueError("lambda must be non-negative")


@dataclass(frozen=True)
class DirichletData:
    """Fixed DOFs (native numbering) and their prescribed values."""

    dofs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dofs", np.asarray(self.dofs, dtype=np.int64))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    def apply(self, z):
        z = np.array(z, dtype=float)
        z[self.dofs] = self.values
        return z

    def mask(self, n):
        m = np.zeros(n, dtype=bool)
        m[self.dofs] = True
        return m


def density(F, lam, mu):
    """Energy density W for a stack of deformation gradients ``(..., 2, 2)``."""
    J = np.linalg.det(F)
    with np.errstate(invalid="ignore", divide="ignore"):
        logJ = np.log(np.where(J > 0, J, np.nan))
    trE = 0.5 * (np.einsum("...ij,...ij->...", F, F) - F.shape[-1])
    return 0.25 * lam * (J * J - 1) - (0.5 * lam + mu) * logJ + mu * trE


def reference_gradients(mesh: Mesh):
    """Gradients of the barycentric basis, shape ``(nt, 3, 2)``, and areas."""
    p = mesh.vertices[mesh.triangles]
    B = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)   # columns are edges
    Binv = np.linalg.inv(B)
    G = np.empty((len(p), 3, 2))
    G[:, 1:] = Binv
    G[:, 0] = -Binv.sum(axis=1)
    area = 0.5 * np.linalg.det(B)
    return G, area


def load_vector(mesh: Mesh, volume_force=None, traction=None) -> np.ndarray:
    """P1 load vector for per-body constant volume forces and per-marker tractions.

    ``volume_force`` maps body id -> force density vector, ``traction`` maps
    boundary marker -> traction vector.
    """
    b = np.zeros((mesh.n_vertices, DIM))
    if volume_force:
        area = mesh.areas()
        for body, f in volume_force.items():
            sel = mesh.body == body
            w = np.repeat(area[sel] / 3.0, 3)
            np.add.at(b, mesh.triangles[sel].ravel(), w[:, None] * np.asarray(f, float))
    if traction:
        for marker, t in traction.items():
            segs = mesh.marked_segments(marker)
            if len(segs) == 0:
                continue
            L = np.linalg.norm(mesh.vertices[segs[:, 1]] - mesh.vertices[segs[:, 0]], axis=1)
            w = np.repeat(L / 2.0, 2)
            np.add.at(b, segs.ravel(), w[:, None] * np.asarray(t, float))
    return b.ravel()


@dataclass
class Elasticity:
    """Assembler for the algebraic energy ``J(z) = sum_T |T| W(F_T) - b.z``.

    ``params`` maps body id to :class:`MaterialParams`.  When ``dirichlet``
    is given, gradient rows of fixed DOFs are zeroed and the Hessian carries
    identity rows/columns there.
    """

    mesh: Mesh
    params: dict
    loads: np.ndarray | None = None
    dirichlet: DirichletData | None = None
    _G: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mesh = self.mesh
        self._G, self._area = reference_gradients(mesh)
        self._lam = np.array([self.params[b].lam for b in mesh.body], dtype=float)
        self._mu = np.array([self.params[b].mu for b in mesh.body], dtype=float)
        tri = mesh.triangles
        self._edofs = (DIM * tri[:, :, None] + np.arange(DIM)).reshape(len(tri), -1)   # (nt, 6)
        nd = DIM * 3
        rows = np.repeat(self._edofs, nd, axis=1).ravel()
        cols = np.tile(self._edofs, (1, nd)).ravel()
        # map every element entry to its slot in the csr data array
        coo_sorted = sp.coo_matrix((np.ones(rows.size), (rows, cols)),
                                   shape=(mesh.n_dofs, mesh.n_dofs)).tocsr()
        coo_sorted.sum_duplicates()
        coo_sorted.sort_indices()
        self._indptr = coo_sorted.indptr
        self._indices = coo_sorted.indices
        key = rows.astype(np.int64) * mesh.n_dofs + cols
        csr_rows = np.repeat(np.arange(mesh.n_dofs), np.diff(self._indptr))
        csr_key = csr_rows.astype(np.int64) * mesh.n_dofs + self._indices
        self._slot = np.searchsorted(csr_key, key)
        self._fixed = np.zeros(mesh.n_dofs, dtype=bool)
        if self.dirichlet is not None:
            self._fixed[self.dirichlet.dofs] = True

    # -- kinematics -----------------------------------------------------
    def deformation_gradients(self, z):
        za = np.asarray(z, dtype=float).reshape(-1, DIM)[self.mesh.triangles]   # (nt, 3, 2)
        return np.einsum("eai,eaj->eij", za, self._G)

    def orientation_feasible(self, z) -> bool:
        return bool(np.all(np.linalg.det(self.deformation_gradients(z)) > 0))

    # -- energy ---------------------------------------------------------
    def energy(self, z) -> float:
        F = self.deformation_gradients(z)
        if not np.all(np.linalg.det(F) > 0):
            return float("inf")
        W = density(F, self._lam, self._mu)
        val = float(np.dot(self._area, W))
        if self.loads is not None:
            val -= float(np.dot(self.loads, z))
        return val

    def _checked(self, z):
        F = self.deformation_gradients(z)
        J = np.linalg.det(F)
        if not np.all(J > 0):
            bad = int(np.argmin(J))
            raise OrientationError(f"element {bad} has det F = {J[bad]:.3e}")
        return F, J, np.linalg.inv(F)

    def gradient(self, z) -> np.ndarray:
        F, J, Finv = self._checked(z)
        X = np.einsum("eaj,eji->eai", self._G, Finv)
        FG = np.einsum("eij,eaj->eai", F, self._G)
        coef = 0.5 * self._lam * (J * J - 1) - self._mu
        ge = self._area[:, None, None] * (coef[:, None, None] * X + self._mu[:, None, None] * FG)
        g = np.bincount(self._edofs.ravel(), weights=ge.ravel(), minlength=self.mesh.n_dofs)
        if self.loads is not None:
            g = g - self.loads
        g[self._fixed] = 0.0
        return g

    def element_hessians(self, z) -> np.ndarray:
        F, J, Finv = self._checked(z)
        X = np.einsum("eaj,eji->eai", self._G, Finv)
        GG = np.einsum("eaj,ebj->eab", self._G, self._G)
        lam, mu = self._lam, self._mu
        c1 = lam * J * J
        c2 = 0.5 * lam + mu - 0.5 * lam * J * J
        K = (c1[:, None, None, None, None] * np.einsum("eai,ebk->eaibk", X, X)
             + c2[:, None, None, None, None] * np.einsum("ebi,eak->eaibk", X, X)
             + mu[:, None, None, None, None] * np.einsum("eab,ik->eaibk", GG, np.eye(DIM)))
        return self._area[:, None, None] * K.reshape(len(F), 3 * DIM, 3 * DIM)

    def hessian(self, z) -> sp.csr_matrix:
        Ke = self.element_hessians(z)
        data = np.bincount(self._slot, weights=Ke.ravel(), minlength=len(self._indices))
        H = sp.csr_matrix((data, self._indices.copy(), self._indptr.copy()),
                          shape=(self.mesh.n_dofs, self.mesh.n_dofs))
        if self._fixed.any():
            H = apply_dirichlet_rows(H, self._fixed)
        return H


def apply_dirichlet_rows(H, fixed_mask) -> sp.csr_matrix:
    """Replace rows and columns of fixed DOFs by those of the identity."""
    keep = sp.diags((~fixed_mask).astype(float))
    H = (keep @ H @ keep).tocsr()
    H = H + sp.diags(fixed_mask.astype(float))
    H.eliminate_zeros()
    return H.tocsr()


def energy(mesh, z, params, loads=None) -> float:
    return Elasticity(mesh, params, loads).energy(z)


def gradient(mesh, z, params, loads=None, dirichlet=None) -> np.ndarray:
    return Elasticity(mesh, params, loads, dirichlet).gradient(z)


def hessian(mesh, z, params, dirichlet=None) -> sp.csr_matrix:
    return Elasticity(mesh, params, None, dirichlet).hessian(z)


def h1_matrix(mesh: Mesh) -> sp.csr_matrix:
    """Block (stiffness + mass) matrix of the reference mesh, for H1 norms."""
    G, area = reference_gradients(mesh)
    Ke = area[:, None, None] * np.einsum("eaj,ebj->eab", G, G)
    Me = area[:, None, None] * (np.ones((3, 3)) + np.eye(3)) / 12.0
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    A = sp.csr_matrix(((Ke + Me).ravel(), (rows, cols)), shape=(mesh.n_vertices,) * 2)
    return sp.kron(A, sp.identity(DIM), format="csr")
