"""Basis change that turns linearised mortar constraints into bounds.

With ``D O = (D_N | D_T)`` split into the normal and tangential columns of
the rotated non-mortar Jacobian, the transformation is

    T = [[O K, -O L, 0], [0, I, 0], [0, 0, I]],
    K = [[-D_N^-1, -D_N^-1 D_T], [0, I]],   L = [[D_N^-1 M], [0]],

and in coordinates ``u~ = T^-1 u`` the constraint ``grad c . u + c >= 0``
reads ``u~_N <= c``.  The lumped variant replaces ``D_N`` by its row-sum
diagonal and is only used to transform Hessians.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mortar import ContactLinearisation

COND_LIMIT = 1e12


class SingularTransformError(ArithmeticError):
    def __init__(self, msg, row=None):
        super().__init__(msg)
        self.row = row


def householder_blocks(normals) -> np.ndarray:
    """Orthogonal blocks ``O_p`` with ``O_p e_1 = n_p``, shape ``(m, d, d)``."""
    n = np.asarray(normals, dtype=float)
    m, d = n.shape
    e1 = np.zeros(d)
    e1[0] = 1.0
    v = e1 - n
    # 1 - n_0 cancels for normals close to e_1; for unit n it equals |n_tail|^2 / (1 + n_0)
    pos = n[:, 0] > 0
    v[pos, 0] = np.einsum("pi,pi->p", n[pos, 1:], n[pos, 1:]) / (1.0 + n[pos, 0])
    vv = np.einsum("pi,pi->p", v, v)
    O = np.broadcast_to(np.eye(d), (m, d, d)).copy()
    move = vv > 1e-30
    O[move] -= 2.0 * np.einsum("pi,pj->pij", v[move], v[move]) / vv[move, None, None]
    return O


def _selectors(m1, d):
    rows_n = d * np.arange(m1)
    SN = sp.csr_matrix((np.ones(m1), (rows_n, np.arange(m1))), shape=(d * m1, m1))
    tang = (d * np.arange(m1)[:, None] + 1 + np.arange(d - 1)).ravel()
    ST = sp.csr_matrix((np.ones(len(tang)), (tang, np.arange(len(tang)))), shape=(d * m1, (d - 1) * m1))
    return SN, ST


class DecouplingTransform:
    """Transformation built from one :class:`ContactLinearisation`.

    Gradient transformation and coordinate changes always use the exact
    ``D_N`` through a sparse LU factorisation.  ``lumped`` selects the
    Hessian path only.
    """

    def __init__(self, lin: ContactLinearisation, lumped: bool = True, normals=None):
        self.lin = lin
        self.lumped = lumped
        self.n = lin.n_dofs
        self.m1 = len(lin.c)
        self.d = len(lin.nm_dofs) // self.m1
        self.m2 = len(lin.m_dofs) // self.d
        d, m1 = self.d, self.m1
        nrm = lin.normals if normals is None else np.asarray(normals, dtype=float)
        self.O = householder_blocks(nrm)
        self.Oblk = sp.block_diag(list(self.O), format="csr")
        DO = (lin.D @ self.Oblk).tocsc()
        cols = np.arange(d * m1)
        self.DN = DO[:, cols % d == 0].tocsc()
        self.DT = DO[:, cols % d != 0].tocsr()
        self.M = lin.M.tocsr()

        diag = np.asarray(self.DN.sum(axis=1)).ravel()
        if lumped:
            bad = np.flatnonzero(np.abs(diag) <= 1e-14 * max(1.0, np.abs(diag).max(initial=0.0)))
            if len(bad):
                raise SingularTransformError(f"zero lumped non-mortar entry in row {bad[0]}", int(bad[0]))
        self.DN_lumped = diag

        dense = self.DN.toarray()
        cond = np.linalg.cond(dense) if m1 else 1.0
        if not np.isfinite(cond) or cond > COND_LIMIT:
            _, _, ut = np.linalg.svd(dense.T)
            row = int(np.argmax(np.abs(ut[-1])))
            raise SingularTransformError(f"non-mortar matrix singular (cond {cond:.2e}), row {row}", row)
        self.cond = cond
        self._lu = spla.splu(self.DN.tocsc())
        self._dense_inv = None

    # -- small solves ------------------------------------------------------
    def _solve(self, rhs, trans=False):
        x = self._lu.solve(np.asarray(rhs, dtype=float), trans="T" if trans else "N")
        if not np.all(np.isfinite(x)):
            raise SingularTransformError("non-mortar solve produced non-finite values")
        return x

    def _rotate(self, x):
        return np.einsum("pij,pj->pi", self.O, x.reshape(self.m1, self.d)).ravel()

    # -- vector operations -------------------------------------------------
    def transform_gradient(self, f) -> np.ndarray:
        """``T^T f`` with the exact non-mortar matrix."""
        f = np.asarray(f, dtype=float)
        nm, mo, d = self.lin.nm_dofs, self.lin.m_dofs, self.d
        g = self._rotate(f[nm]).reshape(self.m1, d)
        fbar = self._solve(g[:, 0], trans=True)
        out = f.copy()
        res = np.empty((self.m1, d))
        res[:, 0] = -fbar
        res[:, 1:] = g[:, 1:] - (self.DT.T @ fbar).reshape(self.m1, d - 1)
        out[nm] = res.ravel()
        out[mo] = f[mo] - self.M.T @ fbar
        return out

    def to_euclidean(self, ut) -> np.ndarray:
        """``u = T u~`` via one non-mortar solve."""
        ut = np.asarray(ut, dtype=float)
        nm, mo, d = self.lin.nm_dofs, self.lin.m_dofs, self.d
        w = ut[nm].reshape(self.m1, d).copy()
        rhs = w[:, 0] + self.DT @ w[:, 1:].ravel() + self.M @ ut[mo]
        w[:, 0] = -self._solve(rhs)
        u = ut.copy()
        u[nm] = self._rotate(w.ravel())
        return u

    def to_transformed(self, u) -> np.ndarray:
        """``u~ = T^-1 u`` (no solve needed)."""
        u = np.asarray(u, dtype=float)
        nm, mo, d = self.lin.nm_dofs, self.lin.m_dofs, self.d
        y = self._rotate(u[nm]).reshape(self.m1, d)
        out = u.copy()
        res = y.copy()
        res[:, 0] = -(self.DN @ y[:, 0] + self.DT @ y[:, 1:].ravel() + self.M @ u[mo])
        out[nm] = res.ravel()
        return out

    # -- explicit sparse matrices -------------------------------------------
    def _dn_inverse(self, lumped):
        if lumped:
            return sp.diags(1.0 / self.DN_lumped)
        if self._dense_inv is None:
            self._dense_inv = self._solve(np.eye(self.m1))
        return sp.csr_matrix(self._dense_inv)

    def _embed(self, blk_nm_nm, blk_nm_m):
        n = self.n
        nm, mo = self.lin.nm_dofs, self.lin.m_dofs
        keep = np.ones(n)
        keep[nm] = 0.0
        a = sp.coo_matrix(blk_nm_nm)
        b = sp.coo_matrix(blk_nm_m)
        rows = np.concatenate([a.row, b.row])
        cols = np.concatenate([nm[a.col], mo[b.col]])
        data = np.concatenate([a.data, b.data])
        upd = sp.csr_matrix((data, (nm[rows], cols)), shape=(n, n))
        return (sp.diags(keep) + upd).tocsr()

    def matrix(self, lumped: bool = False) -> sp.csr_matrix:
        """Explicit ``T`` (or the lumped ``T^``) in native DOF numbering."""
        SN, ST = _selectors(self.m1, self.d)
        Dinv = self._dn_inverse(lumped)
        K = SN @ (-Dinv) @ SN.T + SN @ (-(Dinv @ self.DT)) @ ST.T + ST @ ST.T
        L = SN @ (Dinv @ self.M)
        T = self._embed(self.Oblk @ K, -(self.Oblk @ L))
        T.eliminate_zeros()
        return T

    def inverse_matrix(self, lumped: bool = False) -> sp.csr_matrix:
        """Explicit ``T^-1``; sparse because it only involves ``D_N``, not its inverse."""
        SN, ST = _selectors(self.m1, self.d)
        DN = sp.diags(self.DN_lumped) if lumped else self.DN
        U = SN @ (-DN) @ SN.T + SN @ (-self.DT) @ ST.T + ST @ ST.T
        V = SN @ self.M
        Ti = self._embed(U @ self.Oblk, -V)
        Ti.eliminate_zeros()
        return Ti

    # -- Hessian path --------------------------------------------------------
    def hessian_matrix(self) -> sp.csr_matrix:
        return self.matrix(lumped=self.lumped)

    def hessian_inverse(self) -> sp.csr_matrix:
        return self.inverse_matrix(lumped=self.lumped)

    def transform_hessian(self, H) -> sp.csr_matrix:
        """``T^T H T^`` with ``T^`` lumped or exact according to ``self.lumped``."""
        T = self.hessian_matrix()
        HT = (T.T @ H @ T).tocsr()
        HT = (0.5 * (HT + HT.T)).tocsr()
        HT.eliminate_zeros()
        return HT

    def lumped_view(self) -> "LumpedTransform":
        return LumpedTransform(self)


class LumpedTransform:
    """Hessian-only view of the lumped transformation.

    It deliberately refuses gradient transformation and coordinate changes:
    the linear model term must use the exact ``D_N``.
    """

    def __init__(self, exact: DecouplingTransform):
        self._tr = exact

    def matrix(self):
        return self._tr.matrix(lumped=True)

    def inverse_matrix(self):
        return self._tr.inverse_matrix(lumped=True)

    def transform_hessian(self, H):
        T = self.matrix()
        HT = (T.T @ H @ T).tocsr()
        return (0.5 * (HT + HT.T)).tocsr()

    def transform_gradient(self, f):
        raise TypeError("the lumped transformation must not be applied to gradients")

    def to_euclidean(self, ut):
        raise TypeError("the lumped transformation must not be used for coordinate changes")


def build(lin: ContactLinearisation, normals=None, lumped: bool = True) -> DecouplingTransform:
    return DecouplingTransform(lin, lumped=lumped, normals=normals)


def transform_gradient(tr, f):
    return tr.transform_gradient(f)


def transform_hessian(tr, H):
    return tr.transform_hessian(H)


def to_euclidean(tr, ut):
    return tr.to_euclidean(ut)
