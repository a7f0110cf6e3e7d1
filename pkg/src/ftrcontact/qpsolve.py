"""Bound-constrained quadratic solvers.

Both solvers minimise ``m(u) = f.u + 1/2 u.H u`` subject to
``lower <= u <= upper``:

* :func:`tnnmg_solve` for convex models: projected Gauss-Seidel smoothing,
  a truncated linear multigrid correction, projection and an exact line
  search.
* :func:`trqp_solve` for possibly indefinite trust-region models given in
  decoupled coordinates: the smoothing happens there, while the correction
  is computed in Euclidean coordinates by a monotone multigrid cycle under
  safeguard bounds and mapped back through ``T^-1``.

Every iterate is feasible and the model energy never increases.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

ACTIVE_TOL = 1e-12
COARSE_STAGNATION = 1e-12
COARSE_MAX_SWEEPS = 1000


class UnboundedCoordinateError(ArithmeticError):
    """A non-convex coordinate problem has an infinite bound on its descent side."""


class AdmissibilityError(ValueError):
    """The bound constraints describe an empty set."""


@dataclass(frozen=True)
class QuadraticModel:
    H: sp.csr_matrix
    f: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        H = sp.csr_matrix(self.H, dtype=float)
        H.sort_indices()
        object.__setattr__(self, "H", H)
        n = H.shape[0]
        for name in ("f", "lower", "upper"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape == ():
                v = np.full(n, float(v))
            object.__setattr__(self, name, v.copy())
        if H.shape != (n, n) or any(len(getattr(self, k)) != n for k in ("f", "lower", "upper")):
            raise ValueError("model dimensions do not match")
        if not (np.all(np.isfinite(H.data)) and np.all(np.isfinite(self.f))):
            raise ValueError("model contains non-finite data")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            raise ValueError("bounds contain NaN")
        if np.any(self.lower > self.upper):
            i = int(np.flatnonzero(self.lower > self.upper)[0])
            raise AdmissibilityError(f"empty interval at DOF {i}")

    @property
    def n(self) -> int:
        return len(self.f)

    def energy(self, u) -> float:
        return float(self.f @ u + 0.5 * u @ (self.H @ u))

    def gradient(self, u) -> np.ndarray:
        return self.f + self.H @ u

    def project(self, u) -> np.ndarray:
        return np.clip(u, self.lower, self.upper)

    def feasible(self, u) -> bool:
        return bool(np.all(u >= self.lower) and np.all(u <= self.upper))


@dataclass
class SolveReport:
    iterations: int = 0
    energy: float = 0.0
    energies: list = field(default_factory=list)        # m(u^nu), starting with the initial iterate
    half_energies: list = field(default_factory=list)   # m(u^{nu+1/2}) after smoothing
    last_correction: float = np.inf
    reason: str = ""
    monotone_violations: int = 0
    feasibility_violations: int = 0


# -- kernels ----------------------------------------------------------------

@numba.njit(cache=True)
def _pgs_kernel(indptr, indices, data, f, lo, hi, u, sweeps, skip_unbounded):
    """Sequential coordinate minimisation; returns -1 or the unbounded DOF."""
    n = len(f)
    for _ in range(sweeps):
        for i in range(n):
            g = f[i]
            h = 0.0
            for k in range(indptr[i], indptr[i + 1]):
                j = indices[k]
                g += data[k] * u[j]
                if j == i:
                    h = data[k]
            a = lo[i] - u[i]
            b = hi[i] - u[i]
            if h > 0.0:
                alpha = -g / h
                if alpha < a:
                    alpha = a
                elif alpha > b:
                    alpha = b
            elif h == 0.0 and g == 0.0:
                continue
            else:
                fa = np.isfinite(a)
                fb = np.isfinite(b)
                if h == 0.0:
                    # linear coordinate model: go to the descent-side bound
                    if g > 0.0:
                        if not fa:
                            if skip_unbounded:
                                continue
                            return i
                        alpha = a
                    else:
                        if not fb:
                            if skip_unbounded:
                                continue
                            return i
                        alpha = b
                else:
                    if not (fa and fb):
                        if skip_unbounded:
                            continue
                        return i
                    ma = g * a + 0.5 * h * a * a
                    mb = g * b + 0.5 * h * b * b
                    # concave: the minimum sits at an endpoint; ties go to the larger step
                    alpha = a if ma < mb else b
            u[i] = min(max(u[i] + alpha, lo[i]), hi[i])
    return -1


@numba.njit(cache=True)
def _energy_kernel(indptr, indices, data, f, u):
    e = 0.0
    for i in range(len(f)):
        s = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            s += data[k] * u[indices[k]]
        e += u[i] * (f[i] + 0.5 * s)
    return e


def _csr(H):
    H = sp.csr_matrix(H)
    if not H.has_sorted_indices:
        H.sort_indices()
    return H


def _sweep(H, f, lo, hi, u, sweeps=1, skip_unbounded=False):
    H = _csr(H)
    bad = _pgs_kernel(H.indptr, H.indices, H.data, np.asarray(f, float), lo, hi, u, sweeps, skip_unbounded)
    if bad >= 0:
        raise UnboundedCoordinateError(f"coordinate {bad} is unbounded in its descent direction")
    return u


def pgs_sweep(model: QuadraticModel, u, sweeps: int = 1) -> np.ndarray:
    """One (or ``sweeps``) projected Gauss-Seidel sweeps; returns a new array."""
    u = model.project(np.array(u, dtype=float))
    return _sweep(model.H, model.f, model.lower, model.upper, u, sweeps)


def truncate(u, lower, upper, tol: float = ACTIVE_TOL) -> np.ndarray:
    """Boolean mask of DOFs sitting at a finite bound."""
    u = np.asarray(u, dtype=float)
    lower = np.broadcast_to(lower, u.shape)
    upper = np.broadcast_to(upper, u.shape)
    at_lo = np.isfinite(lower) & (u - lower <= tol)
    at_hi = np.isfinite(upper) & (upper - u <= tol)
    return at_lo | at_hi


def truncation_matrix(active) -> sp.dia_matrix:
    return sp.diags((~np.asarray(active, dtype=bool)).astype(float))


# -- multigrid ----------------------------------------------------------------

def _envelope(P, lo, hi, v):
    """Coarse obstacles: max of fine lower defects and min of fine upper defects over each support."""
    R = sp.csr_matrix(P.T)
    R.sort_indices()
    lo_f = (lo - v)[R.indices]
    hi_f = (hi - v)[R.indices]
    nc = R.shape[0]
    lo_c = np.full(nc, -np.inf)
    hi_c = np.full(nc, np.inf)
    nonempty = np.diff(R.indptr) > 0
    starts = R.indptr[:-1][nonempty]
    if len(starts):
        lo_c[nonempty] = np.maximum.reduceat(lo_f, starts)
        hi_c[nonempty] = np.minimum.reduceat(hi_f, starts)
    # fine bounds bracket zero, so the envelope does as well, up to roundoff
    return np.minimum(lo_c, 0.0), np.maximum(hi_c, 0.0)


def _exhaustive(A, f, lo, hi, v):
    A = _csr(A)
    e = _energy_kernel(A.indptr, A.indices, A.data, f, v)
    for _ in range(COARSE_MAX_SWEEPS):
        _pgs_kernel(A.indptr, A.indices, A.data, f, lo, hi, v, 1, True)
        e_new = _energy_kernel(A.indptr, A.indices, A.data, f, v)
        if e - e_new <= COARSE_STAGNATION * max(abs(e_new), 1e-300):
            break
        e = e_new
    return v


def vcycle(A, b, lo, hi, prolongations, v=None, nu: int = 3):
    """One V-cycle for ``min 1/2 v.A v - b.v`` on ``[lo, hi]`` (bounds may be infinite).

    ``prolongations[l]`` maps level ``l`` to level ``l+1``; the finest
    level is ``A``'s.  Coarse obstacles are restricted by the minimal
    envelope rule, so every coarse correction keeps the fine iterate feasible
    and the energy never increases.  Without prolongations the cycle reduces
    to the exhaustive coarse solver.
    """
    A = _csr(A)
    v = np.zeros(A.shape[0]) if v is None else np.array(v, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    return _cycle(A, -np.asarray(b, dtype=float), lo, hi, list(prolongations or []), v, nu)


def _cycle(A, f, lo, hi, prolongs, v, nu):
    if not prolongs:
        return _exhaustive(A, f, lo, hi, v)
    _pgs_kernel(A.indptr, A.indices, A.data, f, lo, hi, v, nu, True)
    P = prolongs[-1]
    r = -(f + A @ v)
    Ac = _csr(P.T @ A @ P)
    lo_c, hi_c = _envelope(P, lo, hi, v)
    vc = _cycle(Ac, -(P.T @ r), lo_c, hi_c, prolongs[:-1], np.zeros(P.shape[1]), nu)
    v = np.clip(v + P @ vc, lo, hi)
    _pgs_kernel(A.indptr, A.indices, A.data, f, lo, hi, v, nu, True)
    return v


# -- line search ---------------------------------------------------------------

def _max_step(u, v, lo, hi):
    with np.errstate(divide="ignore", invalid="ignore"):
        up = np.where(v > 0, (hi - u) / v, np.inf)
        dn = np.where(v < 0, (lo - u) / v, np.inf)
    return max(float(min(up.min(initial=np.inf), dn.min(initial=np.inf))), 0.0)


def _line_search(g, h, amax):
    """Minimiser of ``g a + h a^2 / 2`` on ``[0, amax]``, ties to the larger step."""
    if h > 0:
        return min(max(-g / h, 0.0), amax)
    if not np.isfinite(amax):
        if g < 0 or (h < 0 and g <= 0):
            raise UnboundedCoordinateError("line search along an unbounded descent ray")
        return 0.0
    m_end = g * amax + 0.5 * h * amax * amax
    return amax if m_end <= 0.0 else 0.0


def _step(model, u_half, v):
    """Projection onto the defect obstacles, line search and monotone safeguard."""
    lo, hi = model.lower, model.upper
    v = np.clip(u_half + v, lo, hi) - u_half
    grad = model.gradient(u_half)
    g = float(grad @ v)
    h = float(v @ (model.H @ v))
    alpha = _line_search(g, h, _max_step(u_half, v, lo, hi)) if np.any(v) else 0.0
    u_new = np.clip(u_half + alpha * v, lo, hi)
    return u_new


def _record(model, report, u_old, e_old, u_half, u_new, norm):
    e_half = model.energy(u_half)
    e_new = model.energy(u_new)
    if e_new > e_half:
        # roundoff in the step may overshoot; keep the smoothed iterate
        u_new, e_new = u_half, e_half
    scale = 1e-12 * max(1.0, abs(e_old))
    if e_half > e_old + scale or e_new > e_half + scale:
        report.monotone_violations += 1
    if not model.feasible(u_half) or not model.feasible(u_new):
        report.feasibility_violations += 1
    report.half_energies.append(e_half)
    report.energies.append(e_new)
    report.iterations += 1
    report.last_correction = float(norm(u_new - u_old))
    return u_new, e_new


def _converged(change, u, tol, relative, norm):
    if change == 0.0:
        return True
    ref = norm(u) if relative else 1.0
    return change < tol * ref


# -- solvers -------------------------------------------------------------------

def _maxnorm(x):
    return float(np.max(np.abs(x), initial=0.0))


def tnnmg_solve(model: QuadraticModel, u0=None, tol: float = 1e-10, max_it: int = 200,
                prolongations=None, nu: int = 3, relative: bool = False, norm=None):
    """Truncated nonsmooth Newton multigrid for a convex bound-constrained model."""
    norm = norm or _maxnorm
    u = model.project(np.zeros(model.n) if u0 is None else np.array(u0, dtype=float))
    report = SolveReport()
    e = model.energy(u)
    report.energies.append(e)
    for _ in range(max_it):
        u_half = _sweep(model.H, model.f, model.lower, model.upper, u.copy())
        active = truncate(u_half, model.lower, model.upper)
        Q = truncation_matrix(active)
        r = -(Q @ model.gradient(u_half))
        A = _csr(Q @ model.H @ Q)
        inf = np.full(model.n, np.inf)
        v = vcycle(A, r, -inf, inf, prolongations, nu=nu)
        v[active] = 0.0
        u_new = _step(model, u_half, v)
        u_prev = u
        u, e = _record(model, report, u_prev, e, u_half, u_new, norm)
        if _converged(report.last_correction, u, tol, relative, norm):
            report.reason = "converged"
            break
    else:
        report.reason = "max_it"
    report.energy = e
    return u, report


def safeguard_bounds(Tinv, u_half, delta=None, lower=None, upper=None, rows=None, strict=False):
    """Euclidean bounds ``(a, b)`` keeping ``u_half + T^-1 v`` inside the box.

    The box is ``[-delta, delta]`` or ``[lower, upper]``.  Only rows in the
    boolean mask ``rows`` constrain ``v`` (truncated rows are masked out of
    the correction anyway).  ``strict`` gives the max/min bounds with the
    guarantee ``lower <= u_half + T^-1 v <= upper``; otherwise the per-row
    bounds are averaged.  DOFs touched by no row get ``(-inf, inf)``.
    """
    Tinv = sp.csr_matrix(Tinv)
    n = Tinv.shape[0]
    u_half = np.asarray(u_half, dtype=float)
    if delta is not None:
        lower = np.full(n, -float(delta))
        upper = np.full(n, float(delta))
    lower = np.broadcast_to(np.asarray(lower, dtype=float), (n,))
    upper = np.broadcast_to(np.asarray(upper, dtype=float), (n,))
    w = np.diff(Tinv.indptr)
    C = Tinv.tocoo()
    keep = C.data != 0
    if rows is not None:
        keep &= np.asarray(rows, dtype=bool)[C.row]
    i, j, t = C.row[keep], C.col[keep], C.data[keep]
    lo_i = (lower[i] - u_half[i]) / (w[i] * t)
    hi_i = (upper[i] - u_half[i]) / (w[i] * t)
    neg = t < 0
    lo_i[neg], hi_i[neg] = hi_i[neg], lo_i[neg].copy()
    a = np.full(Tinv.shape[1], -np.inf)
    b = np.full(Tinv.shape[1], np.inf)
    if strict:
        np.maximum.at(a, j, lo_i)
        np.minimum.at(b, j, hi_i)
    else:
        cnt = np.bincount(j, minlength=len(a))
        touched = cnt > 0
        with np.errstate(invalid="ignore"):
            sa = np.bincount(j, weights=lo_i, minlength=len(a))
            sb = np.bincount(j, weights=hi_i, minlength=len(a))
        a[touched] = sa[touched] / cnt[touched]
        b[touched] = sb[touched] / cnt[touched]
    return np.minimum(a, 0.0), np.maximum(b, 0.0)


def _inverse_of(transform, n):
    if transform is None:
        return sp.identity(n, format="csr")
    if hasattr(transform, "hessian_inverse"):
        return sp.csr_matrix(transform.hessian_inverse())
    if hasattr(transform, "inverse_matrix"):
        return sp.csr_matrix(transform.inverse_matrix())
    return sp.csr_matrix(transform)


def trqp_solve(model: QuadraticModel, transform=None, prolongations=None, u0=None,
               tol: float = 1e-4, max_it: int = 200, nu: int = 3, relative: bool = True,
               norm=None, strict_safeguard: bool = False):
    """Solve a possibly indefinite trust-region QP given in decoupled coordinates.

    ``transform`` supplies ``T^-1`` (a :class:`~ftrcontact.transform.DecouplingTransform`,
    whose Hessian-path inverse is used, or an explicit sparse matrix);
    ``None`` means the identity.  ``prolongations`` act on Euclidean
    coordinates.  Iteration stops when the correction norm falls below
    ``tol`` (relative to the iterate when ``relative``).
    """
    norm = norm or _maxnorm
    n = model.n
    Tinv = _inverse_of(transform, n)
    u = model.project(np.zeros(n) if u0 is None else np.array(u0, dtype=float))
    report = SolveReport()
    e = model.energy(u)
    report.energies.append(e)
    for _ in range(max_it):
        u_half = _sweep(model.H, model.f, model.lower, model.upper, u.copy())
        active = truncate(u_half, model.lower, model.upper)
        B = (truncation_matrix(active) @ Tinv).tocsr()
        rT = -model.gradient(u_half)
        rT[active] = 0.0
        Ht = _csr(B.T @ model.H @ B)
        r = B.T @ rT
        a, b = safeguard_bounds(Tinv, u_half, lower=model.lower, upper=model.upper,
                                rows=~active, strict=strict_safeguard)
        v = vcycle(Ht, r, a, b, prolongations, nu=nu)
        vt = B @ v
        u_new = _step(model, u_half, vt)
        u_prev = u
        u, e = _record(model, report, u_prev, e, u_half, u_new, norm)
        if _converged(report.last_correction, u, tol, relative, norm):
            report.reason = "converged"
            break
    else:
        report.reason = "max_it"
    report.energy = e
    return u, report


def cauchy_decrease_ok(decrease, chi, H, delta, kappa: float = 1e-4) -> bool:
    """Check ``decrease >= kappa chi min(chi / ||H||_inf, delta)``; logs a warning otherwise."""
    Hn = float(abs(sp.csr_matrix(H)).sum(axis=1).max()) if H.shape[0] else 0.0
    ratio = chi / Hn if Hn > 0 else np.inf
    need = kappa * chi * min(ratio, delta)
    ok = decrease >= need
    if not ok:
        log.warning("insufficient Cauchy decrease: %.3e < %.3e", decrease, need)
    return bool(ok)
