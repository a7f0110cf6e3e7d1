"""Filter trust-region SQP driver for the constrained energy minimisation.

The driver works on any *problem* object offering

    n_dofs, fixed (bool mask), h1 (sparse SPD metric), prolongations (list or None),
    energy(z), gradient(z), hessian(z), gap(z), linearise(z) -> ContactLinearisation

which :class:`ftrcontact.problem.ContactProblem` implements for meshes.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import qpsolve
from .transform import DecouplingTransform, SingularTransformError

log = logging.getLogger(__name__)

THETA_TYPE = "theta-type"
J_TYPE = "J-type"
REJECTED_FILTER = "rejected-filter"
REJECTED_QUALITY = "rejected-quality"
RESTORATION = "restoration"
CONVERGED = "converged"
STEP_TYPES = (THETA_TYPE, J_TYPE, REJECTED_FILTER, REJECTED_QUALITY, RESTORATION, CONVERGED)


class DegenerateModelError(ArithmeticError):
    """The model predicts no decrease, so the quality ratio is undefined."""


class RestorationError(RuntimeError):
    pass


# -- filter ---------------------------------------------------------------------

@dataclass(frozen=True)
class FilterEntry:
    J: float
    theta: float


def dominates(a: FilterEntry, b: FilterEntry, xi: float) -> bool:
    """``a`` xi-dominates ``b``."""
    return a.J < b.J - xi * a.theta and a.theta < (1.0 - xi) * b.theta


@dataclass
class Filter:
    xi: float = 1e-5
    entries: list = field(default_factory=list)

    def __post_init__(self):
        if not 0.0 < self.xi < 1.0:
            raise ValueError("xi must lie in (0, 1)")

    def __len__(self):
        return len(self.entries)

    def is_acceptable(self, J: float, theta: float) -> bool:
        return all(J < e.J - self.xi * theta or theta < (1.0 - self.xi) * e.theta
                   for e in self.entries)

    def add(self, J: float, theta: float) -> "Filter":
        if not theta > 0.0:
            raise ValueError("only infeasible points (theta > 0) may enter the filter")
        new = FilterEntry(float(J), float(theta))
        if any(dominates(e, new, self.xi) for e in self.entries):
            return self                 # already covered; keeps the filter free of dominated pairs
        self.entries = [e for e in self.entries if not dominates(new, e, self.xi)] + [new]
        return self


def is_acceptable(filt: Filter, J: float, theta_value: float) -> bool:
    return filt.is_acceptable(J, theta_value)


def add_entry(filt: Filter, J: float, theta_value: float) -> Filter:
    return filt.add(J, theta_value)


# -- scalar measures ------------------------------------------------------------

def theta(c) -> float:
    """Infeasibility ``max(0, max_p -c_p)``."""
    c = np.asarray(c, dtype=float)
    return float(max(0.0, -c.min())) if c.size else 0.0


def rho(J_k: float, J_trial: float, model_decrease: float) -> float:
    """Ratio of actual to predicted decrease; ``-inf`` for infinite trial energy."""
    if not model_decrease > 0.0:
        raise DegenerateModelError(f"model decrease {model_decrease!r} is not positive")
    if not math.isfinite(J_trial):
        return -math.inf
    return (J_k - J_trial) / model_decrease


def chi(gradient_T, upper, lower=None) -> float:
    """Optimality measure ``|min g.d|`` over ``lower <= d <= upper``.

    ``upper`` holds the caps: ``min(1, c_p)`` on normal non-mortar
    components, ``0`` on fixed DOFs, ``1`` elsewhere.  ``lower`` defaults to
    ``-1``; where a cap falls below ``-1`` it is used as lower bound as well.
    """
    g = np.asarray(gradient_T, dtype=float)
    hi = np.broadcast_to(np.asarray(upper, dtype=float), g.shape)
    lo = np.full(g.shape, -1.0) if lower is None else np.broadcast_to(np.asarray(lower, dtype=float), g.shape)
    lo = np.minimum(lo, hi)
    d = np.where(g > 0, lo, hi)
    return float(abs(np.dot(g, d)))


# -- configuration and records ----------------------------------------------------

@dataclass
class FtrConfig:
    eta1: float = 0.1
    eta2: float = 0.9
    kappa_theta: float = 1e-4
    xi: float = 1e-5
    delta0: float = 0.5
    shrink: float = 0.25
    outer_tol: float = 1e-7
    inner_tol: float = 1e-4
    max_outer: int = 200
    max_inner: int = 200
    kappa_scd: float = 1e-4
    lumped: bool = True
    max_restoration: int = 50
    chi_tol: float = 1e-4       # reporting threshold for the optimality measure; not a stopping test

    def __post_init__(self):
        if not 0.0 < self.eta1 <= self.eta2 < 1.0:
            raise ValueError("need 0 < eta1 <= eta2 < 1")
        if not 0.0 < self.kappa_theta < 1.0:
            raise ValueError("kappa_theta must lie in (0, 1)")
        if not 0.0 < self.xi < 1.0:
            raise ValueError("xi must lie in (0, 1)")
        if not (self.delta0 > 0 and 0 < self.shrink < 1):
            raise ValueError("delta0 must be positive and shrink in (0, 1)")
        if not (self.outer_tol > 0 and self.inner_tol > 0 and self.max_outer >= 1):
            raise ValueError("tolerances must be positive")


@dataclass
class IterationRecord:
    k: int
    J: float
    theta: float
    delta: float
    rho: float
    chi: float
    step_type: str
    inner_iterations: int
    wall_time: float = 0.0
    model_decrease: float = float("nan")
    correction: float = float("nan")     # relative H1 norm of the Euclidean correction
    cauchy_ok: bool = True

    CSV_FIELDS = ("k", "J", "theta", "delta", "rho", "chi", "step_type", "inner_iterations")

    def csv_row(self):
        return [self.k, repr(self.J), repr(self.theta), repr(self.delta), repr(self.rho),
                repr(self.chi), self.step_type, self.inner_iterations]


@dataclass
class FtrResult:
    z: np.ndarray
    records: list
    status: str
    restorations: int = 0
    filter: Filter | None = None

    def __iter__(self):
        yield self.z
        yield self.records

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def outer_iterations(self) -> int:
        return sum(r.step_type != CONVERGED for r in self.records)

    @property
    def final_chi(self) -> float:
        return self.records[-1].chi if self.records else float("nan")

    @property
    def final_theta(self) -> float:
        return self.records[-1].theta if self.records else float("nan")

    @property
    def mean_inner_iterations(self) -> float:
        its = [r.inner_iterations for r in self.records if r.step_type not in (RESTORATION, CONVERGED)]
        return float(np.mean(its)) if its else 0.0


# -- helpers ------------------------------------------------------------------------

def _normal_dofs(lin):
    d = len(lin.nm_dofs) // len(lin.c)
    return lin.nm_dofs[0::d]


def _h1_norm(K, x):
    return math.sqrt(max(float(x @ (K @ x)), 0.0))


def contact_caps(lin, fixed, n):
    """Upper caps for the optimality measure."""
    caps = np.ones(n)
    caps[_normal_dofs(lin)] = np.minimum(1.0, lin.c)
    caps[fixed] = 0.0
    lower = -np.ones(n)
    lower[fixed] = 0.0
    return caps, lower


def trqp_bounds(lin, fixed, n, delta):
    lo = np.full(n, -delta)
    hi = np.full(n, delta)
    nd = _normal_dofs(lin)
    hi[nd] = np.minimum(lin.c, delta)
    lo[fixed] = 0.0
    hi[fixed] = 0.0
    return lo, hi


def multiplier_estimate(problem, z, active_tol: float = 1e-8):
    """Least-squares multipliers of ``grad J + lambda.grad c = 0`` on active rows.

    Returns ``(lambda, residual, sign_ok)``; purely diagnostic.
    """
    lin = problem.linearise(z)
    g = problem.gradient(z)
    free = ~problem.fixed
    act = np.flatnonzero(lin.c <= active_tol * max(1.0, np.abs(lin.c).max(initial=0.0)))
    lam = np.zeros(len(lin.c))
    if len(act) == 0:
        return lam, float(np.linalg.norm(g[free])), True
    A = lin.jacobian()[act][:, free].toarray().T
    sol, *_ = np.linalg.lstsq(A, -g[free], rcond=None)
    lam[act] = sol
    res = float(np.linalg.norm(A @ sol + g[free]))
    return lam, res, bool(np.all(sol <= 1e-8 * max(1.0, np.abs(sol).max())))


# -- restoration ---------------------------------------------------------------------

def restore_feasibility(problem, z, filt: Filter, delta0: float, max_it: int = 50, radius: float | None = None):
    """Reduce ``psi(z) = sum max(0, -c_p)^2`` by a trust-region Gauss-Newton descent.

    Steps are minimal in the H1 metric for the linearised violated rows and
    are cut to the max-norm ``radius`` (``delta0`` by default).  Stops once
    ``z`` is acceptable to ``filt`` and the trust-region problem with radius
    ``delta0`` is admissible.  Returns ``(z, delta0, iterations)``; raises
    :class:`RestorationError` when ``psi`` stagnates above zero.
    """
    z = np.array(z, dtype=float)
    free = np.flatnonzero(~problem.fixed)
    K = sp.csr_matrix(problem.h1)[free][:, free].tocsc()
    lu = spla.splu(K)
    rad = delta0 if radius is None else radius

    def psi(c):
        return float(np.sum(np.minimum(c, 0.0) ** 2))

    c = problem.gap(z)
    lin_state = None
    for it in range(max_it + 1):
        J = problem.energy(z)
        if math.isfinite(J) and c.min(initial=np.inf) >= -delta0 and filt.is_acceptable(J, theta(c)):
            return z, delta0, it
        if it == max_it:
            break
        if lin_state is None:
            viol = np.flatnonzero(c < 0)
            Jc = problem.linearise(z).jacobian()[viol][:, free].toarray()
            r = c[viol]
            if np.linalg.norm(Jc.T @ r) <= 1e-14 * max(1.0, np.linalg.norm(r)):
                raise RestorationError(f"infeasibility stagnates at a critical point (theta = {theta(c):.3e})")
            KiJ = lu.solve(Jc.T)                      # K^-1 J^T
            y = np.linalg.lstsq(Jc @ KiJ, -r, rcond=None)[0]
            gn = np.zeros_like(z)
            gn[free] = KiJ @ y
            lin_state = (viol, Jc, r, gn)
        viol, Jc, r, gn = lin_state
        size = float(np.max(np.abs(gn)))
        scale = min(1.0, rad / size) if size > 0 else 1.0
        step = scale * gn
        base = psi(c)
        pred = base - float(np.sum((r + scale * (Jc @ gn[free])) ** 2))
        zt = z + step
        ct = problem.gap(zt) if math.isfinite(problem.energy(zt)) else None
        ratio = (base - psi(ct)) / pred if ct is not None and pred > 0 else -math.inf
        if ratio >= 0.1:
            z, c = zt, ct
            lin_state = None
            if ratio > 0.75 and scale < 1.0:
                rad *= 2.0
        else:
            rad *= 0.25
            if rad < 1e-14 * max(1.0, size):
                raise RestorationError(f"no decrease of the infeasibility (theta = {theta(c):.3e})")
    raise RestorationError("restoration iteration limit reached")


# -- driver ----------------------------------------------------------------------------

def ftr_solve(problem, z0, config: FtrConfig | None = None, callback=None) -> FtrResult:
    """Filter trust-region SQP iteration from the Dirichlet-consistent start ``z0``."""
    cfg = config or FtrConfig()
    z = np.array(z0, dtype=float)
    n = len(z)
    fixed = np.asarray(problem.fixed, dtype=bool)
    K = problem.h1
    filt = Filter(cfg.xi)
    records: list[IterationRecord] = []
    delta = cfg.delta0
    restorations = 0
    status = "max_iterations"

    J = problem.energy(z)
    if not math.isfinite(J):
        raise ValueError("initial configuration violates the orientation condition")

    model = None
    k = 0
    while len(records) < cfg.max_outer:
        t0 = time.perf_counter()
        if model is None:
            lin = problem.linearise(z)
            if np.any(fixed[lin.nm_dofs]):
                raise ValueError("Dirichlet conditions on the non-mortar boundary are not supported")
            th = theta(lin.c)
            try:
                tr = DecouplingTransform(lin, lumped=cfg.lumped)
            except SingularTransformError as exc:
                log.error("singular transformation at iterate %d: %s", k, exc)
                status = "singular_transform"
                break
            fT = tr.transform_gradient(problem.gradient(z))
            HT = tr.transform_hessian(problem.hessian(z))
            caps, low = contact_caps(lin, fixed, n)
            chi_k = chi(fT, caps, low)
            model = (lin, tr, fT, HT, chi_k, th)
        lin, tr, fT, HT, chi_k, th = model

        # admissibility of the trust-region problem
        if lin.c.min(initial=np.inf) < -delta:
            filt.add(J, th)
            try:
                z, delta, its = restore_feasibility(problem, z, filt, cfg.delta0, cfg.max_restoration, radius=delta)
            except RestorationError as exc:
                log.error("restoration failed: %s", exc)
                status = "restoration_failed"
                break
            restorations += 1
            J = problem.energy(z)
            records.append(IterationRecord(k, J, theta(problem.gap(z)), delta, float("nan"), chi_k,
                                           RESTORATION, its, time.perf_counter() - t0))
            model = None
            k += 1
            continue

        lo, hi = trqp_bounds(lin, fixed, n, delta)
        qp = qpsolve.QuadraticModel(HT, fT, lo, hi)
        ut, rep = qpsolve.trqp_solve(qp, tr, problem.prolongations, tol=cfg.inner_tol, max_it=cfg.max_inner)
        decrease = -rep.energy
        # the decrease guarantee only applies when the zero step is admissible
        cauchy = (not (np.all(lo <= 0.0) and np.all(hi >= 0.0))
                  or qpsolve.cauchy_decrease_ok(decrease, chi_k, HT, delta, cfg.kappa_scd))
        u = tr.to_euclidean(ut)
        rel = _h1_norm(K, u) / max(_h1_norm(K, z), 1e-300)

        base = dict(k=k, J=J, theta=th, delta=delta, chi=chi_k, inner_iterations=rep.iterations,
                    model_decrease=decrease, correction=rel, cauchy_ok=cauchy)
        if rel < cfg.outer_tol:
            records.append(IterationRecord(rho=float("nan"), step_type=CONVERGED,
                                           wall_time=time.perf_counter() - t0, **base))
            status = "converged"
            break

        zt = z + u
        Jt = problem.energy(zt)
        tht = theta(problem.gap(zt)) if math.isfinite(Jt) else math.inf
        theta_ok = decrease >= cfg.kappa_theta * th * th
        try:
            r = rho(J, Jt, decrease)
        except DegenerateModelError:
            r = -math.inf

        if not math.isfinite(Jt):
            kind = REJECTED_QUALITY
        elif not filt.is_acceptable(Jt, tht):
            kind = REJECTED_FILTER
        elif r < cfg.eta1 and theta_ok:
            kind = REJECTED_QUALITY
        elif not theta_ok:
            filt.add(J, th)
            kind = THETA_TYPE
        else:
            kind = J_TYPE

        records.append(IterationRecord(rho=r, step_type=kind, wall_time=time.perf_counter() - t0, **base))
        if callback is not None:
            callback(records[-1])
        log.info("k=%d %s J=%.10g theta=%.3e delta=%.3e rho=%.3f chi=%.3e inner=%d",
                 k, kind, J, th, delta, r, chi_k, rep.iterations)

        if kind in (THETA_TYPE, J_TYPE):
            z, J = zt, Jt
            model = None
        else:
            delta = cfg.shrink * min(float(np.max(np.abs(ut), initial=0.0)), delta)
            if delta <= 0.0:
                status = "trust_region_collapse"
                break
        k += 1

    return FtrResult(z, records, status, restorations, filt)
