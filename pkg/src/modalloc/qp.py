"""Convex box-constrained QP: ``min x^T H x + g^T x`` s.t. ``lower <= x <= upper``.

``H`` only needs to be positive semidefinite. The solver is a primal
active-set method started from a few projected-gradient steps; an
enumeration oracle over all 3^d bound assignments is provided for testing.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DimensionTooLarge, MaxIterations, NonConvex

DEFAULT_TOL = 1e-9
NEG_CURVATURE_TOL = -1e-10
ORACLE_MAX_DIM = 8
EPS = np.finfo(float).eps


@dataclass(eq=False)
class QpProblem:
    hessian: np.ndarray
    linear: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        h = np.array(self.hessian, dtype=float, ndmin=2)
        d = h.shape[0]
        if h.shape != (d, d):
            raise DimensionMismatch(f"hessian must be square, got {h.shape}")
        scale = max(1.0, float(np.max(np.abs(h)))) if d else 1.0
        if d and np.max(np.abs(h - h.T)) > 1e-12 * scale:
            raise DimensionMismatch("hessian is not symmetric")
        self.hessian = 0.5 * (h + h.T)
        self.linear = np.array(self.linear, dtype=float).reshape(-1)
        self.lower = np.array(self.lower, dtype=float).reshape(-1)
        self.upper = np.array(self.upper, dtype=float).reshape(-1)
        for name in ("linear", "lower", "upper"):
            if getattr(self, name).shape[0] != d:
                raise DimensionMismatch(f"{name} has length {getattr(self, name).shape[0]}, expected {d}")
        if np.any(self.lower > self.upper):
            raise DimensionMismatch("lower bound exceeds upper bound")

    @property
    def dim(self):
        return self.hessian.shape[0]

    def objective(self, x):
        return float(x @ self.hessian @ x + self.linear @ x)

    def gradient(self, x):
        return 2.0 * (self.hessian @ x) + self.linear

    def kkt_residual(self, x):
        """Infinity norm of the projected gradient at ``x``."""
        grad = self.gradient(x)
        r = grad.copy()
        at_lower = x <= self.lower
        at_upper = x >= self.upper
        r[at_lower] = np.minimum(grad[at_lower], 0.0)
        r[at_upper] = np.maximum(grad[at_upper], 0.0)
        r[at_lower & at_upper] = 0.0
        return float(np.max(np.abs(r))) if r.size else 0.0


@dataclass
class QpSolution:
    point: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    active_set: list


def _finish(problem, x, iterations):
    active = [int(i) for i in np.nonzero((x <= problem.lower) | (x >= problem.upper))[0]]
    return QpSolution(x, problem.objective(x), problem.kkt_residual(x), iterations, active)


def _projected_gradient_start(problem, x, steps=3):
    h = problem.hessian
    lipschitz = 2.0 * float(np.max(np.sum(np.abs(h), axis=1))) if h.size else 0.0
    if lipschitz <= 0:
        return x
    for _ in range(steps):
        x = np.clip(x - problem.gradient(x) / lipschitz, problem.lower, problem.upper)
    return x


def solve(problem, tol=DEFAULT_TOL, max_iter=None):
    """Solve a convex box QP to a projected-gradient tolerance ``tol``.

    Raises
    ------
    NonConvex
        On curvature below ``-1e-10`` in the free subspace, or an unbounded
        zero-curvature descent direction.
    MaxIterations
        After ``max_iter`` (default ``50 * d``) iterations; the best iterate
        is attached to the exception.
    """
    return _solve(problem, tol, max_iter, None)


def _solve(problem, tol, max_iter, x0):
    if not tol > 0:
        raise ValueError("tol must be positive")
    d = problem.dim
    lo, up = problem.lower, problem.upper
    if max_iter is None:
        max_iter = 50 * max(d, 1)
    if d == 0:
        return _finish(problem, np.zeros(0), 0)

    start = np.zeros(d) if x0 is None else np.asarray(x0, dtype=float)
    x = np.clip(start, lo, up)
    x = _projected_gradient_start(problem, x)

    h = problem.hessian
    h_scale = max(1.0, float(np.max(np.abs(h))))
    eig_zero = 10 * EPS * h_scale * d
    h_rows = float(np.max(np.sum(np.abs(h), axis=1)))
    g_scale = float(np.max(np.abs(problem.linear)))
    fixed = lo == up
    # working set: -1 at lower, +1 at upper, 0 free
    work = np.zeros(d, dtype=int)
    work[x <= lo] = -1
    work[(x >= up) & ~fixed] = 1
    x[work == -1] = lo[work == -1]
    x[work == 1] = up[work == 1]

    refinements = 0
    for it in range(1, max_iter + 1):
        grad = problem.gradient(x)
        # rounding floor of the gradient; only binds for badly scaled problems
        tol_it = max(tol, 16 * EPS * (2.0 * h_rows * float(np.max(np.abs(x))) + g_scale))
        free = np.nonzero(work == 0)[0]
        step = None
        zero_curvature = False
        if free.size:
            gf = grad[free]
            evals, evecs = np.linalg.eigh(h[np.ix_(free, free)])
            if evals[0] < NEG_CURVATURE_TOL * h_scale:
                raise NonConvex(f"negative curvature {evals[0]:.3g} in free subspace")
            rng = evals > eig_zero
            null = evecs[:, ~rng]
            g_null = null @ (null.T @ gf)
            if np.max(np.abs(g_null), initial=0.0) > 0.1 * tol_it:
                step = -g_null
                zero_curvature = True
            elif np.max(np.abs(gf)) > tol_it and refinements < 3:
                vr = evecs[:, rng]
                step = -vr @ ((vr.T @ gf) / (2.0 * evals[rng]))

        if step is None:
            mult = np.where(work == -1, grad, -grad)
            mult[(work == 0) | fixed] = np.inf
            worst = int(np.argmin(mult))
            if mult[worst] >= -tol_it:
                return _finish(problem, x, it)
            work[worst] = 0
            refinements = 0
            continue

        alpha = np.inf if zero_curvature else 1.0
        blocking = -1
        xs = x[free]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(step < 0, (lo[free] - xs) / step,
                             np.where(step > 0, (up[free] - xs) / step, np.inf))
        ratio = np.maximum(ratio, 0.0)
        k = int(np.argmin(ratio))
        if ratio[k] < alpha:
            alpha = ratio[k]
            blocking = free[k]
        if not np.isfinite(alpha):
            raise NonConvex("objective is unbounded below along a zero-curvature direction")
        x[free] = xs + alpha * step
        np.clip(x, lo, up, out=x)
        if blocking >= 0:
            side = -1 if step[k] < 0 else 1
            work[blocking] = side
            x[blocking] = lo[blocking] if side == -1 else up[blocking]
            refinements = 0
        elif not zero_curvature:
            refinements += 1

    raise MaxIterations(f"active-set did not converge in {max_iter} iterations",
                        solution=_finish(problem, x, max_iter))


def solve_exact_oracle(problem):
    """Best point over all free/lower/upper assignments (``d <= 8``)."""
    d = problem.dim
    if d > ORACLE_MAX_DIM:
        raise DimensionTooLarge(f"oracle enumerates 3^d candidates; d={d} exceeds {ORACLE_MAX_DIM}")
    h, g, lo, up = problem.hessian, problem.linear, problem.lower, problem.upper
    scale = max(1.0, float(np.max(np.abs(h), initial=0.0)), float(np.max(np.abs(g), initial=0.0)))
    best = None
    count = 0
    for assign in itertools.product((0, -1, 1), repeat=d):
        a = np.array(assign, dtype=int)
        if np.any(~np.isfinite(lo[a == -1])) or np.any(~np.isfinite(up[a == 1])):
            continue
        count += 1
        x = np.zeros(d)
        x[a == -1] = lo[a == -1]
        x[a == 1] = up[a == 1]
        free = np.nonzero(a == 0)[0]
        if free.size:
            bound = np.nonzero(a != 0)[0]
            lhs = 2.0 * h[np.ix_(free, free)]
            rhs = -(g[free] + 2.0 * h[np.ix_(free, bound)] @ x[bound])
            sol, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
            if np.max(np.abs(lhs @ sol - rhs)) > 1e-9 * scale:
                continue
            slack = 1e-10 * scale
            if np.any(sol < lo[free] - slack) or np.any(sol > up[free] + slack):
                continue
            x[free] = np.clip(sol, lo[free], up[free])
        f = problem.objective(x)
        if best is None or f < best[0]:
            best = (f, x)
    if best is None:
        raise NonConvex("no bounded candidate found; problem may be unbounded")
    return _finish(problem, best[1], count)
