"""Sparse modal control allocation and the fixed pseudo-inverse baseline.

Per step the allocator solves

    min  ||W (u - u_d)||^2 + rho^2 ||W_v (E u - v)||^2 + lambda ||u||_1
    s.t. u_min <= u <= u_max

with ``E = psi B_r`` the modal effectiveness matrix, recast over
``q = [u+; u-] >= 0`` as a box QP.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import qp
from .errors import ConfigError, DimensionMismatch, MaxIterations, RankDeficient, SolverFailure

COMPLEMENTARITY_CLAMP = 1e-12


def _weight(value, size, name):
    arr = np.array(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(size, float(arr))
    if arr.ndim == 1:
        arr = np.diag(arr)
    if arr.shape != (size, size):
        raise ConfigError(f"{name} must be a length-{size} diagonal or {size}x{size} matrix, got {arr.shape}")
    return arr


def _is_diagonal(mat):
    return np.count_nonzero(mat - np.diag(np.diag(mat))) == 0


@dataclass(eq=False)
class AllocatorConfig:
    """Allocator weights, gains and bounds; validated on construction.

    Weights accept a scalar, a diagonal vector or a full matrix. The
    ``m > n`` redundancy check can be disabled for square test problems;
    full row rank of the effectiveness matrix is always required.
    """

    effectiveness: np.ndarray
    w_u: np.ndarray = 1.0
    w_s: np.ndarray = 2.0
    w_v: np.ndarray = 1.0
    lam: float = 1.0
    rho: float = 100.0
    u_min: np.ndarray = -0.4
    u_max: np.ndarray = 0.4
    t_s: float = 0.02
    require_redundancy: bool = True

    def __post_init__(self):
        e = np.array(self.effectiveness, dtype=float, ndmin=2)
        n, m = e.shape
        self.effectiveness = e
        self.w_u = _weight(self.w_u, m, "w_u")
        self.w_s = _weight(self.w_s, m, "w_s")
        self.w_v = _weight(self.w_v, n, "w_v")
        self.u_min = np.broadcast_to(np.array(self.u_min, dtype=float), (m,)).copy()
        self.u_max = np.broadcast_to(np.array(self.u_max, dtype=float), (m,)).copy()
        self.lam = float(self.lam)
        self.rho = float(self.rho)
        self.t_s = float(self.t_s)
        if np.any(self.u_min > 0) or np.any(self.u_max < 0):
            raise ConfigError("bounds must satisfy u_min <= 0 <= u_max so a failed actuator can be pinned to 0")
        if self.lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if not self.rho > 0:
            raise ConfigError(f"rho must be > 0, got {self.rho}")
        if not self.t_s > 0:
            raise ConfigError(f"ts must be > 0, got {self.t_s}")
        for name in ("w_u", "w_v"):
            w = getattr(self, name)
            if np.min(np.linalg.eigvalsh(w.T @ w)) <= 0:
                raise ConfigError(f"{name} must be positive definite")
        if np.min(np.linalg.eigvalsh(self.w_s.T @ self.w_s)) < 0:
            raise ConfigError("w_s must be positive semidefinite")
        if self.require_redundancy and not m > n:
            raise ConfigError(f"redundancy requires more actuators than modal channels (m={m}, n={n})")
        if np.linalg.matrix_rank(e) < n:
            raise ConfigError("effectiveness matrix psi B_r must have full row rank n")

    @property
    def n_channels(self):
        return self.effectiveness.shape[0]

    @property
    def n_actuators(self):
        return self.effectiveness.shape[1]


@dataclass(eq=False)
class AllocatorState:
    u_prev: np.ndarray
    status: np.ndarray = field(default=None)

    def __post_init__(self):
        self.u_prev = np.array(self.u_prev, dtype=float).reshape(-1)
        if self.status is None:
            self.status = np.ones(self.u_prev.shape[0], dtype=bool)
        else:
            self.status = np.array(self.status, dtype=bool).reshape(-1)
        if self.status.shape != self.u_prev.shape:
            raise DimensionMismatch("status and u_prev lengths differ")
        self.u_prev[~self.status] = 0.0

    @classmethod
    def initial(cls, cfg):
        return cls(np.zeros(cfg.n_actuators))

    def set_status(self, status):
        self.status = np.array(status, dtype=bool).reshape(self.u_prev.shape)
        self.u_prev[~self.status] = 0.0


@dataclass(eq=False)
class AllocationProblem(qp.QpProblem):
    """Box QP over ``q = [u+; u-]`` plus the stacked least-squares data."""

    stacked_a: np.ndarray = None
    stacked_b: np.ndarray = None


def derive_cost_terms(cfg, state):
    """Return ``(u_d, W)`` with ``W = (W_u^2 + W_s^2)^(1/2)``.

    ``u_d = (W_u^2 + W_s^2)^-1 W_s^2 u_prev``; the two factors commute for
    diagonal weights.
    """
    wu2 = cfg.w_u.T @ cfg.w_u
    ws2 = cfg.w_s.T @ cfg.w_s
    total = wu2 + ws2
    if _is_diagonal(total) and _is_diagonal(ws2):
        diag = np.diag(total)
        u_d = np.diag(ws2) / diag * state.u_prev
        w = np.diag(np.sqrt(diag))
    else:
        u_d = np.linalg.solve(total, ws2 @ state.u_prev)
        evals, evecs = np.linalg.eigh(total)
        w = (evecs * np.sqrt(evals)) @ evecs.T
    return u_d, w


def build_qp(cfg, state, v_t):
    v = np.asarray(v_t, dtype=float).reshape(-1)
    n, m = cfg.effectiveness.shape
    if v.shape[0] != n:
        raise DimensionMismatch(f"virtual control has length {v.shape[0]}, expected {n}")
    if state.u_prev.shape[0] != m:
        raise DimensionMismatch(f"state has {state.u_prev.shape[0]} actuators, config has {m}")
    if not np.all(np.isfinite(v)):
        raise DimensionMismatch("virtual control is not finite")
    u_d, w = derive_cost_terms(cfg, state)
    sa = np.vstack([cfg.rho * cfg.w_v @ cfg.effectiveness, w])
    sb = np.concatenate([cfg.rho * cfg.w_v @ v, w @ u_d])
    ata = sa.T @ sa
    atb = sa.T @ sb
    hessian = np.block([[ata, -ata], [-ata, ata]])
    linear = 2.0 * np.concatenate([-atb, atb]) + cfg.lam
    upper = np.concatenate([cfg.u_max, -cfg.u_min])
    failed = ~state.status
    upper[:m][failed] = 0.0
    upper[m:][failed] = 0.0
    return AllocationProblem(hessian, linear, np.zeros(2 * m), upper, stacked_a=sa, stacked_b=sb)


def allocate(cfg, state, v_t, tol=qp.DEFAULT_TOL):
    """Sparse actuator command for virtual control ``v_t``; updates ``state.u_prev``."""
    problem = build_qp(cfg, state, v_t)
    m = cfg.n_actuators
    prev = state.u_prev
    q0 = np.concatenate([np.maximum(prev, 0.0), np.maximum(-prev, 0.0)])
    try:
        sol = qp._solve(problem, tol, None, q0)
    except MaxIterations as exc:
        best = exc.solution
        raise SolverFailure(str(exc), iterations=best.iterations,
                            kkt_residual=best.kkt_residual) from exc
    q = sol.point.copy()
    plus, minus = q[:m], q[m:]
    overlap = np.minimum(plus, minus)
    tiny = (overlap > 0) & (overlap <= COMPLEMENTARITY_CLAMP)
    plus[tiny & (plus <= minus)] = 0.0
    minus[tiny & (minus < plus)] = 0.0
    u = np.clip(plus - minus, cfg.u_min, cfg.u_max)
    u[~state.status] = 0.0
    state.u_prev = u.copy()
    return u


def fixed_allocate(effectiveness, v_t):
    """Minimum-norm solution ``pinv(E) v``; bounds and failures are ignored."""
    e = np.array(effectiveness, dtype=float, ndmin=2)
    if np.linalg.matrix_rank(e) < e.shape[0]:
        raise RankDeficient("effectiveness matrix is not full row rank")
    return np.linalg.pinv(e) @ np.asarray(v_t, dtype=float).reshape(-1)
