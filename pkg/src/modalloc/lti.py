"""Continuous-time LTI models, real modal form and exact ZOH stepping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .errors import (
    DimensionMismatch,
    InvalidTarget,
    NonFiniteState,
    RepeatedEigenvalue,
    SingularTransform,
)

EIG_SEPARATION_RTOL = 1e-9
PSI_COND_MAX = 1e12


def _as_matrix(value, name, rows=None, cols=None):
    arr = np.array(value, dtype=float, ndmin=2)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be a 2-D array, got shape {arr.shape}")
    if rows is not None and arr.shape[0] != rows:
        raise DimensionMismatch(f"{name} has {arr.shape[0]} rows, expected {rows}")
    if cols is not None and arr.shape[1] != cols:
        raise DimensionMismatch(f"{name} has {arr.shape[1]} columns, expected {cols}")
    return arr


def _zoh(a, b, dt):
    n, m = b.shape
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = a * dt
    aug[:n, n:] = b * dt
    phi = expm(aug)
    return phi[:n, :n], phi[:n, n:]


@dataclass(eq=False)
class StateSpaceModel:
    """Plant ``x' = A x + B u``, ``y = C x`` (no feedthrough).

    ``state`` is the current state vector and is advanced in place by
    :func:`simulate_step`.
    """

    a_matrix: np.ndarray
    b_matrix: np.ndarray
    c_matrix: np.ndarray
    state: np.ndarray | None = None
    _zoh_cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        a = _as_matrix(self.a_matrix, "A")
        n = a.shape[0]
        if a.shape[1] != n:
            raise DimensionMismatch(f"A must be square, got shape {a.shape}")
        self.a_matrix = a
        self.b_matrix = _as_matrix(self.b_matrix, "B", rows=n)
        self.c_matrix = _as_matrix(self.c_matrix, "C", cols=n)
        if self.state is None:
            self.state = np.zeros(n)
        else:
            self.state = np.array(self.state, dtype=float).reshape(-1)
            if self.state.shape[0] != n:
                raise DimensionMismatch(f"state has length {self.state.shape[0]}, expected {n}")

    @property
    def n_states(self):
        return self.a_matrix.shape[0]

    @property
    def n_inputs(self):
        return self.b_matrix.shape[1]

    @property
    def n_outputs(self):
        return self.c_matrix.shape[0]

    def discretize(self, dt):
        """Return the cached ZOH pair ``(Phi, Gamma)`` for step ``dt``."""
        key = float(dt)
        if key not in self._zoh_cache:
            self._zoh_cache[key] = _zoh(self.a_matrix, self.b_matrix, key)
        return self._zoh_cache[key]

    def output(self, state=None):
        x = self.state if state is None else state
        return self.c_matrix @ x

    def frequency_response(self, omegas):
        """Complex response ``C (jw I - A)^-1 B`` stacked as ``(len(omegas), p, m)``."""
        n = self.n_states
        eye = np.eye(n)
        out = np.empty((len(omegas), self.n_outputs, self.n_inputs), dtype=complex)
        for k, w in enumerate(omegas):
            out[k] = self.c_matrix @ np.linalg.solve(1j * w * eye - self.a_matrix, self.b_matrix)
        return out

    def copy(self):
        return StateSpaceModel(self.a_matrix.copy(), self.b_matrix.copy(),
                               self.c_matrix.copy(), self.state.copy())


@dataclass(frozen=True)
class ModeRecord:
    sigma: float
    omega: float
    frequency_hz: float
    damping_ratio: float
    block_index: int

    @property
    def size(self):
        return 1 if self.omega == 0.0 else 2

    @classmethod
    def from_pole(cls, sigma, omega, block_index):
        mag = np.hypot(sigma, omega)
        damping = -sigma / mag if mag > 0 else 0.0
        return cls(float(sigma), float(omega), float(omega / (2 * np.pi)),
                   float(damping), int(block_index))


@dataclass(eq=False)
class ModalRealization:
    """Real block-diagonal form ``Lambda = psi A psi^-1`` with ``z = psi x``."""

    lambda_matrix: np.ndarray
    psi: np.ndarray
    modes: list

    @property
    def psi_inv(self):
        return np.linalg.inv(self.psi)

    def transform(self, model):
        """Modal-coordinate model ``(Lambda, psi B, C psi^-1)``."""
        psi_inv = self.psi_inv
        return StateSpaceModel(self.lambda_matrix.copy(), self.psi @ model.b_matrix,
                               model.c_matrix @ psi_inv, self.psi @ model.state)

    def mode_nearest(self, frequency_hz):
        return min(range(len(self.modes)),
                   key=lambda i: (abs(self.modes[i].frequency_hz - frequency_hz), i))


def _normalize_eigvec(v):
    v = v / np.linalg.norm(v)
    k = int(np.argmax(np.abs(v)))
    return v * (np.conj(v[k]) / abs(v[k]))


def eig_real_modal(model):
    """Real modal realization of ``model.a_matrix``.

    Complex pairs ``sigma +/- j omega`` become 2x2 blocks
    ``[[sigma, omega], [-omega, sigma]]`` whose columns of ``psi^-1`` are the
    real and imaginary parts of the eigenvector for ``sigma + j omega``.
    Blocks are ordered real modes first, then by ascending frequency, ties by
    ascending ``sigma``.

    Raises
    ------
    RepeatedEigenvalue
        If two eigenvalues are closer than ``1e-9`` relative.
    SingularTransform
        If ``cond(psi) > 1e12``.
    """
    a = model.a_matrix
    n = a.shape[0]
    evals, evecs = np.linalg.eig(a)
    scale = max(1.0, float(np.max(np.abs(evals)))) if n else 1.0
    for i in range(n):
        for j in range(i + 1, n):
            if abs(evals[i] - evals[j]) <= EIG_SEPARATION_RTOL * scale:
                raise RepeatedEigenvalue(
                    f"eigenvalues {evals[i]:.6g} and {evals[j]:.6g} are not separated")

    imag_tol = 1e-12 * scale
    picks = []
    for k, lam in enumerate(evals):
        if abs(lam.imag) <= imag_tol:
            picks.append((0.0, lam.real, k))
        elif lam.imag > 0:
            picks.append((lam.imag, lam.real, k))
    picks.sort(key=lambda t: (t[0], t[1]))

    psi_inv = np.zeros((n, n))
    lam_mat = np.zeros((n, n))
    modes = []
    col = 0
    for omega, sigma, k in picks:
        v = _normalize_eigvec(evecs[:, k])
        if omega == 0.0:
            psi_inv[:, col] = v.real
            lam_mat[col, col] = sigma
            modes.append(ModeRecord.from_pole(sigma, 0.0, col))
            col += 1
        else:
            psi_inv[:, col] = v.real
            psi_inv[:, col + 1] = v.imag
            lam_mat[col:col + 2, col:col + 2] = [[sigma, omega], [-omega, sigma]]
            modes.append(ModeRecord.from_pole(sigma, omega, col))
            col += 2
    if col != n:
        raise SingularTransform("eigenvalue pairing failed; A may be defective")

    cond = np.linalg.cond(psi_inv)
    if not np.isfinite(cond) or cond > PSI_COND_MAX:
        raise SingularTransform(f"modal transformation condition number {cond:.3g} exceeds 1e12")
    return ModalRealization(lam_mat, np.linalg.inv(psi_inv), modes)


def simulate_step(model, input, dt):
    """Advance ``model.state`` by one exact ZOH step and return ``(x_new, y_new)``."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    u = np.asarray(input, dtype=float).reshape(-1)
    if u.shape[0] != model.n_inputs:
        raise DimensionMismatch(f"input has length {u.shape[0]}, expected {model.n_inputs}")
    phi, gamma = model.discretize(dt)
    x = phi @ model.state + gamma @ u
    if not np.all(np.isfinite(x)):
        raise NonFiniteState("plant state overflowed")
    model.state = x
    return x.copy(), model.c_matrix @ x


@dataclass(eq=False)
class DynamicController:
    """Output-feedback controller ``xk' = Ak xk + Bk y``, ``v = Ck xk + Dk y``."""

    a_k: np.ndarray
    b_k: np.ndarray
    c_k: np.ndarray
    d_k: np.ndarray
    state: np.ndarray | None = None
    _zoh_cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        self.d_k = _as_matrix(self.d_k, "Dk")
        n_out, p = self.d_k.shape
        a_k = np.array(self.a_k, dtype=float)
        nk = 0 if a_k.size == 0 else a_k.shape[0]
        self.a_k = a_k.reshape(nk, nk)
        self.b_k = np.array(self.b_k, dtype=float).reshape(nk, p)
        self.c_k = np.array(self.c_k, dtype=float).reshape(n_out, nk)
        if self.state is None:
            self.state = np.zeros(nk)
        else:
            self.state = np.array(self.state, dtype=float).reshape(nk)

    @classmethod
    def static(cls, gain):
        gain = _as_matrix(gain, "Dk")
        return cls(np.zeros((0, 0)), np.zeros((0, gain.shape[1])),
                   np.zeros((gain.shape[0], 0)), gain)

    @property
    def n_states(self):
        return self.a_k.shape[0]

    def reset(self):
        self.state = np.zeros(self.n_states)


def controller_step(ctrl, measurement, dt):
    """Return ``v = Ck xk + Dk y`` and advance ``xk`` with ``y`` held over ``dt``."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    y = np.asarray(measurement, dtype=float).reshape(-1)
    if y.shape[0] != ctrl.d_k.shape[1]:
        raise DimensionMismatch(f"measurement has length {y.shape[0]}, expected {ctrl.d_k.shape[1]}")
    v = ctrl.c_k @ ctrl.state + ctrl.d_k @ y
    if ctrl.n_states:
        key = float(dt)
        if key not in ctrl._zoh_cache:
            ctrl._zoh_cache[key] = _zoh(ctrl.a_k, ctrl.b_k, key)
        phi, gamma = ctrl._zoh_cache[key]
        x = phi @ ctrl.state + gamma @ y
        if not np.all(np.isfinite(x)):
            raise NonFiniteState("controller state overflowed")
        ctrl.state = x
    return v


def modal_state_feedback_gain(modal, target_damping):
    """Block-diagonal gain ``K`` for ``v = -K z`` that moves selected modes.

    ``target_damping`` maps mode index (position in ``modal.modes``) to a
    target ratio, or is a sequence aligned with ``modal.modes`` where ``None``
    leaves the mode untouched. Each targeted block gets its real part moved to
    ``-zeta * |lambda|``; the imaginary part is preserved.
    """
    if isinstance(target_damping, dict):
        targets = dict(target_damping)
    else:
        targets = {i: t for i, t in enumerate(target_damping) if t is not None}
    n = modal.lambda_matrix.shape[0]
    gain = np.zeros((n, n))
    for idx, zeta in targets.items():
        if not (isinstance(idx, (int, np.integer)) and 0 <= idx < len(modal.modes)):
            raise InvalidTarget(f"no mode with index {idx!r}")
        mode = modal.modes[idx]
        if mode.omega != 0.0 and not 0.0 < zeta < 1.0:
            raise InvalidTarget(f"target damping {zeta} for mode {idx} is outside (0, 1)")
        new_sigma = -zeta * np.hypot(mode.sigma, mode.omega)
        j, s = mode.block_index, mode.size
        gain[j:j + s, j:j + s] = (mode.sigma - new_sigma) * np.eye(s)
    return gain
