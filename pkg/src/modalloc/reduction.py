"""Gramians, Hankel singular values and balanced truncation."""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from .errors import NotHurwitz, OrderTooLarge
from .lti import StateSpaceModel

DEFAULT_THRESHOLD = 1e-2


@dataclass(frozen=True)
class HankelSpectrum:
    values: np.ndarray
    suggested_order: int


def _check_hurwitz(a):
    eigs = np.linalg.eigvals(a)
    if eigs.size and np.max(eigs.real) >= 0:
        raise NotHurwitz(f"A has an eigenvalue with real part {np.max(eigs.real):.6g} >= 0")


def solve_lyapunov(a, q):
    """Solve ``A P + P A^T + Q = 0`` for a Hurwitz ``A``."""
    a = np.asarray(a, dtype=float)
    q = np.asarray(q, dtype=float)
    _check_hurwitz(a)
    p = solve_continuous_lyapunov(a, -q)
    return 0.5 * (p + p.T)


def gramians(model):
    b, c = model.b_matrix, model.c_matrix
    wc = solve_lyapunov(model.a_matrix, b @ b.T)
    wo = solve_lyapunov(model.a_matrix.T, c.T @ c)
    return wc, wo


def _psd_factor(m):
    # eigh-based factor tolerates semidefinite gramians where Cholesky fails
    w, v = np.linalg.eigh(m)
    return v * np.sqrt(np.clip(w, 0.0, None))


def _square_root_balance(model):
    wc, wo = gramians(model)
    lc = _psd_factor(wc)
    lo = _psd_factor(wo)
    u, s, vt = np.linalg.svd(lo.T @ lc)
    return lc, lo, u, s, vt


def suggest_order(values, threshold=DEFAULT_THRESHOLD):
    values = np.asarray(values)
    if values.size == 0 or values[0] <= 0:
        return 0
    below = np.nonzero(values / values[0] < threshold)[0]
    return int(below[0]) if below.size else int(values.size)


def hankel_singular_values(model, threshold=DEFAULT_THRESHOLD):
    """Hankel singular values, descending, with a threshold-based order suggestion.

    ``suggested_order`` is the smallest ``r`` with ``values[r] / values[0] < threshold``.
    """
    wc, wo = gramians(model)
    eigs = np.linalg.eigvals(wc @ wo).real
    values = np.sort(np.sqrt(np.clip(eigs, 0.0, None)))[::-1]
    return HankelSpectrum(values, suggest_order(values, threshold))


def balanced_projection(model, order):
    """Square-root balancing projections ``(T, W, hsv)`` for a truncation to ``order``.

    The reduced model is ``(W^T A T, W^T B, C T)``, and ``x_r = W^T x`` maps
    full states onto reduced ones.
    """
    n = model.n_states
    if not 1 <= order <= n:
        raise OrderTooLarge(f"order must be in [1, {n}], got {order}")
    lc, lo, u, s, vt = _square_root_balance(model)
    if s[order - 1] <= 1e-14 * s[0]:
        raise OrderTooLarge(f"order {order} keeps a zero Hankel singular value; "
                            "the retained part is not minimal")
    scale = 1.0 / np.sqrt(s[:order])
    t = lc @ vt[:order].T * scale
    w = lo @ u[:, :order] * scale
    return t, w, s


def balanced_truncate(model, order):
    """Order-``order`` balanced truncation of a stable model.

    ``order == n`` returns the balanced realization when it exists (all
    Hankel values positive), otherwise an unchanged copy.
    """
    n = model.n_states
    if order > n:
        raise OrderTooLarge(f"order {order} exceeds model order {n}")
    if order == n:
        _check_hurwitz(model.a_matrix)
        try:
            t, w, _ = balanced_projection(model, order)
        except OrderTooLarge:
            return model.copy()
    else:
        t, w, _ = balanced_projection(model, order)
    return StateSpaceModel(w.T @ model.a_matrix @ t, w.T @ model.b_matrix,
                           model.c_matrix @ t, w.T @ model.state)


def truncation_error_bound(spectrum, order):
    return 2.0 * float(np.sum(spectrum.values[order:]))
