"""Prony analysis of sampled ringdown signals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IllConditioned, NoMatchingMode, OrderTooLarge

COND_MAX = 1e12


@dataclass(frozen=True)
class SampledSignal:
    values: np.ndarray
    dt: float
    start_time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float).reshape(-1))
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")

    @classmethod
    def from_series(cls, t, y, t_start=None, t_stop=None):
        """Window ``(t, y)`` to ``t_start <= t <= t_stop`` on a uniform grid."""
        t = np.asarray(t, dtype=float)
        y = np.asarray(y, dtype=float)
        keep = np.ones(t.shape, dtype=bool)
        if t_start is not None:
            keep &= t >= t_start - 1e-9
        if t_stop is not None:
            keep &= t <= t_stop + 1e-9
        t, y = t[keep], y[keep]
        if t.size < 2:
            raise OrderTooLarge("window holds fewer than two samples")
        return cls(y, float(np.median(np.diff(t))), float(t[0]))

    def decimate(self, factor):
        factor = int(factor)
        if factor <= 1:
            return self
        return SampledSignal(self.values[::factor], self.dt * factor, self.start_time)


@dataclass(frozen=True)
class PronyMode:
    frequency_hz: float
    damping_ratio_percent: float
    amplitude: float
    phase: float


@dataclass(frozen=True)
class RingdownEstimate:
    modes: list
    fit_error: float


def prony_fit(signal, order):
    """Fit ``order`` damped modes (complex pairs) to a ringdown.

    The signal mean is removed and the linear prediction carries a constant
    column, so a residual offset is absorbed without entering the fitted
    poles. Modes are reported one per
    conjugate pair or real pole, sorted by amplitude.

    Raises
    ------
    OrderTooLarge
        If fewer than ``4 * order`` samples are available.
    IllConditioned
        If the linear-prediction matrix has condition number above 1e12.
    """
    order = int(order)
    if order < 1:
        raise OrderTooLarge("order must be >= 1")
    y = signal.values - np.mean(signal.values)
    n = y.size
    lags = 2 * order
    if n < 2 * lags:
        raise OrderTooLarge(f"{n} samples cannot support order {order}")

    rows = n - lags
    pred = np.empty((rows, lags + 1))
    for j in range(1, lags + 1):
        pred[:, j - 1] = y[lags - j:lags - j + rows]
    pred[:, lags] = 1.0
    rhs = -y[lags:]
    cond = np.linalg.cond(pred)
    if not np.isfinite(cond) or cond > COND_MAX:
        raise IllConditioned(f"linear-prediction matrix condition number {cond:.3g} exceeds 1e12")
    sol, *_ = np.linalg.lstsq(pred, rhs, rcond=None)
    coef = sol[:lags]
    roots = np.roots(np.concatenate([[1.0], coef]))
    roots = roots[np.abs(roots) > 1e-300]

    k = np.arange(n)
    basis = np.column_stack([roots[None, :] ** k[:, None], np.ones(n)])
    amps, *_ = np.linalg.lstsq(basis, y.astype(complex), rcond=None)
    fitted = (basis @ amps).real
    norm = np.linalg.norm(y)
    fit_error = float(np.linalg.norm(y - fitted) / norm) if norm > 0 else 0.0

    modes = []
    dt = signal.dt
    for z, h in zip(roots, amps[:-1]):
        imag_tol = 1e-10 * abs(z)
        if z.imag < -imag_tol:
            continue
        with np.errstate(invalid="ignore", divide="ignore"):
            s = np.log(z) / dt
        if z.imag > imag_tol:
            amplitude, phase = 2.0 * abs(h), float(np.angle(h))
        else:
            amplitude, phase = abs(h), float(np.angle(h.real + 0j))
        mag = abs(s)
        zeta = -s.real / mag * 100.0 if mag > 0 else 0.0
        modes.append(PronyMode(float(abs(s.imag) / (2 * np.pi)), float(zeta),
                               float(amplitude), phase))
    modes.sort(key=lambda md: -md.amplitude)
    return RingdownEstimate(modes, min(max(fit_error, 0.0), 1.0))


def critical_mode_damping(estimate, target_hz, tolerance_hz):
    """Damping (%) of the largest-amplitude mode within ``tolerance_hz`` of ``target_hz``."""
    band = [md for md in estimate.modes if abs(md.frequency_hz - target_hz) <= tolerance_hz]
    if not band:
        raise NoMatchingMode(f"no fitted mode within {tolerance_hz} Hz of {target_hz} Hz")
    return max(band, key=lambda md: md.amplitude).damping_ratio_percent
