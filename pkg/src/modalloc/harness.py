"""Closed-loop scenarios with actuator fault schedules, and a synthetic benchmark.

The loop at each step ``t_s``: measure ``y``, form the virtual control ``v``
(modal state feedback on the reduced model, or a dynamic output-feedback
controller), allocate it to actuators (sparse QP, fixed pseudo-inverse with
hard clamp, or none), mask failed actuators, and advance the plant by an
exact ZOH step.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import lti, reduction, ringdown
from .allocator import AllocatorConfig, AllocatorState, allocate, fixed_allocate
from .errors import (
    ConfigError,
    IllConditioned,
    InsufficientRedundancy,
    NoMatchingMode,
    NonFiniteState,
    OrderTooLarge,
    Unstable,
)

# (frequency Hz, damping ratio) of the low-frequency modes of the modified WECC system
DEFAULT_MODES = ((0.327, 0.0699), (0.442, 0.1162), (0.564, 0.0098))
CRITICAL_HZ = 0.564
DEFAULT_ACTUATORS = 10
DEFAULT_BOUND = 0.4
DEFAULT_FAST_POLES = (-3.0, -5.0, -8.0, -12.0)
DAMPING_REQUIREMENT = 0.06
DESIGN_DAMPING = 0.08
# initial critical-mode amplitude per fault cycle, calibrated on the benchmark
AMPLITUDE_PER_CYCLE = 1.0
ALLOCATION_MODES = ("sparse", "fixed", "none")
# fault cycles for the small and the saturating scenario; sweeps use the small one
SMALL_FAULT_CYCLES = 1
LARGE_FAULT_CYCLES = 6
DEFAULT_FRACTIONS = (0.0, 0.1, 0.3, 0.5, 0.7, 0.8)


def oscillatory_block(frequency_hz, damping):
    omega = 2 * np.pi * frequency_hz
    sigma = -damping * omega / np.sqrt(1.0 - damping ** 2)
    return np.array([[sigma, omega], [-omega, sigma]])


def make_benchmark(seed=0, modes=DEFAULT_MODES, m_actuators=DEFAULT_ACTUATORS,
                   fast_poles=DEFAULT_FAST_POLES, critical_hz=CRITICAL_HZ,
                   bound=DEFAULT_BOUND, reference_amplitude=AMPLITUDE_PER_CYCLE,
                   influence_cap=0.3, strength_range=(0.15, 1.0)):
    """Seeded modal-form plant standing in for a large interconnected grid.

    Oscillatory blocks come first in the state vector, one per ``(f_hz,
    zeta)``, followed by weakly coupled fast real poles. Actuator columns are
    random with log-spread strengths; on the critical mode each column's
    norm is capped so that a single actuator, under a gain that keeps its
    command within ``bound`` at ``reference_amplitude``, cannot reach the
    damping requirement. The single measurement row observes the critical
    mode most strongly.
    """
    n_osc = len(modes)
    if m_actuators <= 2 * n_osc:
        raise InsufficientRedundancy(
            f"need more than {2 * n_osc} actuators for {n_osc} oscillatory modes, got {m_actuators}")
    rng = np.random.default_rng(seed)
    n = 2 * n_osc + len(fast_poles)
    a = np.zeros((n, n))
    for k, (f, zeta) in enumerate(modes):
        a[2 * k:2 * k + 2, 2 * k:2 * k + 2] = oscillatory_block(f, zeta)
    for k, pole in enumerate(fast_poles):
        a[2 * n_osc + k, 2 * n_osc + k] = pole
    crit = int(np.argmin([abs(f - critical_hz) for f, _ in modes]))

    lo, hi = strength_range
    strength = np.exp(rng.uniform(np.log(lo), np.log(hi), m_actuators))
    b = np.zeros((n, m_actuators))
    b[:2 * n_osc] = rng.normal(size=(2 * n_osc, m_actuators)) / np.sqrt(2.0)
    b[:2 * n_osc] *= strength
    b[2 * n_osc:] = 0.05 * rng.normal(size=(len(fast_poles), m_actuators))

    crit_rows = slice(2 * crit, 2 * crit + 2)
    cap = influence_cap * single_actuator_norm_limit(modes[crit], bound, reference_amplitude)
    norms = np.linalg.norm(b[crit_rows], axis=0)
    scale = np.minimum(1.0, cap / norms)
    b[crit_rows] *= scale

    c = np.zeros((1, n))
    for k in range(n_osc):
        c[0, 2 * k] = 1.0 if k == crit else 0.4
    c[0, 2 * n_osc:] = 0.05
    plant = lti.StateSpaceModel(a, b, c)
    metadata = {
        "seed": int(seed),
        "modes": [[float(f), float(z)] for f, z in modes],
        "fast_poles": [float(p) for p in fast_poles],
        "m_actuators": int(m_actuators),
        "critical_mode": crit,
        "critical_hz": float(modes[crit][0]),
        "bound": float(bound),
        "reference_amplitude": float(reference_amplitude),
        "critical_column_cap": float(cap),
    }
    return plant, metadata


def single_actuator_norm_limit(mode, bound, amplitude, requirement=DAMPING_REQUIREMENT):
    """Largest critical-mode column norm a lone actuator may have.

    With feedback ``u = -g c^T z / |c|`` and ``g <= bound / amplitude`` the
    block's real part moves by ``g |c| / 2``; the limit keeps that short of
    the shift needed for ``requirement``.
    """
    f, zeta = mode
    block = oscillatory_block(f, zeta)
    sigma, omega = block[0, 0], block[0, 1]
    needed = -requirement * omega / np.sqrt(1 - requirement ** 2) - sigma
    return 2.0 * abs(needed) * amplitude / bound


def single_actuator_damping(modal_block, column, gain):
    """Critical-block damping under ``u = -gain c^T z / |c|`` from one actuator."""
    c = np.asarray(column, dtype=float)
    closed = modal_block - gain * np.outer(c, c) / np.linalg.norm(c)
    eig = np.linalg.eigvals(closed)
    return float(np.min(-eig.real / np.abs(eig)))


@dataclass(eq=False)
class PlantDesign:
    """Reduced model, its modal form and the modal effectiveness ``psi B_r``."""

    plant: lti.StateSpaceModel
    reduced: lti.StateSpaceModel
    projection: np.ndarray  # x_r = projection @ x
    modal: lti.ModalRealization
    spectrum: reduction.HankelSpectrum

    @property
    def effectiveness(self):
        return self.modal.psi @ self.reduced.b_matrix

    @property
    def modal_estimator(self):
        """Map from full plant state to reduced modal coordinates."""
        return self.modal.psi @ self.projection


def design_plant(plant, reduced_order=None, threshold=reduction.DEFAULT_THRESHOLD):
    spectrum = reduction.hankel_singular_values(plant, threshold)
    order = spectrum.suggested_order if reduced_order is None else int(reduced_order)
    if order > plant.n_states:
        raise OrderTooLarge(f"reduced order {order} exceeds plant order {plant.n_states}")
    if order == plant.n_states:
        reduced = plant.copy()
        projection = np.eye(order)
    else:
        t, w, _ = reduction.balanced_projection(plant, order)
        projection = w.T
        reduced = lti.StateSpaceModel(w.T @ plant.a_matrix @ t, w.T @ plant.b_matrix,
                                      plant.c_matrix @ t)
    modal = lti.eig_real_modal(reduced)
    return PlantDesign(plant, reduced, projection, modal, spectrum)


def default_modal_weights(modal):
    """``w_v`` diagonal doubling per block in modal order: 2, 4, 8, ..."""
    weights = []
    for k, mode in enumerate(modal.modes):
        weights += [2.0 ** (k + 1)] * mode.size
    return np.array(weights)


def design_gain(modal, design_damping=DESIGN_DAMPING, modes=None):
    """Modal feedback gain raising every under-damped oscillatory mode to ``design_damping``."""
    targets = {}
    for i, mode in enumerate(modal.modes):
        if mode.omega == 0.0 or (modes is not None and i not in modes):
            continue
        if mode.damping_ratio < design_damping:
            targets[i] = design_damping
    return lti.modal_state_feedback_gain(modal, targets)


@dataclass
class Disturbance:
    """Initial-condition disturbance.

    ``kind="mode"``: the plant starts on the real part of the eigenvector of
    the mode nearest ``frequency_hz``, scaled so the reduced modal estimate of
    that mode has norm ``magnitude``. ``kind="state"``: ``vector`` is the
    initial state (times ``magnitude``).
    """

    magnitude: float = AMPLITUDE_PER_CYCLE
    kind: str = "mode"
    frequency_hz: float = CRITICAL_HZ
    vector: np.ndarray | None = None

    @classmethod
    def from_cycles(cls, cycles, **kwargs):
        return cls(magnitude=AMPLITUDE_PER_CYCLE * cycles, **kwargs)

    def initial_state(self, design):
        if self.kind == "state":
            x0 = np.asarray(self.vector, dtype=float).reshape(-1)
            if x0.shape[0] != design.plant.n_states:
                raise ConfigError("disturbance vector length does not match plant order")
            return self.magnitude * x0
        if self.kind != "mode":
            raise ConfigError(f"unknown disturbance kind {self.kind!r}")
        evals, evecs = np.linalg.eig(design.plant.a_matrix)
        target = 2 * np.pi * self.frequency_hz
        k = int(np.argmin(np.abs(np.abs(evals.imag) - target) + (evals.imag < 0)))
        direction = evecs[:, k].real
        idx = design.modal.mode_nearest(self.frequency_hz)
        mode = design.modal.modes[idx]
        z = design.modal_estimator @ direction
        amp = np.linalg.norm(z[mode.block_index:mode.block_index + mode.size])
        return self.magnitude * direction / amp


@dataclass
class Scenario:
    design: PlantDesign
    allocator_cfg: AllocatorConfig
    allocation_mode: str = "sparse"
    controller: lti.DynamicController | None = None
    gain: np.ndarray | None = None
    disturbance: Disturbance = field(default_factory=Disturbance)
    fault_schedule: list = field(default_factory=list)
    t_end: float = 20.0
    critical_hz: float = CRITICAL_HZ
    band_hz: float = 0.05
    prony_start: float = 1.0
    prony_order: int | None = None
    prony_decimate: int = 5
    output_index: int = 0

    def __post_init__(self):
        if self.allocation_mode not in ALLOCATION_MODES:
            raise ConfigError(f"mode must be one of {ALLOCATION_MODES}, got {self.allocation_mode!r}")
        m = self.allocator_cfg.n_actuators
        for item in self.fault_schedule:
            idx, t_fail, t_rec = item
            if not 0 <= int(idx) < m:
                raise ConfigError(f"failure actuator index {idx} out of range [0, {m})")
            if not 0 <= t_fail <= t_rec <= self.t_end:
                raise ConfigError(f"failure times ({t_fail}, {t_rec}) outside [0, t_end={self.t_end}]")
        if self.gain is None and self.controller is None:
            self.gain = design_gain(self.design.modal)

    @property
    def n_steps(self):
        return int(round(self.t_end / self.allocator_cfg.t_s))

    def status_at(self, t):
        status = np.ones(self.allocator_cfg.n_actuators, dtype=bool)
        for idx, t_fail, t_rec in self.fault_schedule:
            if t_fail <= t < t_rec:
                status[int(idx)] = False
        return status


@dataclass
class ScenarioResult:
    t: np.ndarray
    outputs: np.ndarray
    virtual: np.ndarray
    commands: np.ndarray
    requested: np.ndarray
    status: np.ndarray
    critical_damping: float
    prony: ringdown.RingdownEstimate | None
    saturation_events: int
    mode: str

    @property
    def command_l1(self):
        return np.sum(np.abs(self.commands), axis=1)

    @property
    def nonzero_count(self):
        return np.count_nonzero(self.commands, axis=1)

    def metrics(self):
        return {
            "mode": self.mode,
            "critical_damping_pct": self.critical_damping,
            "mean_command_l1": float(np.mean(self.command_l1)),
            "mean_nonzero_commands": float(np.mean(self.nonzero_count)),
            "saturation_events": int(self.saturation_events),
            "prony_fit_error": float(self.prony.fit_error) if self.prony else float("nan"),
        }


def measure_damping(t, y, critical_hz, band_hz, t_start=1.0, order=None, decimate=5,
                    expected_modes=3):
    """Prony damping (%) of the mode near ``critical_hz`` over ``t >= t_start``.

    Starts at ``2 * expected_modes`` pairs (or ``order``) and lowers the order
    while the fit is ill-conditioned or misses the band.
    """
    signal = ringdown.SampledSignal.from_series(t, y, t_start).decimate(decimate)
    start = order if order is not None else 2 * expected_modes
    last_error = None
    for k in range(start, 0, -1):
        try:
            est = ringdown.prony_fit(signal, k)
            return ringdown.critical_mode_damping(est, critical_hz, band_hz), est
        except (IllConditioned, OrderTooLarge, NoMatchingMode) as exc:
            last_error = exc
    raise last_error


def run(scenario):
    """Simulate a scenario; deterministic for identical inputs."""
    design = scenario.design
    cfg = scenario.allocator_cfg
    ts = cfg.t_s
    n_steps = scenario.n_steps
    plant = design.plant.copy()
    plant.state = scenario.disturbance.initial_state(design)
    estimator = design.modal_estimator
    effectiveness = cfg.effectiveness
    ctrl = scenario.controller
    if ctrl is not None:
        ctrl = lti.DynamicController(ctrl.a_k, ctrl.b_k, ctrl.c_k, ctrl.d_k)
    state = AllocatorState.initial(cfg)
    n, m = effectiveness.shape
    p = plant.n_outputs

    t = np.arange(n_steps) * ts
    outputs = np.zeros((n_steps, p))
    virtual = np.zeros((n_steps, n))
    commands = np.zeros((n_steps, m))
    requested = np.zeros((n_steps, m))
    status_log = np.zeros((n_steps, m), dtype=bool)
    saturations = 0
    tol = 1e-12 * np.maximum(1.0, np.abs(cfg.u_max))

    for k in range(n_steps):
        y = plant.output()
        if ctrl is not None:
            v = lti.controller_step(ctrl, y, ts)
        else:
            v = -scenario.gain @ (estimator @ plant.state)
        status = scenario.status_at(t[k])
        if scenario.allocation_mode == "sparse":
            state.set_status(status)
            u_req = allocate(cfg, state, v)
            saturations += int(np.count_nonzero((u_req >= cfg.u_max - tol) & (cfg.u_max > 0)))
            saturations += int(np.count_nonzero((u_req <= cfg.u_min + tol) & (cfg.u_min < 0)))
            u = u_req.copy()
        elif scenario.allocation_mode == "fixed":
            u_req = fixed_allocate(effectiveness, v)
            saturations += int(np.count_nonzero((u_req > cfg.u_max) | (u_req < cfg.u_min)))
            u = np.clip(u_req, cfg.u_min, cfg.u_max)
        else:
            u_req = np.zeros(m)
            u = u_req.copy()
        u[~status] = 0.0
        outputs[k] = y
        virtual[k] = v
        commands[k] = u
        requested[k] = u_req
        status_log[k] = status
        try:
            lti.simulate_step(plant, u, ts)
        except NonFiniteState as exc:
            raise Unstable(f"closed loop diverged at t={t[k] + ts:.4g} s", time=t[k] + ts) from exc

    expected = sum(1 for md in design.modal.modes if md.omega != 0.0)
    try:
        damping, est = measure_damping(t, outputs[:, scenario.output_index], scenario.critical_hz,
                                       scenario.band_hz, scenario.prony_start,
                                       scenario.prony_order, scenario.prony_decimate,
                                       max(expected, 1))
    except (IllConditioned, OrderTooLarge, NoMatchingMode):
        damping, est = float("nan"), None
    return ScenarioResult(t, outputs, virtual, commands, requested, status_log,
                          float(damping), est, saturations, scenario.allocation_mode)


def closed_loop_matrix(scenario, status=None):
    """Linear closed-loop ``A`` with the pseudo-inverse allocation (bounds inactive)."""
    design = scenario.design
    e = scenario.allocator_cfg.effectiveness
    mask = np.ones(e.shape[1]) if status is None else np.asarray(status, dtype=float)
    alloc = np.diag(mask) @ np.linalg.pinv(e)
    return design.plant.a_matrix - design.plant.b_matrix @ alloc @ scenario.gain @ design.modal_estimator


def eigen_damping_near(a, frequency_hz, band_hz=0.05):
    """Damping ratio (%) of the eigenvalue of ``a`` nearest ``frequency_hz``."""
    eig = np.linalg.eigvals(a)
    eig = eig[eig.imag > 0]
    freq = eig.imag / (2 * np.pi)
    k = int(np.argmin(np.abs(freq - frequency_hz)))
    if abs(freq[k] - frequency_hz) > band_hz:
        raise NoMatchingMode(f"no eigenvalue within {band_hz} Hz of {frequency_hz} Hz")
    return float(-eig[k].real / abs(eig[k]) * 100.0)


def worst_case_failures(effectiveness, count):
    """Indices of the ``count`` actuators with the largest effectiveness column norms."""
    norms = np.linalg.norm(effectiveness, axis=0)
    order = sorted(range(norms.size), key=lambda j: (-norms[j], j))
    return sorted(order[:count])


def _threads():
    raw = os.environ.get("MODAL_ALLOC_THREADS")
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise ConfigError(f"MODAL_ALLOC_THREADS must be an integer, got {raw!r}") from exc


def run_failure_sweep(base, failure_fractions):
    """Critical-mode damping for sparse, fixed and no allocation per failure fraction.

    Failed actuators are chosen worst-case (largest ``psi B_r`` column norm
    first) and fail for the whole run. Returns a list of row dicts in input
    order.
    """
    m = base.allocator_cfg.n_actuators
    jobs = []
    for frac in failure_fractions:
        if not 0.0 <= frac <= 1.0:
            raise ConfigError(f"failure fraction {frac} outside [0, 1]")
        failed = worst_case_failures(base.allocator_cfg.effectiveness, int(round(frac * m)))
        schedule = [(j, 0.0, base.t_end) for j in failed]
        for mode in ALLOCATION_MODES:
            jobs.append((frac, mode, replace(base, allocation_mode=mode, fault_schedule=schedule)))
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        results = list(pool.map(lambda job: run(job[2]), jobs))
    rows = []
    for i, frac in enumerate(failure_fractions):
        row = {"failure_pct": 100.0 * frac,
               "failed_count": int(round(frac * m))}
        for j, mode in enumerate(ALLOCATION_MODES):
            row[mode] = results[3 * i + j].critical_damping
        rows.append(row)
    return rows
