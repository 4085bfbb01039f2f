"""Modal sparse control allocation for damping low-frequency grid oscillations."""

from .allocator import AllocatorConfig, AllocatorState, allocate, build_qp, derive_cost_terms, fixed_allocate
from .errors import ModalAllocError
from .harness import (
    Disturbance,
    PlantDesign,
    Scenario,
    ScenarioResult,
    design_gain,
    design_plant,
    make_benchmark,
    run,
    run_failure_sweep,
)
from .lti import (
    DynamicController,
    ModalRealization,
    StateSpaceModel,
    controller_step,
    eig_real_modal,
    modal_state_feedback_gain,
    simulate_step,
)
from .qp import QpProblem, QpSolution, solve, solve_exact_oracle
from .reduction import HankelSpectrum, balanced_truncate, gramians, hankel_singular_values
from .ringdown import PronyMode, RingdownEstimate, SampledSignal, critical_mode_damping, prony_fit

__version__ = "0.1.0"
