"""Hybrid particle/PDE simulation of alignment- and chemotaxis-driven
collective motion, with analytical verification oracles.

Discrete agents align their velocities with Cucker-Smale weights and climb
the gradient of a chemoattractant they produce themselves; the signal obeys a
diffusion/production/decay equation solved on a periodic grid.  Alongside the
simulator the package carries the machinery used to verify it: an exact
free-space quadrature oracle for the field, the linearized fluctuation system
with its Lyapunov decay certificate, and the centre-of-mass memory equation.
"""

from .core import (
    DimensionalParams,
    DomainSpec,
    ModelParams,
    NondimensionalScales,
    ParticleState,
    Role,
    alignment_force,
    alignment_weight,
    alignment_weight_matrix,
    minimum_image,
    nondimensionalize,
    wrap_positions,
)
from .field import (
    ScalarField,
    SourceField,
    cn_step,
    gradient_field,
    rasterize_sources,
    read_snapshot,
    sample_field,
    sample_gradient,
    write_snapshot,
)
from .greens import QuadratureSpec, TrajectoryRecord, oracle_f, oracle_grad_f
from .harness import (
    ExperimentConfig,
    OutputOptions,
    init_particles,
    parse_config,
    preset,
    run_config,
    scale_config,
    serialize_config,
    write_outputs,
)
from .integrator import (
    SimulationBlowupError,
    SimulationOptions,
    SimulationRecord,
    StepConfig,
    build_alignment_operator,
    imex_step,
    run_simulation,
)
from .linearized import (
    GCache,
    LyapunovConstants,
    cbar,
    g_infinity,
    g_of_t,
    integrate_cm,
    integrate_planar,
    lyapunov_constants,
    lyapunov_value,
)
from .metrics import (
    MetricsSample,
    compute_sample,
    crossing_time,
    read_metrics_csv,
    trend_slope,
    write_metrics_csv,
)
from .quadrature import QuadratureError, adaptive_quad

__version__ = "0.1.0"
