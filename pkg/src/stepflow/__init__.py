"""Backward-facing-step channel flow: regularized incompressible solver,
diagnostics (averaging, stream function, reattachment, particle tracing),
pulsation spectra and a reproduction harness for the published runs."""

from .config import RunConfig, parse_config
from .diagnostics import (AveragedField, ProbeSeries, accumulate_average,
                          reattachment_length, stream_function,
                          trace_particles)
from .errors import (BlowUpError, ConfigError, GridError,
                     PressureConvergenceError, StepflowError)
from .geometry import CellKind, StepGeometry, UniformGrid, build_grid, classify_cell
from .harness import RunSummary, execute, table_configs, tau_sweep
from .solver import (FlowState, RegularizingVelocity, SolverParams, advance,
                     compute_w, impose_boundaries, initial_state,
                     momentum_step, pressure_solve)
from .spectra import (Spectrum, energy_spectrum, fourier_coefficients,
                      fourier_coefficients_direct, remove_mean)

__version__ = "0.1.0"
