"""Alternating precoder / surface-phase design for sensing-and-communication.

Library core plus an experiment harness with a CLI front end (``isac``).
"""

__version__ = "0.1.0"

from .errors import (ConfigError, DykstraError, MonotonicityError,
                     RandomizationInfeasibleError, SolverError)
from .scene import (ChannelSet, SceneConfig, db_to_linear, dbm_to_watts,
                    linear_to_db, load_scene_config, make_channels,
                    rician_channel, scene_config_from_dict, ula_spacing_check,
                    ula_steering, upa_steering)
from .objective import (IrsPhase, ObjectiveBreakdown, Precoder, build_omega,
                        decompose_objective, effective_comm_channel,
                        effective_radar_channel, quartic_kernels,
                        quartic_kernels_reference, snr_comm, snr_radar,
                        weighted_snr)
from .precoder import (RandomizationReport, RelaxedCovariance,
                       approximation_ratio_study, default_beampattern_target,
                       dykstra_project, factor_precoder, precoder_objective,
                       project_ball, project_psd, project_spectrahedron,
                       project_trace, relaxed_objective, solve_relaxed,
                       solve_unit_diag_relaxation)
from .irs import (InnerTrace, SurrogateWorkspace, build_quadratic_terms,
                  build_quartic_surrogate, build_workspace, irs_phase_update,
                  linear_surrogate_vectors, quartic_surrogate_constant,
                  solve_irs_manifold, solve_irs_minorization,
                  wirtinger_gradient)
from .alternating import (RunTrace, SolverOptions, objective_snapshot,
                          run_alternating)
from .harness import (AggregateResult, ExperimentSpec, load_experiment_spec,
                      run_bench, run_convergence_experiment, run_experiment,
                      run_ratio_experiment, run_scaling_experiment)

__all__ = [name for name in dir() if not name.startswith("_")]
