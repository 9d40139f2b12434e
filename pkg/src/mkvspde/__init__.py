"""McKean-Vlasov SPDEs with stable-like generators and common noise.

Densities live on a periodic grid; the SPDE is solved along stochastic
characteristics, i.e. as a deterministic equation in a noise-shifted frame,
and its first and second variations with respect to the initial measure are
obtained by exact linearization of the same discrete step.
"""
from .characteristics import (CommonNoiseSpec, dress_coefficients, field_to_mu, transfer_first_vd,
                              transfer_second_vd, transform_from_zeta, transform_to_zeta)
from .config import ConfigError, ExperimentConfig, load_config
from .drift import (DriftSpec, InteractionKernel, drift_first_vd, drift_second_vd, eval_drift, eval_drift_at,
                    validate_conditions)
from .fields import FirstOrderField, SecondOrderField
from .grid import (DomainError, Grid1D, GridDensity, GridMismatchError, TestFunction, dirac_approx,
                   gaussian_density, l1_distance, pairing, total_mass, tv_norm)
from .mkv_pde import (DensityTrajectory, PicardError, SolverConfig, mild_picard_solve, solve_zeta,
                      stability_probe, step_density)
from .operators import (FractionalLaplacianSpec, ScaleField, apply_adjoint_generator, apply_generator,
                        frac_laplacian_quadrature, frac_laplacian_spectral)
from .particles import ParticleState, chaos_distance, empirical_density, simulate_particles
from .runner import run_scenario
from .scenarios import Scenario, builtin
from .sensitivity import (assemble_q, fd_first_order, fd_second_order, solve_dual_backward, solve_eta,
                          solve_xi, uniformity_probe)
from .spde import compare_methods, direct_ito_step, solve_ito, solve_spde
from .stable import (NoisePath, StableParams, sample_brownian_path, sample_stable_increment, stable_evolve,
                     stable_kernel)

__version__ = "0.1.0"
