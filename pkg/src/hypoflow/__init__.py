"""hypoflow: a numerical laboratory for degenerate kinetic Fokker-Planck
equations on the torus with unit velocities.

The package simulates dt f + v . grad_x f = sigma(x) Laplace_theta f on
T^2 x S^1 with a structure-preserving spectral splitting, certifies the
geometric control condition along transport rays, constructs the control
weight psi, verifies the quantitative inequalities of the decay chain on
simulated trajectories, and realizes the divergence inequality with an
explicit kernel on star-shaped planar domains.
"""

from .core import (AbsorptionField, Band, ConfigError, Cross, DensityField,
                   Disk, FullTorus, GridSpec, PhasePoint, Rect, SupportRegion,
                   absorption_from_raw, build_sigma, load_sigma_raw,
                   read_field_raw, transform_forward, transform_inverse,
                   write_field_raw)
from .characteristics import (ControlWeight, GccCertificate, GccError,
                              build_psi, certify_gcc, component_reachability,
                              flow, line_integral, normalize_chi, psi_eval,
                              psi_orbit_quadrature, reachability_horizon)
from .solver import (NumericalAbort, SolverConfig, evolve, make_bump,
                     make_equilibrium_mode, make_harmonic_mode,
                     make_random_bandlimited, make_single_mode, step_collision,
                     step_transport, strang_step)
from .diagnostics import (DecayFit, DiagnosticsSample, dissipation, fit_decay,
                          l2_norm_sq, mass, micro_coercivity_pairs,
                          velocity_average)
from .criterion import (CertificateError, ConstantsLedger, DecayCertificate,
                        build_ledger, build_moment_decomposition,
                        decay_from_lambda, decomposition_identity_residuals,
                        end_to_end_certificate, energy_ledger_check,
                        following_constants, measure_lambda, verify_claim_bound,
                        verify_following, verify_quant)
from .bogovskii import (DivergenceSolution, DomainError, StarDomain,
                        bogovskii_solve, disk_domain, estimate_c_d,
                        lshape_domain, manufactured_case,
                        random_zero_mean_ensemble, rect_domain)
from .report import InequalityCheck, RunReport, load_csv

__version__ = "0.1.0"
