//! Globally convergent reconstruction of the dielectric coefficient of the 3D
//! Helmholtz equation from single-measurement, multi-frequency boundary data.

pub mod boundary;
pub mod coefficient;
pub mod elliptic;
pub mod error;
pub mod fft;
pub mod field;
pub mod forward;
pub mod freq;
pub mod gcm;
pub mod grid;
pub mod io;
pub mod krylov;
pub mod measurement;
pub mod ops;
pub mod plane;
pub mod preprocess;
pub mod propagate;

pub use boundary::{BoundaryIndex, BoundaryTrace, Face};
pub use coefficient::{build_coefficient, cutoff, default_inner_region, CoefficientField, Inclusion};
pub use error::{Error, Result};
pub use field::{RealField3, ScalarField3, VectorField3, C64};
pub use grid::{Aabb, Grid3};
pub use io::{load_mset, load_vol3, save_mset, save_vol3, Volume};
pub use ops::{gradient, laplacian, relative_l2_error};
pub use forward::{
    apply_ls_operator, assemble_periodized_kernel, evaluate_exterior, green_kernel, simulate, simulate_measurements, solve_ls,
    LsOptions, LsSolution, PeriodizedKernel, Simulation,
};
pub use freq::FrequencyGrid;
pub use measurement::MeasurementSet;
pub use plane::{PlaneField, PlaneGrid};
pub use propagate::{angular_spectrum_propagate, z_derivative_via_propagation, AngularSpectrum, Travel};
pub use elliptic::{solve_dirichlet, solve_laplace_component, EllipticOptions};
pub use preprocess::{
    add_noise, boundary_psi, complete_boundary_data, full_boundary_data, gamma_data, k_derivative, locate_targets,
    BoundaryData, GammaData, TargetComponent, TargetRegion,
};
pub use gcm::{
    coefficient_from_v, initial_tail, inner_error, qn_solve, run_reconstruction, truncate_and_smooth, update_tail,
    update_v_gradient, GcmOptions, InitialQ, IterateState, PrevQ, ReconstructionResult, StopReason, TailState,
    TargetEstimate, target_estimates,
};
