//! Numerical laboratory for energy functionals on Kähler manifolds with
//! U(n)-symmetric metrics on CP^n and one-variable metrics on a flat torus.

pub mod continuity;
pub mod error;
pub mod exact;
pub mod family;
pub mod flow;
pub mod functionals;
pub mod geometry;
pub mod report;
pub mod spectral;

pub use continuity::{
    check_aubin_energy_formula, check_aubin_path, check_properness_bounds,
    check_yau_energy_formula, check_yau_path, default_t_grid, lambda1_radial, refined_t_grid,
    ricci_positive_generator, solve_aubin_path, solve_yau_path, uniform_t_grid, Monitors,
    PathFamily, PathPoint, PathTrajectory, SolverStats, Termination,
};
pub use error::{LabError, Result};
pub use exact::{verify_binomial_identity, verify_sigma_expansion, verify_zero_identity, Rational};
pub use family::{family_member, generate_family, member_rng, FamilyParams};
pub use flow::{run_flow, FlowSample, FlowTrajectory};
pub use functionals::{
    critical_residual, d_dt_i_minus_j_check, e1_cy, e_k_closed, e_k_path, e_k_path_from,
    energy_between, futaki_k, futaki_on, i_j, i_j_between, i_minus_j_between, mu_k,
    orbit_derivative, EnergyMethod, EnergyValue, FutakiValue, PathKind,
};
pub use geometry::{
    fs_background, integrate, laplacian, laplacian_matrix, make_metric, orbit_potential,
    ricci_eigenvalues, ricci_potential, sigma_coefficients, sigma_k, solve_prescribed_density,
    wedge_density, with_powers, Background, FormSlot, MetricState, Model, Normalization,
    RadialPotential, SlotKind,
};
pub use report::{CheckItem, CheckReport, Relation};
