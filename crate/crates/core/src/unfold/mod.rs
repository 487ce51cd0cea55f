//! Orbit geometry of the reduced matrix, `Θ` extraction, realization of
//! reduced directions by point-delay coefficients, and assembly of the
//! equivariant family.

mod assemble;
mod geometry;
mod realize;
mod theta;

pub use assemble::{
    assemble_gamma_unfolding, realify, reparametrization_matrix, verify_gamma_versality, AssembleOptions,
    Assembly, RealFamily, UnfoldingFamily, VersalityReport,
};
pub use geometry::{
    ad_matrix, codimension_formula, commutation_residual, eigenvalue_classes, gamma_orbit_geometry,
    orbit_geometry, semisimple_spec, validate_jordan_spec, GammaOrbitGeometry, JordanBlocks, OrbitGeometry,
};
pub use realize::{
    build_r_matrices, check_delays, choose_delays, reconstruct, solve_delay_realization, stacked_phi, stacked_rank, EntryMask,
    Realization, RECONSTRUCTION_TOL,
};
pub use theta::{project_unfolding_directions, theta_extract, ThetaReport, DECOMPOSITION_TOL};
