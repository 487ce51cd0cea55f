//! Equivariant versal unfoldings of linear delay equations.
//!
//! The pipeline takes a linear retarded equation with point delays that
//! commutes with a finite group action, restricts it to a finite set of
//! critical eigenvalues, and builds a family of equivariant point-delay
//! perturbations whose reduced matrices form a versal (and, after row
//! selection, mini-versal) unfolding inside the equivariant matrices.
//!
//! Modules, bottom-up:
//!
//! * [`group`]: finite groups, representations, group averages, commutants
//! * [`delay`]: point-delay operators, characteristic matrix, bilinear form
//! * [`spectral`]: root finding, eigenfunction bases, induced action
//! * [`unfold`]: orbit geometry, Θ extraction, delay realization, assembly
//! * [`d3`]: the three-cell D₃ network at double Hopf points
//! * [`io`]: JSON documents exchanged with the command-line tool
//! * [`audit`]: independent re-check of a stored artifact

pub mod audit;
pub mod d3;
pub mod delay;
pub mod error;
pub mod group;
pub mod io;
pub mod linalg;
pub mod quadrature;
pub mod spectral;
pub mod unfold;

pub use delay::{DelayOperator, DelayTerm, ExpVector, Side};
pub use error::{Error, Result};
pub use group::{FiniteGroup, Representation};
pub use linalg::{CMat, CVec};
pub use num_complex::Complex64;
pub use spectral::SpectralFrame;
pub use unfold::{GammaOrbitGeometry, OrbitGeometry, ThetaReport, UnfoldingFamily};
