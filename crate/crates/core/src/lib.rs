//! Teacher-mixture model of dataset imbalance.
//!
//! Data from two sub-populations, each labelled by its own linear teacher, is
//! fitted by one logistic-regression student (or a coupled pair). The crate
//! provides the asymptotic theory of the trained classifier ([`replica`]),
//! a finite-size simulator ([`erm`]), fairness observables and the
//! mitigation sweeps built on top of them.

pub mod error;
pub mod erm;
pub mod exposure;
pub mod generative;
pub mod io;
pub mod linalg;
pub mod mitigation;
pub mod observables;
pub mod params;
pub mod quadrature;
pub mod replica;
pub mod special;

pub use error::{Result, TmixError};
pub use exposure::{Exposure, ExposureCell, Membership, Strategy};
pub use generative::{build_teacher_geometry, empirical_overlaps, sample_dataset, Dataset, TeacherPair};
pub use params::{GenerativeParams, Group, Overlaps, ReweighWeights};
pub use replica::{fixed_point_solve, OrderParams, SaddleSolution, SolverConfig};
