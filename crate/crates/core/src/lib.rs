pub mod ensembles;
pub mod gaf;
pub mod linalg;
pub mod outliers;
pub mod points;
pub mod quadrature;
pub mod region;
pub mod rng;
pub mod spectral;
pub mod stats;
pub mod unstable;

pub use ensembles::{DeformationKind, DeformationSpec, EntryLaw};
pub use linalg::{ComplexMatrix, LinalgError, Spectrum};
pub use points::PointSet;
pub use rng::{RngStream, Role};
