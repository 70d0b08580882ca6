//! Gaussian process regression and classification over strings with a
//! spectrum kernel, including sparse approximations whose inducing inputs
//! are chosen by discrete search.

pub mod data;
pub mod domain;
pub mod error;
pub mod gp;
pub mod hyper;
pub mod kernel;
pub mod likelihood;
pub mod linalg;
pub mod metrics;
pub mod model_io;
pub mod quadrature;
pub mod select;
pub mod sparse;

pub use domain::{Alphabet, Dataset, Sequence, TargetKind, Targets};
pub use error::{Error, Result};
pub use gp::{FullGpModel, GaussianPosterior, LaplaceState, NewtonOptions};
pub use kernel::{GramMatrix, KernelConfig, SpectrumKernel};
pub use likelihood::Likelihood;
pub use sparse::{InducingSet, SparseGpModel, SparseOptions};
