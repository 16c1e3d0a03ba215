//! Identification of the diffusivity and the initial state of a one-dimensional heat equation
//! from boundary observations.
//!
//! The observation on a control-free window is a sum of decaying exponentials whose rates are
//! the scaled Neumann eigenvalues. [`pencil`] estimates those rates, [`pipeline`] recovers the
//! diffusivity from a step-controlled window, assigns mode indices and reconstructs the initial
//! state by truncated SVD, and [`bounds`] turns priors on the data into an a-priori error
//! interval for the diffusivity.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod bounds;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod pencil;
pub mod pipeline;

pub use bounds::{BoundInputs, ErrorCertificate};
pub use error::{Error, Result};
pub use model::{ExponentialModel, HeatProblem, SampleTrace};
pub use pencil::{PencilConfig, PencilEstimate, PencilParameter};
pub use pipeline::{identify, IdentificationResult, PipelineConfig, Priors, Traces};
