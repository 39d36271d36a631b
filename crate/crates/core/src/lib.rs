//! Extremality testing and barycentric decomposition of finite-outcome POVMs.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`.

pub mod config;
pub mod decompose;
pub mod error;
pub mod extremality;
pub mod io;
pub mod linalg;
pub mod outcomes;
pub mod povm;
pub mod sampling;
pub mod scalar;

pub use config::{Config, Strategy};
pub use decompose::{decompose_extremal, split_once, verify_barycenter, VerificationReport};
pub use error::{Error, Result};
pub use extremality::{analyze, build_tp_map, hermitian_kernel_element, is_extreme};
pub use outcomes::{apply_postprocessing, is_injective};
pub use povm::{
    born_probabilities, convex_combine, expectation_operator, trace_density, validate_povm,
};
pub use sampling::{sample_direct, sample_two_stage, tv_distance};
pub use scalar::Real;

pub type Povm = povm::FinitePovm<f64>;
pub type Label = povm::OutcomeLabel<f64>;
pub type Herm = linalg::HermMatrix<f64>;
pub type State = povm::DensityState<f64>;
pub type Mixture = decompose::ExtremalMixture<f64>;
pub type Verdict = extremality::ExtremalityVerdict<f64>;
pub type TpMap = extremality::TpMap<f64>;
pub type Histogram = sampling::OutcomeHistogram<f64>;
pub type Density = povm::TraceDensity<f64>;
pub type PostProcessing = outcomes::PostProcessing<f64>;
