//! Hierarchical Bayesian unmixing of a single hyperspectral pixel under the
//! polynomial post-nonlinear mixing model (PPNMM).
//!
//! The abundance vector gets a symmetric Dirichlet prior; with a
//! concentration below one (β = 0.5 by default) the prior favours sparse
//! abundance vectors, which lets a large library be used directly without
//! first selecting the endmembers present in the pixel. The posterior is
//! explored by a Metropolis-within-Gibbs sampler ([`gibbs::run_chain`]).
//!
//! ```
//! use ppnmm_core::{experiment, gibbs, library, random::RngState};
//!
//! let scenario = experiment::SyntheticScenario::default();
//! let pixel = experiment::generate_pixel(&scenario, &mut RngState::new(7)).unwrap();
//! let config = gibbs::SamplerConfig { n_iter: 600, burn_in: 200, ..Default::default() };
//! let chain = gibbs::run_chain(&pixel, &library::bundled_library(), &config).unwrap();
//! let estimate = gibbs::posterior_mean(&chain, config.burn_in).unwrap();
//! assert_eq!(estimate.a.len(), 6);
//! ```

pub mod error;
pub mod experiment;
pub mod gibbs;
pub mod library;
pub mod model;
pub mod random;
pub mod spectra_io;

pub use error::{Error, Result};
pub use model::{
    AbundanceVector, EndmemberLibrary, ModelParams, PixelObservation, PriorHyperparams,
};
