//! Joint learning of k-space sampling patterns and unrolled reconstruction
//! networks for accelerated MRI.
//!
//! The crate is organized bottom-up:
//!
//! - [`kspace`]: grids, images, coil maps, sampling patterns and the
//!   encoding operator `E = F C` with its adjoint.
//! - [`patterns`]: baseline pattern generators and the pattern file format.
//! - [`varnet`]: the unrolled variational network, its loss and exact
//!   gradients.
//! - [`optim`]: ADAM training with a step schedule and a cost guard.
//! - [`bass`]: the biased subset search over sampling patterns.
//! - [`alternating`]: alternation of pattern search and network training.
//! - [`harness`]: phantoms, RMSE, configuration and the experiment runner.

pub mod alternating;
pub mod bass;
pub mod error;
pub mod harness;
pub mod kspace;
pub mod optim;
pub mod patterns;
pub mod seed;
pub mod varnet;

pub use error::{Error, Result};

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/kspace.md")]
    mod kspace {}
    #[doc = include_str!("../../../book/src/patterns.md")]
    mod patterns {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/search.md")]
    mod search {}
    #[doc = include_str!("../../../book/src/alternating.md")]
    mod alternating {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
