//! Exact and Monte Carlo machinery for sparse reconstruction in spin systems.
//!
//! The crate is organised bottom-up:
//!
//! * [`graphs`]: finite graphs, translation groups and random vertex subsets.
//! * [`measures`]: exact probability tables, observables and the Fourier-Walsh layer.
//! * [`ising`]: Ising Gibbs samplers (heat-bath, Swendsen-Wang, FK bonds).
//! * [`curie_weiss`]: the mean-field model computed exactly through its magnetization law.
//! * [`clue`]: the clue functional, its information-theoretic variant and the
//!   magnetization operators built from conditional expectations.
//! * [`block_dyn`]: heat-bath block dynamics, spectra and path coupling.
//! * [`dac`]: Divide-and-Color measures and their generalized Fourier transform.
//! * [`experiments`]: named, seeded recipes behind the `spinlab` binary.

pub mod bits;
pub mod block_dyn;
pub mod clue;
pub mod curie_weiss;
pub mod dac;
pub mod error;
pub mod experiments;
pub mod graphs;
pub mod ising;
pub mod measures;
pub mod rng;
pub mod spin;
pub mod stats;
pub mod unionfind;

pub use error::{Error, Result};
pub use graphs::{Graph, GraphSpec, SubsetMask, SubsetSpec};
pub use spin::SpinConfig;
