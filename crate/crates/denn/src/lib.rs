//! Delay neural networks: learning through synaptic delays on spike
//! times.
//!
//! Instead of weighting activations, every synapse of these networks
//! carries a learnable signed delay acting on the *time* at which
//! information arrives. A neuron's output is a single scalar per frame —
//! its firing time, where earlier means stronger — computed in closed
//! form from its inputs' times and delays, standardized across the
//! layer, and optionally thinned by a temporal ReLU that silences the
//! slower part of each layer. Everything stays differentiable, so the
//! backward pass is exact.
//!
//! The crate covers the full pipeline:
//!
//! - [`kernel`], [`delay`], [`standardize`]: the scalar temporal math and
//!   its exact partial derivatives.
//! - [`layers`], [`network`]: dense/convolutional delay layers,
//!   min-pooling, per-neuron long-term memory, and full backpropagation
//!   through frame sequences.
//! - [`loss`], [`optim`], [`train`]: temporal softmin posterior,
//!   cross-entropy, per-layer Frobenius gradient normalization, Adam,
//!   and the training loop.
//! - [`events`], [`encode`], [`io`]: event-stream preprocessing
//!   (event2time), static-image encoding, and the binary dataset/cache
//!   formats.
//! - [`energy`]: active-synapse counting and the neuromorphic
//!   cycle/energy model.
//! - [`gradcheck`], [`diagnostics`]: finite-difference verification and
//!   CSV diagnostics.
//!
//! The `book/` directory of the repository walks through the concepts
//! chapter by chapter; its code snippets compile and run as part of this
//! crate's doc-tests.

pub mod config;
pub mod data;
pub mod delay;
pub mod diagnostics;
pub mod encode;
pub mod energy;
pub mod error;
pub mod events;
pub mod gradcheck;
pub mod io;
pub mod kernel;
pub mod layers;
pub mod loss;
pub mod network;
pub mod optim;
pub mod standardize;
pub mod synth;
pub mod train;

pub use delay::{
    activity_partials, delay_from_signed, synaptic_activity, ActivityPartials, DelayParameters,
};

/// Size the global worker pool (first call wins; later calls fail).
pub fn rayon_global_threads(n: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| DennError::Config(e.to_string()))
}
pub use error::{DennError, Result};
pub use kernel::KernelSpec;
pub use loss::{cross_entropy, temporal_softmin, ClassPosterior};
pub use network::{Network, NetworkSpec};
pub use standardize::{standardize, temp_relu, RegimeConfig, StandardizedTimes, SILENT};

#[cfg(doctest)]
mod book {
    //! The guide's chapters double as doc-tests: every fenced Rust block
    //! in `book/src` is compiled and run by `cargo test`.
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!(concat!("../../../book/src/", $path))]
            mod $name {}
        };
    }
    chapter!(introduction, "introduction.md");
    chapter!(delays_and_kernels, "delays-and-kernels.md");
    chapter!(standardization, "standardization-and-regimes.md");
    chapter!(networks, "networks-and-memory.md");
    chapter!(training, "training.md");
    chapter!(event2time, "event2time.md");
    chapter!(energy, "energy.md");
    chapter!(cli, "cli-and-formats.md");
}
