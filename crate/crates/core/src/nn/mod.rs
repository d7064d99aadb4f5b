//! Minimal neural-network toolkit: a reverse-mode tape, parameters, Adam and layers.

pub mod layers;
pub mod params;
pub mod sparse;
pub mod tape;

pub use layers::{mean_aggregator, Linear, Mlp, Neighborhood, SageLayer};
pub use params::{Adam, Bound, ParamId, ParamStore};
pub use sparse::Csr;
pub use tape::{Gradients, Tape, Var};
