//! Network building blocks assembled into the planner's sub-networks.

mod mlp;
mod registry;
mod transformer;

pub use mlp::{Activation, Linear, Mlp};
pub use registry::{Init, ParamId, ParamRegistry, ParamVars};
pub use transformer::{TransformerLayer, TransformerStack};
