//! Dense-network numerics used by the training loops: forward pass with a
//! trace, reverse-mode gradients, Adam and categorical action sampling.

pub mod adam;
pub mod mlp;
pub mod policy_value;
pub mod sampling;

pub use adam::{AdamConfig, AdamState, StepReport};
pub use mlp::{Activation, Dense, Mlp, MlpTrace, LEAKY_SLOPE};
pub use policy_value::{
    rnd_error, ForwardOutput, ForwardTrace, Gradients, HeadGradients, NetSpec, PolicyValueNet, RndNets, RndSpec,
};
pub use sampling::{greedy_action, masked_log_softmax, masked_softmax, sample_action};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NetError {
    #[error("network configuration error: {0}")]
    Config(String),
    #[error("trace does not match the network it is replayed against")]
    StaleTrace,
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("every action is masked out")]
    AllMasked,
}
