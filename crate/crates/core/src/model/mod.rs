//! The scene-based recommender: parameters, forward pass and gradients.

mod backward;
mod forward;
mod params;

pub use backward::backward;
pub use forward::{cosine, softmax, Embeddings, ForwardTrace, SceneRec};
pub use params::{is_bias, ParameterSet, Tensor, Variant, N_TENSORS, TENSOR_NAMES};

#[cfg(test)]
mod tests;
