//! Multi-query chain-route attention: knowledge selector, grouped route
//! evaluator, enrichment and click prediction.

mod config;
mod msal;
mod ops;
mod params;

pub use config::{AblationMask, Aggregation, GroupingMode, ModelConfig, Normalization};
pub use msal::{msal, route_weights, MsalTrace, SparseGrad};
pub use ops::{
    dot, enrich, evaluate_routes, group_normalize, key, knowledge_selector, msal_reference, predict,
    route_elements, route_score, sigmoid, softmax, Emb,
};
pub use params::{Gradients, Matrix, ParameterSet, TENSOR_NAMES};
