use crate::error::{Error, Result};
use crate::model::{AblationMask, Aggregation, GroupingMode, ModelConfig, Normalization};

/// Logit fed to the contrastive softmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ContrastiveLogit {
    /// `σ(ê_u · ê_v) / τ`
    #[default]
    Sigmoid,
    /// `(ê_u · ê_v) / τ`
    Dot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    pub user_depth: usize,
    pub user_fanout: usize,
    pub item_depth: usize,
    pub item_fanout: usize,
    pub dim: usize,
    pub queries: usize,
    pub l2: f64,
    pub temperature: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Epochs without a validation-AUC improvement before stopping.
    pub patience: usize,
    pub grouping: GroupingMode,
    pub mask: AblationMask,
    pub use_contrastive: bool,
    pub contrastive_logit: ContrastiveLogit,
    pub normalization: Normalization,
    pub aggregation: Aggregation,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            user_depth: 1,
            user_fanout: 32,
            item_depth: 2,
            item_fanout: 32,
            dim: 32,
            queries: 4,
            l2: 1e-5,
            temperature: 0.2,
            learning_rate: 1e-3,
            batch_size: 1024,
            epochs: 100,
            patience: 5,
            grouping: GroupingMode::Global,
            mask: AblationMask::FULL,
            use_contrastive: true,
            contrastive_logit: ContrastiveLogit::Sigmoid,
            normalization: Normalization::Softmax,
            aggregation: Aggregation::SelectedFeature,
            seed: 2023,
        }
    }
}

impl HyperParams {
    /// Depths may be zero (no neighborhood on that side); everything else
    /// that counts must be at least one.
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("user_fanout", self.user_fanout),
            ("item_fanout", self.item_fanout),
            ("dim", self.dim),
            ("queries", self.queries),
            ("batch_size", self.batch_size),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be at least 1")));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::Config(format!("l2 must be ≥ 0, got {}", self.l2)));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!("temperature must be > 0, got {}", self.temperature)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be > 0, got {}", self.learning_rate)));
        }
        if !self.mask.is_valid() {
            return Err(Error::Config("ablation mask keeps no component".into()));
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            grouping: self.grouping,
            mask: self.mask,
            normalization: self.normalization,
            aggregation: self.aggregation,
        }
    }
}
