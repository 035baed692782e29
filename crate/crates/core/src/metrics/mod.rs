//! CTR metrics (AUC, ACC, F1) and top-K ranking metrics.

mod classification;
mod ranking;
mod report;

pub use classification::{acc_f1, auc, ScoredPair};
pub use ranking::{ndcg_at_k, precision_at_k, topk_rank};
pub use report::{MetricsReport, DEFAULT_K_GRID};
