use super::batch::{batch_loss, batch_loss_and_grad, PairSamples};
use super::HyperParams;
use crate::exec::Execution;
use crate::graph::UnifiedGraph;
use crate::ingest::LabeledPair;
use crate::model::{ParameterSet, TENSOR_NAMES};

/// Smallest denominator used for relative errors, so that gradients which
/// are zero up to rounding are compared absolutely.
pub const RELATIVE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    /// Tensor and flat offset of the worst coordinate.
    pub worst: (&'static str, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(RELATIVE_FLOOR)
}

/// Compares the analytic gradient of the batch objective with central
/// differences of step `h`, coordinate by coordinate, on fixed samples.
pub fn check_gradients(
    params: &ParameterSet,
    graph: &UnifiedGraph,
    pairs: &[LabeledPair],
    samples: &[PairSamples],
    hyper: &HyperParams,
    h: f64,
) -> GradCheck {
    let exec = Execution::Sequential;
    let (_, grads) = batch_loss_and_grad(params, graph, pairs, samples, hyper, exec);
    let mut probe = params.clone();
    let mut out = GradCheck {
        max_relative_error: 0.0,
        worst: (TENSOR_NAMES[0], 0),
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for i in 0..params.len() {
        let x = params.get_flat(i);
        probe.set_flat(i, x + h);
        let up = batch_loss(&probe, graph, pairs, samples, hyper, exec).total();
        probe.set_flat(i, x - h);
        let down = batch_loss(&probe, graph, pairs, samples, hyper, exec).total();
        probe.set_flat(i, x);
        let numeric = (up - down) / (2.0 * h);
        let analytic = grads.get_flat(i);
        let err = relative_error(analytic, numeric);
        out.checked += 1;
        if err > out.max_relative_error || out.checked == 1 {
            out.max_relative_error = err;
            out.worst = params.locate_flat(i);
            out.analytic = analytic;
            out.numeric = numeric;
        }
    }
    out
}
