use dkse::config::RunConfig;
use dkse::pipeline::build_dataset;
use dkse::synth::SyntheticSpec;
use dkse::train::{fit, fit_with, initial_params, HyperParams};
use dkse::Execution;

fn quick_hyper(seed: u64) -> HyperParams {
    HyperParams {
        user_depth: 1,
        user_fanout: 8,
        item_depth: 2,
        item_fanout: 4,
        dim: 16,
        queries: 2,
        learning_rate: 0.01,
        batch_size: 256,
        epochs: 3,
        seed,
        ..HyperParams::default()
    }
}

fn planted(seed: u64) -> dkse::ingest::PreparedDataset {
    let cfg = RunConfig::synthetic(SyntheticSpec {
        seed,
        ..SyntheticSpec::default()
    });
    let dir = tempfile::tempdir().unwrap();
    build_dataset(&cfg, dir.path()).unwrap()
}

#[test]
fn zero_epochs_returns_initialization() {
    let ds = planted(0);
    let g = ds.graph().unwrap();
    let h = HyperParams {
        epochs: 0,
        ..quick_hyper(4)
    };
    let out = fit(&ds.split, &g, &h, Execution::Parallel).unwrap();
    assert!(out.history.is_empty());
    assert_eq!(out.params, initial_params(&g, &h));
}

#[test]
fn validation_auc_improves_over_first_epochs() {
    let mut improving = 0;
    for seed in 0..10 {
        let ds = planted(seed);
        let g = ds.graph().unwrap();
        let out = fit(&ds.split, &g, &quick_hyper(seed), Execution::Parallel).unwrap();
        let auc: Vec<f64> = out.history.iter().map(|r| r.val_auc.unwrap()).collect();
        if auc.len() == 3 && auc[0] < auc[1] && auc[1] < auc[2] {
            improving += 1;
        }
    }
    assert!(improving >= 9, "{improving}/10 seeds improved");
}

#[test]
fn identical_seed_identical_trajectory() {
    let ds = planted(1);
    let g = ds.graph().unwrap();
    let h = quick_hyper(9);
    let a = fit(&ds.split, &g, &h, Execution::Parallel).unwrap();
    let b = fit(&ds.split, &g, &h, Execution::Sequential).unwrap();
    assert_eq!(a, b);
    let c = fit(&ds.split, &g, &quick_hyper(10), Execution::Parallel).unwrap();
    assert_ne!(a.params, c.params);
}

#[test]
fn log_lines_are_key_value() {
    let ds = planted(2);
    let g = ds.graph().unwrap();
    let mut lines = Vec::new();
    fit_with(&ds.split, &g, &quick_hyper(2), Execution::Parallel, |r| lines.push(r.log_line())).unwrap();
    assert_eq!(lines.len(), 3);
    for (i, line) in lines.iter().enumerate() {
        let keys: Vec<&str> = line.split(' ').map(|kv| kv.split_once('=').unwrap().0).collect();
        assert_eq!(keys, ["epoch", "loss", "bce", "cl", "l2", "val_auc"]);
        assert!(line.starts_with(&format!("epoch={} ", i + 1)));
    }
}

#[test]
fn early_stopping_keeps_best_epoch() {
    let ds = planted(3);
    let g = ds.graph().unwrap();
    let h = HyperParams {
        epochs: 60,
        patience: 2,
        learning_rate: 0.05,
        ..quick_hyper(3)
    };
    let out = fit(&ds.split, &g, &h, Execution::Parallel).unwrap();
    let best = out
        .history
        .iter()
        .map(|r| r.val_auc.unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(out.history[out.best_epoch - 1].val_auc, Some(best));
    if out.stopped_early {
        assert_eq!(out.history.len(), out.best_epoch + h.patience);
    }
}

#[test]
fn mismatched_split_rejected() {
    let a = planted(0);
    let b = build_dataset(
        &RunConfig::synthetic(SyntheticSpec {
            users: 50,
            items: 50,
            entities: 100,
            ..SyntheticSpec::default()
        }),
        tempfile::tempdir().unwrap().path(),
    )
    .unwrap();
    let g = b.graph().unwrap();
    assert!(fit(&a.split, &g, &quick_hyper(0), Execution::Sequential).is_err());
}
