use dkse::checkpoint::Checkpoint;
use dkse::config::{DataSource, RunConfig};
use dkse::fsutil::DirLock;
use dkse::ingest::PreparedDataset;
use dkse::pipeline::{self, ablate, build_dataset, sweep, sweep_csv, SweepAxis};
use dkse::synth::SyntheticSpec;
use dkse::train::HyperParams;
use dkse::{Error, Execution};

fn tiny_spec() -> SyntheticSpec {
    SyntheticSpec {
        users: 40,
        items: 50,
        entities: 90,
        interactions_per_user: 10,
        clusters: 5,
        seed: 17,
        ..SyntheticSpec::default()
    }
}

fn tiny_hyper() -> HyperParams {
    HyperParams {
        user_depth: 1,
        user_fanout: 4,
        item_depth: 1,
        item_fanout: 4,
        dim: 8,
        queries: 2,
        batch_size: 128,
        epochs: 2,
        learning_rate: 0.01,
        ..HyperParams::default()
    }
}

#[test]
fn synthetic_stats_match_spec() {
    let spec = SyntheticSpec::default();
    let dir = tempfile::tempdir().unwrap();
    let ds = build_dataset(&RunConfig::synthetic(spec.clone()), dir.path()).unwrap();
    let stats = ds.stats();
    assert_eq!(stats.users, spec.users);
    assert_eq!(stats.items, spec.items);
    assert_eq!(stats.entities, spec.entities);
    assert_eq!(stats.relations, spec.relations);
    assert_eq!(stats.triples, spec.items * spec.kg_edges_per_item);
    assert_eq!(stats.interactions, spec.users * spec.interactions_per_user);
    let text = stats.to_string();
    assert!(text.contains("#users=200") && text.contains("#triples=1200"));
}

#[test]
fn k_core_fixed_point_leaves_dense_data_alone() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ratings.tsv");
    let mut text = String::new();
    for u in 0..25 {
        for i in 0..22 {
            text.push_str(&format!("u{u}\ti{i}\t{}\n", if (u + i) % 2 == 0 { 5 } else { 4 }));
        }
    }
    text.push_str("u0\trare\t5\n");
    std::fs::write(&path, text).unwrap();
    let mut cfg = RunConfig::files(path, None, None);
    cfg.ingest.k_core = 20;
    let ds = build_dataset(&cfg, dir.path()).unwrap();
    let stats = ds.stats();
    assert_eq!((stats.users, stats.items, stats.interactions), (25, 22, 25 * 22));
}

#[test]
fn prepare_train_evaluate_on_disk() {
    let out = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::synthetic(tiny_spec());
    cfg.hyper = tiny_hyper();
    let ds = pipeline::prepare(&cfg, &out.path().join("prep")).unwrap();
    let split = out.path().join("prep").join(pipeline::DATASET_FILE);
    assert_eq!(PreparedDataset::load(&split).unwrap(), ds);
    let stats = std::fs::read_to_string(out.path().join("prep").join(pipeline::STATS_FILE)).unwrap();
    assert!(stats.starts_with("#users=40"));
    let saved = RunConfig::load(&out.path().join("prep").join(pipeline::CONFIG_FILE)).unwrap();
    assert_eq!(saved, cfg);

    let train_dir = out.path().join("train");
    let summary = pipeline::train(&split, &cfg.hyper, &train_dir, &[1, 5], Execution::Parallel).unwrap();
    for f in [
        pipeline::CHECKPOINT_FILE,
        pipeline::TRAIN_LOG_FILE,
        pipeline::VALID_REPORT_FILE,
        pipeline::TEST_REPORT_FILE,
        pipeline::TOPK_CSV_FILE,
    ] {
        assert!(train_dir.join(f).exists(), "{f}");
    }
    assert!(!train_dir.join(DirLock::FILE_NAME).exists());
    let ck = Checkpoint::load(&train_dir.join(pipeline::CHECKPOINT_FILE)).unwrap();
    assert_eq!(ck.params, summary.outcome.params);
    assert_eq!(ck.hyper, cfg.hyper);

    let eval_dir = out.path().join("eval");
    let ckpt = train_dir.join(pipeline::CHECKPOINT_FILE);
    let a = pipeline::evaluate(&ckpt, &split, &[1, 5], &eval_dir, Execution::Parallel).unwrap();
    let b = pipeline::evaluate(&ckpt, &split, &[1, 5], &eval_dir, Execution::Sequential).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.auc, summary.test.auc);
    let csv = std::fs::read_to_string(eval_dir.join(pipeline::TOPK_CSV_FILE)).unwrap();
    assert_eq!(csv.lines().next(), Some("k,precision,ndcg"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn locked_output_directory_rejected() {
    let out = tempfile::tempdir().unwrap();
    let _held = DirLock::acquire(out.path()).unwrap();
    let err = pipeline::prepare(&RunConfig::synthetic(tiny_spec()), out.path()).unwrap_err();
    assert!(matches!(err, Error::Locked(_)));
    assert!(!out.path().join(pipeline::DATASET_FILE).exists());
}

#[test]
fn checkpoint_for_other_dataset_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let a = build_dataset(&RunConfig::synthetic(tiny_spec()), &dir.path().join("a")).unwrap();
    let b = build_dataset(
        &RunConfig::synthetic(SyntheticSpec {
            users: 30,
            ..tiny_spec()
        }),
        &dir.path().join("b"),
    )
    .unwrap();
    let h = tiny_hyper();
    let ck = Checkpoint {
        dataset: a.tag.clone(),
        epoch: 0,
        hyper: h.clone(),
        params: dkse::train::initial_params(&a.graph().unwrap(), &h),
    };
    pipeline::evaluate_checkpoint(&ck, &a, &[1], Execution::Sequential).unwrap();
    let err = pipeline::evaluate_checkpoint(&ck, &b, &[1], Execution::Sequential).unwrap_err();
    assert!(err.to_string().contains("dimension mismatch"), "{err}");
}

#[test]
fn missing_inputs_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::files(dir.path().join("nope.tsv"), None, None);
    assert!(matches!(cfg.data, DataSource::Files { .. }));
    let err = pipeline::prepare(&cfg, &dir.path().join("out")).unwrap_err();
    assert!(err.to_string().contains("does not exist"));
}

#[test]
fn ablation_table_has_ten_rows() {
    let dir = tempfile::tempdir().unwrap();
    let ds = build_dataset(&RunConfig::synthetic(tiny_spec()), dir.path()).unwrap();
    let h = HyperParams {
        epochs: 1,
        ..tiny_hyper()
    };
    let rows = ablate(&ds, &h, Execution::Parallel).unwrap();
    assert_eq!(rows.len(), 10);
    assert_eq!(rows[0].report, rows[1].report);
    let csv = pipeline::ablation_csv(&rows);
    assert_eq!(csv.lines().count(), 11);
    assert!(csv.contains("w/o CL"));
}

#[test]
fn sweeps_are_reproducible_and_budgeted() {
    let dir = tempfile::tempdir().unwrap();
    let ds = build_dataset(&RunConfig::synthetic(tiny_spec()), dir.path()).unwrap();
    let h = HyperParams {
        epochs: 1,
        ..tiny_hyper()
    };
    let a = sweep(&ds, &h, SweepAxis::Queries, 5000, Execution::Parallel).unwrap();
    let b = sweep(&ds, &h, SweepAxis::Queries, 5000, Execution::Sequential).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 5);
    let csv = sweep_csv(SweepAxis::Queries, &a);
    assert_eq!(csv.lines().next(), Some("queries,auc"));

    let cells = sweep(&ds, &h, SweepAxis::Fanout, 20, Execution::Parallel).unwrap();
    assert_eq!(cells.len(), 20);
    for c in &cells {
        let routes = dkse::graph::route_count(c.hyper.user_depth, c.hyper.user_fanout);
        assert_eq!(c.auc.is_none(), routes > 20, "{:?}", (c.hyper.user_depth, c.hyper.user_fanout));
    }
}
