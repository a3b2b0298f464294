//! Cross-module round trips: recordings -> RD sequences -> model -> metrics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spikerad::complexity::{count_flops, ComplexityReport};
use spikerad::eval::{confusion, latency_curve};
use spikerad::models::{Model, ModelKind, ModelSpec};
use spikerad::pruning::{prune_and_finetune, FinetuneConfig, PruneSchedule};
use spikerad::radar_dsp::{load_dataset, preprocess_sequence, save_dataset};
use spikerad::scene_sim::{build_dataset, DatasetSpec, Manifest};

#[test]
fn raw_and_preprocessed_datasets_load_identically() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    let spec = DatasetSpec::new(2, 2);
    let manifest = build_dataset(&spec, 4, &raw).unwrap();
    assert_eq!(manifest.label_counts(), vec![2, 2]);
    assert_eq!(Manifest::load(&raw).unwrap(), manifest);

    let from_raw = load_dataset(&raw).unwrap();
    let direct: Vec<_> = spec.generate(4).unwrap().iter().map(|r| preprocess_sequence(r).unwrap()).collect();
    assert_eq!(from_raw, direct);

    let rd = dir.path().join("rd");
    save_dataset(&rd, &from_raw).unwrap();
    assert_eq!(load_dataset(&rd).unwrap(), from_raw);
}

#[test]
fn corrupt_manifest_label_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    build_dataset(&DatasetSpec::new(2, 1), 1, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    std::fs::write(dir.path().join("manifest.txt"), text.replacen(",0", ",1", 1)).unwrap();
    assert!(load_dataset(dir.path()).is_err());
}

#[test]
fn checkpoint_round_trip_preserves_every_model_kind() {
    let data: Vec<_> = DatasetSpec::new(2, 1).generate(2).unwrap().iter().map(|r| preprocess_sequence(r).unwrap()).collect();
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for kind in ModelKind::ALL {
        let m = Model::new(ModelSpec::new(kind, 2), &mut rng).unwrap();
        let path = dir.path().join(format!("{kind}.spkw"));
        m.save(&path).unwrap();
        let back = Model::load(&path).unwrap();
        assert_eq!(back.kind(), kind);
        assert_eq!(back.param_count(), m.param_count());
        for seq in &data {
            assert_eq!(back.infer(seq).unwrap(), m.infer(seq).unwrap());
        }
    }
}

#[test]
fn untrained_snn_runs_through_eval_prune_and_profile() {
    let data: Vec<_> = DatasetSpec::new(2, 2).generate(6).unwrap().iter().map(|r| preprocess_sequence(r).unwrap()).collect();
    let model = Model::new(ModelSpec::new(ModelKind::Snn, 2), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();

    let cm = confusion(&model, &data).unwrap();
    assert_eq!(cm.total(), 4);
    let curve = latency_curve(&model, &data).unwrap();
    assert_eq!(curve.len(), data[0].len());

    let schedule = PruneSchedule {
        s_initial: 0.0,
        s_final: 0.5,
        n_steps: 2,
        finetune_iters: 1,
    };
    let cfg = FinetuneConfig {
        batch: 2,
        ..FinetuneConfig::default()
    };
    let levels = prune_and_finetune(&model, &data, &data, &schedule, &cfg).unwrap();
    assert_eq!(levels.len(), 3);
    assert!(levels.iter().all(|l| l.mask_violations == 0));
    assert!((levels[2].achieved_sparsity - 0.5).abs() < 1e-3);

    let dense = ComplexityReport::build(&model, &data[..1]).unwrap();
    let sparse = ComplexityReport::build(&levels[2].model, &data[..1]).unwrap();
    assert_eq!(dense.flops_per_frame, count_flops(&model.spec).unwrap().per_frame());
    assert!(sparse.eflops_mean < dense.eflops_mean);
    assert!(dense.eflops_mean <= dense.flops_per_frame);
}
