//! Library-level runs of the full pipeline on the synthetic task and the
//! bundled text corpora.

use std::path::PathBuf;

use evidential_ood::cli::{evaluate_ood, ScoreChoice};
use evidential_ood::data::{
    encode_corpus, generate_synthetic_2d, load_jsonl_corpus, uncertainty_grid, GridSpec,
    LabelSchema, SyntheticSpec, Vocab,
};
use evidential_ood::model::{predict_reports, Head, Model, ModelSpec};
use evidential_ood::trainer::{evaluate_epoch, train, TrainingConfig, UpdateMode};

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/data")
}

#[test]
fn untrained_model_has_no_detection_signal() {
    let data = generate_synthetic_2d(&SyntheticSpec::default()).unwrap();
    let cfg = TrainingConfig::synthetic_preset(3);
    for seed in 0..5 {
        let enn = Model::init(cfg.model.clone(), seed).unwrap();
        let msp = Model::init(
            ModelSpec {
                head: Head::Softmax,
                ..cfg.model.clone()
            },
            seed,
        )
        .unwrap();
        let rows = evaluate_ood(
            &enn,
            Some(&msp),
            &("synthetic".into(), data.test.clone()),
            &[("far-ood".into(), data.far_ood.clone())],
            &[ScoreChoice::Vacuity],
            seed,
        )
        .unwrap();
        let a = rows[0].metrics.auroc;
        assert!((a - 0.5).abs() <= 0.1, "seed {seed}: AUROC {a}");
    }
}

#[test]
fn plain_enn_training_separates_the_gaussians() {
    let data = generate_synthetic_2d(&SyntheticSpec::default()).unwrap();
    let mut cfg = TrainingConfig::synthetic_preset(1);
    cfg.betas = evidential_ood::model::Betas::ZERO;
    cfg.epochs = 50;
    let t = train(&data.train.examples, &[], &cfg).unwrap();
    let acc = evaluate_epoch(&t.model, &t.params, &data.test.examples)
        .unwrap()
        .accuracy;
    assert!(acc > 0.95, "accuracy {acc}");
}

#[test]
fn outlier_vacuity_rises_and_accuracy_is_kept() {
    let data = generate_synthetic_2d(&SyntheticSpec::default()).unwrap();
    let mixed = train(
        &data.train.examples,
        &data.oe.examples,
        &TrainingConfig::synthetic_preset(2),
    )
    .unwrap();
    let first = mixed.log.epochs.first().unwrap().oe_vacuity.unwrap();
    let last = mixed.log.last().unwrap().oe_vacuity.unwrap();
    assert!(last > first, "{first} -> {last}");

    let mut plain_cfg = TrainingConfig::synthetic_preset(2);
    plain_cfg.betas = evidential_ood::model::Betas::ZERO;
    let plain = train(&data.train.examples, &[], &plain_cfg).unwrap();
    let acc = |t: &evidential_ood::trainer::Trained| {
        evaluate_epoch(&t.model, &t.params, &data.test.examples)
            .unwrap()
            .accuracy
    };
    assert!((acc(&mixed) - acc(&plain)).abs() <= 0.02);
}

#[test]
fn training_vacuity_falls_during_a_short_run() {
    let data = generate_synthetic_2d(&SyntheticSpec::default()).unwrap();
    let mut cfg = TrainingConfig::synthetic_preset(5);
    cfg.epochs = 10;
    let t = train(&data.train.examples, &data.oe.examples, &cfg).unwrap();
    let v: Vec<f64> = t.log.epochs.iter().map(|e| e.id_vacuity).collect();
    for w in v.windows(2) {
        assert!(w[1] <= w[0] + 1e-3, "{v:?}");
    }
}

#[test]
fn fused_mode_trains_too() {
    let data = generate_synthetic_2d(&SyntheticSpec::default()).unwrap();
    let mut cfg = TrainingConfig::synthetic_preset(6);
    cfg.epochs = 20;
    cfg.mode = UpdateMode::Fused;
    let t = train(&data.train.examples, &data.oe.examples, &cfg).unwrap();
    let acc = evaluate_epoch(&t.model, &t.params, &data.test.examples)
        .unwrap()
        .accuracy;
    assert!(acc > 0.9, "accuracy {acc}");
}

#[test]
fn grid_corners_are_more_vacuous_than_cluster_centres() {
    let data = generate_synthetic_2d(&SyntheticSpec::default()).unwrap();
    let mut cfg = TrainingConfig::synthetic_preset(0);
    cfg.epochs = 40;
    let t = train(&data.train.examples, &data.oe.examples, &cfg).unwrap();
    let grid = uncertainty_grid(&t.model, &t.params, &GridSpec::default()).unwrap();
    assert_eq!(grid.len(), 101 * 101);
    let at = |x: f64, y: f64| {
        grid.iter()
            .min_by(|a, b| ((a.x - x).hypot(a.y - y)).total_cmp(&(b.x - x).hypot(b.y - y)))
            .unwrap()
            .report
            .vacuity
    };
    let centres = at(-2.0, 0.0).max(at(2.0, 0.0));
    for (x, y) in [(-12.0, -12.0), (-12.0, 12.0), (12.0, -12.0), (12.0, 12.0)] {
        assert!(at(x, y) > centres);
    }
    for p in &grid {
        assert!(p.report.vacuity > 0.0 && p.report.vacuity <= 1.0);
        assert!((0.0..1.0).contains(&p.report.dissonance));
    }
}

#[test]
fn text_pipeline_end_to_end() {
    let dir = data_dir();
    let train_text =
        load_jsonl_corpus(dir.join("reviews_train.jsonl"), &LabelSchema::Infer).unwrap();
    let vocab = Vocab::build(train_text.texts.iter().map(String::as_str), 1, None);
    let schema = LabelSchema::Fixed(train_text.class_names.clone());
    let train_set = encode_corpus(&train_text, &vocab, 32).unwrap();
    let test = encode_corpus(
        &load_jsonl_corpus(dir.join("reviews_test.jsonl"), &schema).unwrap(),
        &vocab,
        32,
    )
    .unwrap();
    let oe = encode_corpus(
        &load_jsonl_corpus(dir.join("outliers.jsonl"), &LabelSchema::Unlabeled).unwrap(),
        &vocab,
        32,
    )
    .unwrap();
    let ood = encode_corpus(
        &load_jsonl_corpus(dir.join("ood_recipes.jsonl"), &LabelSchema::Unlabeled).unwrap(),
        &vocab,
        32,
    )
    .unwrap();
    let mut cfg = TrainingConfig::text_preset(vocab.len(), 2, 0);
    cfg.epochs = 10;
    let t = train(&train_set.examples, &oe.examples, &cfg).unwrap();
    let acc = evaluate_epoch(&t.model, &t.params, &test.examples)
        .unwrap()
        .accuracy;
    assert!(acc > 0.8, "accuracy {acc}");
    let id_vac: f64 = predict_reports(&t.model, &t.params, &test.inputs())
        .unwrap()
        .iter()
        .map(|r| r.vacuity)
        .sum::<f64>()
        / test.len() as f64;
    let ood_vac: f64 = predict_reports(&t.model, &t.params, &ood.inputs())
        .unwrap()
        .iter()
        .map(|r| r.vacuity)
        .sum::<f64>()
        / ood.len() as f64;
    assert!(ood_vac > id_vac, "{ood_vac} vs {id_vac}");
}
