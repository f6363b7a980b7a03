use badge_core::data::{synth_gaussian_mixture, SplitSpec};
use badge_core::mlp::{
    predict_pool, test_accuracy, train_from_scratch, MlpConfig, MlpParams, StopReason,
};

#[test]
fn well_separated_mixture_is_learned() {
    let data = synth_gaussian_mixture(3, 16, 1500, 100.0, 4, SplitSpec::default()).unwrap();
    let mut cfg = MlpConfig::new(data.input_dim(), 32, data.num_classes());
    cfg.rng_seed = 1;
    let out = train_from_scratch(&cfg, &data.train_features(), &data.train_labels()).unwrap();
    assert_eq!(out.stop, StopReason::ThresholdReached);
    let acc = test_accuracy(&out.params, &data.test_features(), &data.test_labels()).unwrap();
    assert!(acc > 0.95, "test accuracy {acc}");
}

#[test]
fn predictions_are_distributions_with_hidden_features() {
    let data = synth_gaussian_mixture(4, 5, 200, 3.0, 2, SplitSpec::default()).unwrap();
    let cfg = MlpConfig::new(5, 12, 4);
    let params = MlpParams::init(&cfg).unwrap();
    let x = data.train_features();
    let rows: Vec<usize> = (0..x.rows()).step_by(7).collect();
    let recs = predict_pool(&params, &x, &rows).unwrap();
    assert_eq!(recs.len(), rows.len());
    for (r, &row) in recs.iter().zip(&rows) {
        assert_eq!(r.example_id, row);
        assert_eq!(r.probs.len(), 4);
        assert_eq!(r.features.len(), 12);
        assert!((r.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(r.features.iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn checkpoint_survives_a_file_round_trip() {
    let cfg = MlpConfig::new(3, 7, 2);
    let params = MlpParams::init(&cfg).unwrap();
    let tmp = tempfile::NamedTempFile::new().unwrap();
    params
        .write_checkpoint(std::fs::File::create(tmp.path()).unwrap())
        .unwrap();
    let back = MlpParams::read_checkpoint(std::fs::File::open(tmp.path()).unwrap()).unwrap();
    assert_eq!(back.as_flat(), params.as_flat());
    assert_eq!(back.hidden_dim(), 7);
}

#[test]
fn zero_separation_is_near_chance() {
    let data = synth_gaussian_mixture(4, 6, 4000, 0.0, 8, SplitSpec::default()).unwrap();
    let mut cfg = MlpConfig::new(6, 16, 4);
    cfg.max_epochs = 20;
    let out = train_from_scratch(&cfg, &data.train_features(), &data.train_labels()).unwrap();
    let acc = test_accuracy(&out.params, &data.test_features(), &data.test_labels()).unwrap();
    // 800 test points: chance is 0.25 with a standard error near 0.015.
    assert!((acc - 0.25).abs() < 0.08, "test accuracy {acc}");
}
