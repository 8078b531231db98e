mod common;

use common::tiny;
use csiforge::channel::TwinPerturbation;
use csiforge::neural::{Decoder, Init, RefinerNet};
use csiforge::training::{self, generate, split, train, twin_transfer_experiment, Scheme};
use csiforge::Error;

#[test]
fn zero_epochs_return_the_identity_refiner() {
    let mut c = tiny(Scheme::TwoStageRate, 8, 0);
    c.training.init = Init::Zero;
    let ds = generate(&c, None).unwrap();
    let out = train(&c, &ds).unwrap();
    assert_eq!(out.decoder, Decoder::Refiner(RefinerNet::identity(1)));
    assert_eq!(out.best_epoch, 0);
    assert_eq!(out.curve.len(), 1);
    assert_eq!(out.curve[0].train_loss, None);
}

#[test]
fn zero_init_two_stage_matches_codebook_only_exactly() {
    let mut c = tiny(Scheme::TwoStageRate, 20, 0);
    c.training.init = Init::Zero;
    let e = training::run_experiment(&c).unwrap();
    let a = e.report.samples("TWO_STAGE_RATE").unwrap();
    let b = e.report.samples("CODEBOOK_ONLY").unwrap();
    assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
}

#[test]
fn same_seed_gives_identical_curves_and_models() {
    for scheme in [Scheme::TwoStageRate, Scheme::TwoStageRecon, Scheme::E2E] {
        let c = tiny(scheme, 12, 2);
        let ds = generate(&c, None).unwrap();
        let a = train(&c, &ds).unwrap();
        let b = train(&c, &ds).unwrap();
        assert_eq!(a, b, "{scheme}");
        assert_eq!(a.curve.len(), 3);
        assert!(a.curve[1..].iter().all(|l| l.train_loss.is_some_and(f64::is_finite)));
    }
}

#[test]
fn different_seeds_give_different_models() {
    let mut c = tiny(Scheme::TwoStageRate, 12, 1);
    let ds = generate(&c, None).unwrap();
    let a = train(&c, &ds).unwrap();
    c.training.seed += 1;
    let b = train(&c, &ds).unwrap();
    assert_ne!(a.decoder, b.decoder);
}

#[test]
fn encoder_decoder_benchmark_trains() {
    let c = tiny(Scheme::EncdecBenchmark, 8, 1);
    let ds = generate(&c, None).unwrap();
    let out = train(&c, &ds).unwrap();
    assert!(matches!(out.decoder, Decoder::EncoderDecoder(_)));
    assert!(out.curve[1].val_rate.is_some_and(f64::is_finite));
}

#[test]
fn non_finite_loss_aborts_with_diagnostics() {
    let mut c = tiny(Scheme::TwoStageRate, 8, 1);
    c.training.validation_fraction = 0.0;
    let mut ds = generate(&c, None).unwrap();
    ds.records[2].user_channels[1].freq[(0, 0)].re = f64::NAN;
    match train(&c, &ds) {
        Err(e @ Error::Numerical(_)) => {
            assert!(e.to_string().contains("record 2"), "{e}");
            assert_eq!(e.exit_code(), 4);
        }
        other => panic!("expected a numerical failure, got {other:?}"),
    }
}

#[test]
fn mismatched_user_count_is_rejected() {
    let c = tiny(Scheme::TwoStageRate, 4, 1);
    let ds = generate(&c, None).unwrap();
    let other = csiforge::training::ExperimentConfig { n_users: 3, ..c };
    assert!(matches!(train(&other, &ds), Err(Error::Config(_))));
}

#[test]
fn untrained_schemes_are_refused() {
    let c = tiny(Scheme::CodebookOnly, 4, 1);
    let ds = generate(&c, None).unwrap();
    assert!(train(&c, &ds).is_err());
}

#[test]
fn identity_twin_reproduces_the_target_rows() {
    let mut c = tiny(Scheme::TwoStageRate, 12, 1);
    c.twin = TwinPerturbation::identity();
    let study = twin_transfer_experiment(&c).unwrap();
    let target = study.report.samples(training::TARGET_TRAINED).unwrap();
    assert_eq!(study.report.samples(training::TWIN_FOLIAGE).unwrap(), target);
    assert_eq!(study.report.samples(training::TWIN_FOLIAGE_POSITION).unwrap(), target);
    assert_eq!(study.twin_full, study.target);
}

#[test]
fn twin_study_reports_every_row() {
    let c = tiny(Scheme::TwoStageRate, 12, 1);
    let study = twin_transfer_experiment(&c).unwrap();
    let names: Vec<&str> = study.report.rows.iter().map(|r| r.method.as_str()).collect();
    assert_eq!(
        names,
        [training::TARGET_TRAINED, training::TWIN_FOLIAGE, training::TWIN_FOLIAGE_POSITION, "CODEBOOK_ONLY", "GENIE"]
    );
    let (train_set, _) = split(&c, &generate(&c, None).unwrap());
    assert_eq!(study.target, train(&c, &train_set).unwrap());
}

#[test]
fn rate_training_lowers_the_loss() {
    // The rate loss is negative, so "lower" means a higher training rate.
    let c = tiny(Scheme::TwoStageRate, 64, 4);
    let ds = generate(&c, None).unwrap();
    let out = train(&c, &ds).unwrap();
    let first = out.curve[1].train_loss.unwrap();
    let last = out.curve.last().unwrap().train_loss.unwrap();
    assert!(last < first, "train loss {first} -> {last}");
}
