use pdd_rdo::qoi::{CountingModel, Dataset, FnModel, QoiModel, SyntheticKind, SyntheticModel};
use pdd_rdo::rdo::{evaluate_design, run_rdo, DesignSpace, NelderMeadOptions, RdoSetup, TrainingPlan, MEAN_PENALTY};
use pdd_rdo::regression::SdMorphConfig;
use pdd_rdo::InputLaw;

const D0: [f64; 2] = [0.825, 8.0e-4];

fn plan(samples: usize, m: usize) -> TrainingPlan {
    TrainingPlan {
        samples,
        m,
        ..TrainingPlan::default()
    }
}

fn setup(model: &dyn QoiModel, plan: &TrainingPlan) -> RdoSetup {
    RdoSetup::from_model(
        model,
        &InputLaw::fluidized_bed(),
        &InputLaw::FLUIDIZED_BED_MEANS,
        DesignSpace::fluidized_bed(),
        &D0,
        plan,
        &SdMorphConfig::default(),
    )
    .unwrap()
}

#[test]
fn identity_design_and_monotone_mean() {
    let model = CountingModel::new(SyntheticModel::fluidized_bed(SyntheticKind::NonPoly));
    let s = setup(&model, &plan(120, 6));
    assert_eq!(model.calls(), 120);
    let at_d0 = evaluate_design(&D0, s.trainer(), s.nominal_means(), s.space()).unwrap();
    let init = s.initial_moments();
    assert!((at_d0.mean - init.mean).abs() <= 1e-8 * init.mean.abs());
    assert!((at_d0.sd() - init.sd()).abs() <= 1e-8 * init.sd());
    let low = s.evaluate(&[0.625, 8.0e-4]).unwrap();
    let high = s.evaluate(&[1.025, 8.0e-4]).unwrap();
    assert!(high.mean > low.mean);
    assert_eq!(model.calls(), 120);
}

#[test]
fn rerun_is_bitwise_identical() {
    let model = SyntheticModel::fluidized_bed(SyntheticKind::Poly2x11);
    let p = plan(80, 5);
    let a = setup(&model, &p);
    let b = setup(&model, &p);
    assert_eq!(a.surrogate().coefficients(), b.surrogate().coefficients());
    let nm = NelderMeadOptions::default();
    let ra = run_rdo(&a, &a.config(0.5, 0.5, &nm)).unwrap();
    let rb = run_rdo(&b, &b.config(0.5, 0.5, &nm)).unwrap();
    assert_eq!(ra, rb);
    assert!(ra.retrains <= ra.evaluations);
}

#[test]
fn dataset_route_matches_model_route() {
    let model = SyntheticModel::fluidized_bed(SyntheticKind::Poly2x11);
    let p = plan(60, 4);
    let via_model = setup(&model, &p);
    let law = DesignSpace::fluidized_bed()
        .law_at(&InputLaw::fluidized_bed(), &D0, &InputLaw::FLUIDIZED_BED_MEANS)
        .unwrap();
    let x = law.sample_lhs(p.samples, p.seed);
    let q = (0..x.nrows())
        .map(|r| model.evaluate(&x.row(r).iter().copied().collect::<Vec<_>>()).unwrap())
        .collect();
    let via_data = RdoSetup::from_dataset(
        &Dataset::new(x, q).unwrap(),
        &InputLaw::fluidized_bed(),
        &InputLaw::FLUIDIZED_BED_MEANS,
        DesignSpace::fluidized_bed(),
        &D0,
        &p,
        &SdMorphConfig::default(),
    )
    .unwrap();
    assert_eq!(
        via_model.surrogate().coefficients(),
        via_data.surrogate().coefficients()
    );
}

#[test]
fn non_positive_mean_is_penalized() {
    let model = FnModel(|x: &[f64]| Ok(-1000.0 * x[1] / 0.825));
    let s = setup(&model, &plan(40, 3));
    assert!(s.initial_moments().mean < 0.0);
    let opts = NelderMeadOptions {
        max_evals: 20,
        ..NelderMeadOptions::default()
    };
    let r = run_rdo(&s, &s.config(1.0, 0.0, &opts)).unwrap();
    assert_eq!(r.trajectory[0].objective, MEAN_PENALTY);
}

#[test]
fn rejects_bad_weights_and_start() {
    let model = SyntheticModel::fluidized_bed(SyntheticKind::Poly2x11);
    let s = setup(&model, &plan(40, 3));
    let nm = NelderMeadOptions::default();
    assert!(run_rdo(&s, &s.config(0.6, 0.6, &nm)).is_err());
    let mut cfg = s.config(1.0, 0.0, &nm);
    cfg.d0 = vec![2.0, 8.0e-4];
    assert!(run_rdo(&s, &cfg).is_err());
}

#[test]
fn retrain_r2_degrades_away_from_training_support() {
    let model = SyntheticModel::fluidized_bed(SyntheticKind::Poly2x11);
    let s = setup(&model, &plan(200, 6));
    let law = InputLaw::fluidized_bed();
    let near = s.retrain_r2(&D0, &model, &law, 300, 5).unwrap();
    let inside = s.retrain_r2(&[0.8, 7.0e-4], &model, &law, 300, 5).unwrap();
    let far = s.retrain_r2(&[0.825, 1.1e-3], &model, &law, 300, 5).unwrap();
    assert!(near > 0.99, "R² at d0 = {near}");
    assert!(inside > 0.95, "R² inside = {inside}");
    assert!(far < inside, "R² at upper d2 = {far}, inside = {inside}");
}
