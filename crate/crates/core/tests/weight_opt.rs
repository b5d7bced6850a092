use dwld::model::{NoiseSpec, PriorVector, SceneConfig};
use dwld::solver::SolverOptions;
use dwld::weight_opt::{
    evaluate_f2, optimize_weights, OptimizerSettings, WeightModel, WeightModelKind,
};
use dwld::MatrixKind;

fn scene(prior: PriorVector<f64>) -> SceneConfig<f64> {
    SceneConfig {
        n: 64,
        m: 32,
        sigma_x2: 1.0,
        noise: NoiseSpec::new(0.01).unwrap(),
        prior,
        matrix_kind: MatrixKind::PartialFourier,
        master_seed: 21,
    }
    .with_snr_db(15.0)
    .unwrap()
}

#[test]
fn uniform_prior_matches_one_dimensional_scan() {
    // With p_i = c the linear model only sees lambda0 - alpha c.
    let s = scene(PriorVector::uniform(64, 0.1).unwrap());
    let opts = SolverOptions::default();
    let settings = OptimizerSettings {
        n_mc: 16,
        ..OptimizerSettings::default()
    };
    let found = optimize_weights(WeightModelKind::Linear, &s, &settings, &opts).unwrap();
    let scan_min = (0..60)
        .map(|k| {
            let l = (0.005f64.ln() + (0.6f64.ln() - 0.005f64.ln()) * k as f64 / 59.0).exp();
            evaluate_f2(&WeightModel::linear(l, 0.0), &s, 16, &opts)
                .unwrap()
                .mean_sigma_w2
        })
        .fold(f64::INFINITY, f64::min);
    let got = found.estimate.mean_sigma_w2;
    assert!(
        (got - scan_min).abs() <= 0.02 * scan_min,
        "optimizer {got} vs scan {scan_min}"
    );
}

#[test]
fn full_sampling_surface_is_flat() {
    let mut s = scene(PriorVector::two_level(64, 0.05, 0.6, 0.75).unwrap());
    s.m = 64;
    let opts = SolverOptions::default();
    for m in [
        WeightModel::linear(0.05, 0.0),
        WeightModel::exponential(0.02, 0.5),
        WeightModel::linear(0.4, 0.3),
    ] {
        let f = evaluate_f2(&m, &s, 4, &opts).unwrap();
        assert_eq!(f.mean_sigma_w2, 0.01);
    }
}

#[test]
fn exponential_optimizer_is_no_worse_than_its_grid() {
    let s = scene(PriorVector::two_level(64, 0.05, 0.6, 0.75).unwrap());
    let settings = OptimizerSettings {
        n_mc: 8,
        max_evaluations: 80,
        ..OptimizerSettings::default()
    };
    let r = optimize_weights(
        WeightModelKind::Exponential,
        &s,
        &settings,
        &SolverOptions::default(),
    )
    .unwrap();
    let grid_best = r
        .history
        .iter()
        .filter(|e| e.from_grid)
        .map(|e| e.estimate.mean_sigma_w2)
        .fold(f64::INFINITY, f64::min);
    assert!(r.estimate.mean_sigma_w2 <= grid_best);
    assert!(r.history.len() <= 80);
}
