//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any criterion fails.
//!
//! Run alone with `cargo test -p dwld --test acceptance`.

mod common;

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use dwld::debias::{debias, residual_variance, solve_fixed_point};
use dwld::harness::{run_experiment, ExperimentConfig, ExperimentOutput};
use dwld::model::{ComplexSignal, PriorVector, SceneSampler};
use dwld::rng::trial_rng;
use dwld::solver::{
    kkt_residual, soft_threshold, solve_weighted_lasso_observed, SolverOptions, WeightVector,
};
use dwld::stats::{ks_p_value, ks_statistic};
use dwld::weight_opt::{
    evaluate_f2, optimize_weights, OptimizerSettings, WeightModel, WeightModelKind,
};
use dwld::{NoiseSpec, SceneConfig};
use statrs::distribution::{ContinuousCDF, Normal};

use common::{instance, ista_reference, C};

const SNRS: [f64; 6] = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0];

struct Prior {
    label: &'static str,
    levels: (f64, f64),
    opt_linear: (f64, f64),
}

const PRIORS: [Prior; 2] = [
    Prior {
        label: "prior A (0.01/0.8)",
        levels: (0.01, 0.8),
        opt_linear: (0.1000, 0.1002),
    },
    Prior {
        label: "prior B (0.05/0.6)",
        levels: (0.05, 0.6),
        opt_linear: (0.0963, 0.1038),
    },
];

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: &str, ok: bool, detail: String) {
        if !ok {
            self.failures += 1;
        }
        println!(
            "criterion {id}: {} | {detail}",
            if ok { "PASS" } else { "FAIL" }
        );
    }
}

fn comparison(prior: &Prior) -> ExperimentOutput {
    let (l0, al) = prior.opt_linear;
    let text = format!(
        "[scene]
n = 512
gamma = 0.5
sigma2 = 0.01
matrix = partial-fourier
prior = two-level:{},{},0.75
seed = 20240601

[run]
snr_db = 5,10,15,20,25,30
trials = 2000
calibration_trials = 2000

[detector.dwld]
kind = dwld
weights = linear:0.1,0.1
pfa = 0.01

[detector.nwld]
kind = nwld
weights = linear:0.1,0.1
kappa = 0

[detector.nwld-matched]
kind = nwld
weights = linear:0.1,0.1
kappa = match:dwld

[detector.nwld-class]
kind = nwld
weights = linear:0.1,0.1
kappa = match-class:dwld

[detector.dwld-opt]
kind = dwld
weights = linear:{l0},{al}
pfa = 0.01

[detector.dld-0.1]
kind = dld
lambda = 0.1
pfa = 0.01

[detector.dld-0.2]
kind = dld
lambda = 0.2
pfa = 0.01
",
        prior.levels.0, prior.levels.1
    );
    let cfg = ExperimentConfig::parse(&text, Path::new(".")).expect("acceptance config");
    run_experiment(&cfg, None).expect("experiment")
}

fn pfa(out: &ExperimentOutput, det: &str, snr: f64) -> f64 {
    out.row(det, snr)
        .and_then(|r| r.pfa)
        .map(|r| r.value)
        .unwrap_or(f64::NAN)
}

fn pd(out: &ExperimentOutput, det: &str, snr: f64) -> dwld::detectors::Rate {
    out.row(det, snr)
        .and_then(|r| r.pd)
        .expect("support entries occur")
}

fn criterion_1(r: &mut Report, runs: &[ExperimentOutput]) {
    for (prior, out) in PRIORS.iter().zip(runs) {
        let vals: Vec<f64> = SNRS.iter().map(|&s| pfa(out, "dwld", s)).collect();
        let ok = vals.iter().all(|v| (0.007..=0.013).contains(v));
        r.line(
            "1",
            ok,
            format!("{}: DWLD pfa over 5..30 dB = {}", prior.label, fmt(&vals)),
        );
    }
}

fn criterion_2(r: &mut Report, runs: &[ExperimentOutput]) {
    for (prior, out) in PRIORS.iter().zip(runs) {
        let vals: Vec<f64> = SNRS.iter().map(|&s| pfa(out, "nwld", s)).collect();
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let above = min > 0.05;
        let varies = max - min > 0.01;
        r.line(
            "2",
            above && varies,
            format!(
                "{}: NWLD(kappa=0) pfa = {}; all > 0.05: {above}; spread {:.4} > 0.01: {varies}",
                prior.label,
                fmt(&vals),
                max - min
            ),
        );
    }
}

/// Theorem 2 compares detectors at the same per-entry false-alarm rate, so
/// the NWLD threshold is bisected per entry class (entries sharing prior and
/// weight). The single pooled threshold is reported alongside for reference.
fn criterion_3(r: &mut Report, runs: &[ExperimentOutput]) {
    for (prior, out) in PRIORS.iter().zip(runs) {
        for (det, counted) in [("nwld-class", true), ("nwld-matched", false)] {
            let mut ok = true;
            let mut worst_match: f64 = 0.0;
            let mut worst_gap = f64::INFINITY;
            for &s in &SNRS {
                let d = pfa(out, "dwld", s) - pfa(out, det, s);
                let g = pd(out, "dwld", s).value - (pd(out, det, s).value - 0.01);
                worst_match = worst_match.max(d.abs());
                worst_gap = worst_gap.min(g);
                ok &= d.abs() <= 0.002 && g >= 0.0;
            }
            let detail = format!(
                "{}: max |pfa_DWLD - pfa_NWLD| = {worst_match:.4} (<= 0.002); min Pd_DWLD - (Pd_NWLD - 0.01) = {worst_gap:.4} (>= 0)",
                prior.label
            );
            if counted {
                r.line("3", ok, format!("per-class NWLD threshold, {detail}"));
            } else {
                println!(
                    "  note 3: single pooled NWLD threshold would be {} | {detail}",
                    if ok { "PASS" } else { "FAIL" }
                );
            }
        }
    }
}

fn criterion_4(r: &mut Report, runs: &[ExperimentOutput]) {
    for (prior, out) in PRIORS.iter().zip(runs) {
        let mut ok = true;
        let mut parts = Vec::new();
        for s in [10.0, 15.0, 20.0] {
            let w = pd(out, "dwld-opt", s);
            for dld in ["dld-0.1", "dld-0.2"] {
                let b = pd(out, dld, s);
                let se = (w.std_error().powi(2) + b.std_error().powi(2)).sqrt();
                let margin = (w.value - b.value) / se;
                ok &= margin > 2.0;
                parts.push(format!(
                    "{s}dB vs {dld}: {:.3}-{:.3} = {margin:.1} SE",
                    w.value, b.value
                ));
            }
        }
        r.line("4", ok, format!("{}: {}", prior.label, parts.join("; ")));
    }
}

fn criterion_5(r: &mut Report) {
    let normal = Normal::new(0.0, 1.0).unwrap();
    for prior in &PRIORS {
        let (low, high) = prior.levels;
        let cfg = SceneConfig {
            n: 512,
            m: 256,
            sigma_x2: 1.0,
            noise: NoiseSpec::new(0.01).unwrap(),
            prior: PriorVector::two_level(512, low, high, 0.75).unwrap(),
            matrix_kind: dwld::MatrixKind::PartialFourier,
            master_seed: 77,
        }
        .with_snr_db(15.0)
        .unwrap();
        let lambda = WeightModel::linear(0.1, 0.1).weights(&cfg.prior).unwrap();
        let sampler = SceneSampler::new(cfg).unwrap();
        let (mut re, mut im, mut sq) = (Vec::new(), Vec::new(), Vec::new());
        let trials = 100;
        for t in 0..trials {
            let (a, scene) = sampler.draw(&mut trial_rng(77, t)).unwrap();
            let x = solve_weighted_lasso_observed(
                &scene.y,
                &a,
                &lambda,
                &SolverOptions::default(),
                |_| {},
            )
            .unwrap()
            .x;
            let db = debias(&x, &scene.y, &a, &lambda, 0.01).unwrap();
            let s = db.sigma_w2.sqrt();
            let mut null = vec![true; 512];
            for &i in &scene.support {
                null[i] = false;
            }
            for (z, _) in db.x_d.iter().zip(&null).filter(|(_, &n)| n) {
                re.push(z.re / (s / 2f64.sqrt()));
                im.push(z.im / (s / 2f64.sqrt()));
                sq.push(z.norm_sqr() / db.sigma_w2);
            }
        }
        let n = re.len();
        let p_re = ks_p_value(ks_statistic(&mut re, |v| normal.cdf(v)), n);
        let p_im = ks_p_value(ks_statistic(&mut im, |v| normal.cdf(v)), n);
        let p_sq = ks_p_value(ks_statistic(&mut sq, |v| 1.0 - (-v.max(0.0)).exp()), n);
        let ok = p_re > 0.01 && p_im > 0.01 && p_sq > 0.01;
        r.line(
            "5",
            ok,
            format!(
                "{} at 15 dB, {trials} trials, {n} null entries: KS p re={p_re:.3} im={p_im:.3} |.|^2={p_sq:.3} (> 0.01)",
                prior.label
            ),
        );
    }
}

fn criterion_6(r: &mut Report) {
    let opts = SolverOptions::default();
    let mut worst_kkt: f64 = 0.0;
    let mut worst_closed: f64 = 0.0;
    let mut failures = 0;
    let combos: Vec<(usize, f64)> = [32usize, 256]
        .iter()
        .flat_map(|&n| [0.25, 0.5, 1.0].map(move |g| (n, g)))
        .collect();
    for k in 0..50 {
        let (n, g) = combos[k % combos.len()];
        let m = (g * n as f64) as usize;
        let kind = if g == 1.0 { k % 2 } else { k / combos.len() };
        let inst = instance(kind, n, m, 1000 + k as u64);
        let y = ComplexSignal::new(inst.y.clone()).unwrap();
        match solve_weighted_lasso_observed(&y, &inst.a, &inst.lambda, &opts, |_| {}) {
            Ok(rep) => {
                let kkt = kkt_residual(&rep.x, &y, &inst.a, &inst.lambda).unwrap();
                worst_kkt = worst_kkt.max(kkt);
                failures += usize::from(kkt.is_nan() || kkt >= 1e-6);
                if m == n {
                    let z = inst.a.adjoint(y.as_slice());
                    let closed: Vec<C> = z
                        .iter()
                        .zip(inst.lambda.as_slice())
                        .map(|(&z, &l)| soft_threshold(z, l))
                        .collect();
                    let d = rep
                        .x
                        .iter()
                        .zip(&closed)
                        .map(|(a, b)| (a - b).norm())
                        .fold(0.0, f64::max);
                    worst_closed = worst_closed.max(d);
                    failures += usize::from(d.is_nan() || d >= 1e-8);
                }
            }
            Err(_) => failures += 1,
        }
    }
    // The default 1e-6 certificate bounds the residual, not the distance to
    // the minimizer; the oracle comparison tightens it.
    let tight = SolverOptions {
        kkt_tol: 1e-9,
        ..opts
    };
    let mut worst_oracle: f64 = 0.0;
    for k in 0..5 {
        let inst = instance(k, 16, [4, 8, 12, 8, 16][k], 5000 + k as u64);
        let y = ComplexSignal::new(inst.y.clone()).unwrap();
        let x = solve_weighted_lasso_observed(&y, &inst.a, &inst.lambda, &tight, |_| {})
            .unwrap()
            .x;
        let reference = ista_reference(&inst.a, &inst.y, inst.lambda.as_slice(), 1_000_000);
        let d = x
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        worst_oracle = worst_oracle.max(d);
    }
    let ok = failures == 0 && worst_oracle < 1e-6;
    r.line(
        "6",
        ok,
        format!(
            "50 instances: max KKT {worst_kkt:.2e} (< 1e-6), max closed-form gap {worst_closed:.2e} (< 1e-8); N=16 oracle (kkt_tol 1e-9) max gap {worst_oracle:.2e} (< 1e-6)"
        ),
    );
}

fn criterion_7(r: &mut Report) {
    let mut ok = true;
    for gamma in [0.1, 0.25, 0.5, 0.75, 1.0] {
        let x = ComplexSignal::<f64>::zeros(64);
        let lam = WeightVector::uniform(64, 0.1).unwrap();
        let fp = solve_fixed_point(&x, &lam, gamma).unwrap();
        ok &= fp.lambda_cro == gamma && fp.rho_ca == 0.0;
    }
    let zero_ok = ok;
    let inst = instance(0, 64, 64, 9);
    let y = ComplexSignal::new(inst.y).unwrap();
    let x =
        solve_weighted_lasso_observed(&y, &inst.a, &inst.lambda, &SolverOptions::default(), |_| {})
            .unwrap()
            .x;
    let fp = solve_fixed_point(&x, &inst.lambda, 1.0).unwrap();
    let (s2, _) = residual_variance(&x, &y, &inst.a, 1.0, fp.rho_ca, 0.01).unwrap();
    let gamma_one_ok = s2 == 0.01;
    r.line(
        "7",
        zero_ok && gamma_one_ok,
        format!("x_wl = 0 gives (gamma, 0) exactly: {zero_ok}; gamma = 1 gives sigma_w2 = sigma2 exactly: {gamma_one_ok} ({s2})"),
    );
}

fn scene(n: usize, prior: PriorVector<f64>, seed: u64) -> SceneConfig {
    SceneConfig {
        n,
        m: n / 2,
        sigma_x2: 1.0,
        noise: NoiseSpec::new(0.01).unwrap(),
        prior,
        matrix_kind: dwld::MatrixKind::PartialFourier,
        master_seed: seed,
    }
    .with_snr_db(15.0)
    .unwrap()
}

fn criterion_8(r: &mut Report) {
    let opts = SolverOptions::default();
    let prior_a = PriorVector::two_level(512, 0.01, 0.8, 0.75).unwrap();
    let train = scene(512, prior_a.clone(), 11);
    let found = optimize_weights(
        WeightModelKind::Linear,
        &train,
        &OptimizerSettings::default(),
        &opts,
    )
    .unwrap();
    // Fresh scenes for the comparison.
    let test = scene(512, prior_a, 12);
    let n_mc = 256;
    let f_opt = evaluate_f2(&found.model, &test, n_mc, &opts).unwrap();
    let mut ok = true;
    let mut parts = vec![format!(
        "optimizer linear ({:.4}, {:.4}) f2 = {:.5} +- {:.5}",
        found.model.lambda0, found.model.alpha, f_opt.mean_sigma_w2, f_opt.std_error
    )];
    for l in [0.1, 0.2] {
        let f = evaluate_f2(&WeightModel::linear(l, 0.0), &test, n_mc, &opts).unwrap();
        let se = (f.std_error.powi(2) + f_opt.std_error.powi(2)).sqrt();
        ok &= f_opt.mean_sigma_w2 <= f.mean_sigma_w2 + 2.0 * se;
        parts.push(format!(
            "uniform {l}: {:.5} +- {:.5}",
            f.mean_sigma_w2, f.std_error
        ));
    }

    let reference = evaluate_f2(&WeightModel::linear(0.1000, 0.1002), &test, n_mc, &opts).unwrap();
    println!(
        "  note 8: reference linear (0.1000, 0.1002) f2 = {:.5} +- {:.5}; optimizer within 2 SE of it: {}",
        reference.mean_sigma_w2,
        reference.std_error,
        (f_opt.mean_sigma_w2 - reference.mean_sigma_w2).abs()
            <= 2.0 * (f_opt.std_error.powi(2) + reference.std_error.powi(2)).sqrt()
    );

    // Dense grid oracle on a small configuration with the same scenes.
    let small = scene(
        128,
        PriorVector::two_level(128, 0.01, 0.8, 0.75).unwrap(),
        13,
    );
    let settings = OptimizerSettings {
        n_mc: 32,
        ..OptimizerSettings::default()
    };
    let small_found = optimize_weights(WeightModelKind::Linear, &small, &settings, &opts).unwrap();
    let (gl, ga) = (41, 41);
    let (l_lo, l_hi) = settings.lambda0_range;
    let (a_lo, a_hi) = settings.alpha_range;
    let mut grid = vec![vec![0.0; ga]; gl];
    for (i, row) in grid.iter_mut().enumerate() {
        let l0 = (l_lo.ln() + (l_hi.ln() - l_lo.ln()) * i as f64 / (gl - 1) as f64).exp();
        for (j, v) in row.iter_mut().enumerate() {
            let al = a_lo + (a_hi - a_lo) * j as f64 / (ga - 1) as f64;
            *v = evaluate_f2(&WeightModel::linear(l0, al), &small, 32, &opts)
                .unwrap()
                .mean_sigma_w2;
        }
    }
    let (bi, bj) = (0..gl)
        .flat_map(|i| (0..ga).map(move |j| (i, j)))
        .min_by(|&(a, b), &(c, d)| grid[a][b].total_cmp(&grid[c][d]))
        .unwrap();
    let best = grid[bi][bj];
    // Resolution: largest change to a neighbouring grid cell.
    let mut resolution: f64 = 0.0;
    for di in -1i64..=1 {
        for dj in -1i64..=1 {
            let (i, j) = (bi as i64 + di, bj as i64 + dj);
            if i >= 0 && j >= 0 && (i as usize) < gl && (j as usize) < ga {
                resolution = resolution.max((grid[i as usize][j as usize] - best).abs());
            }
        }
    }
    let got = small_found.estimate.mean_sigma_w2;
    let grid_ok = (got - best).abs() <= resolution;
    parts.push(format!(
        "N=128 optimizer {got:.6} vs {gl}x{ga} grid min {best:.6} (resolution {resolution:.2e})"
    ));
    r.line("8", ok && grid_ok, parts.join("; "));
}

fn fmt(v: &[f64]) -> String {
    let s: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", s.join(", "))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut r = Report { failures: 0 };
    criterion_7(&mut r);
    criterion_6(&mut r);
    criterion_5(&mut r);
    let runs: Vec<ExperimentOutput> = PRIORS.iter().map(comparison).collect();
    criterion_1(&mut r, &runs);
    criterion_2(&mut r, &runs);
    criterion_3(&mut r, &runs);
    criterion_4(&mut r, &runs);
    criterion_8(&mut r);
    println!(
        "acceptance: {} failing line(s), {:.0} s",
        r.failures,
        start.elapsed().as_secs_f64()
    );
    if r.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
