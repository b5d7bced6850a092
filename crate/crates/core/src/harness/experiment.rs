//! Monte Carlo sweep over SNR points and detectors.
//!
//! Trial `t` draws from `trial_rng(seed, t)` at every SNR point, and the
//! amplitude variance only rescales the draws, so SNR points share matrices,
//! supports, phases and noise. Trials run in fixed chunks whose results are
//! folded in chunk order, which makes the output independent of thread count.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::detectors::{
    calibrate_nwld_threshold, dwld_from_estimate, nwld_detect, DecisionVector, MetricsAccumulator,
    Rate, ThresholdVector,
};
use crate::error::{Error, Result};
use crate::model::{sigma_x2_for_snr, ComplexSignal, SceneSampler};
use crate::rng::{derive_seed, trial_rng};
use crate::solver::{solve_weighted_lasso, WeightVector};

use super::config::{DetectorKind, ExperimentConfig, NwldThreshold, OutputFormat};
use super::io::{write_complex_vector, write_matrix, write_real_vector};

const CHUNK: usize = 32;
/// Stream index reserved for the NWLD calibration ensemble.
const CALIBRATION_STREAM: u64 = u64::MAX;

pub const CSV_HEADER: &str = "detector,snr_db,pfa_target,pfa_emp,pfa_lo,pfa_hi,pd_emp,pd_lo,pd_hi,sigma_w2_mean,rho_ca_mean,n_trials,n_infeasible";

/// Pooled results for one detector at one SNR point.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRow {
    pub detector: String,
    pub kind: &'static str,
    pub snr_db: f64,
    /// Configured or calibration-derived false-alarm target.
    pub pfa_target: Option<f64>,
    /// NWLD thresholds actually used: one value, or one per entry class for
    /// class-matched thresholds (classes ordered by first entry).
    pub kappa_wl: Option<Vec<f64>>,
    pub pfa: Option<Rate>,
    pub pd: Option<Rate>,
    pub sigma_w2_mean: Option<f64>,
    pub rho_ca_mean: Option<f64>,
    pub n_trials: usize,
    pub n_infeasible: usize,
    #[serde(skip)]
    pub metrics: MetricsAccumulator,
}

impl ResultRow {
    pub fn to_csv(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        let (pv, pl, ph) = rate_cols(self.pfa);
        let (dv, dl, dh) = rate_cols(self.pd);
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.detector,
            self.snr_db,
            opt(self.pfa_target),
            pv,
            pl,
            ph,
            dv,
            dl,
            dh,
            opt(self.sigma_w2_mean),
            opt(self.rho_ca_mean),
            self.n_trials,
            self.n_infeasible
        )
    }
}

fn rate_cols(r: Option<Rate>) -> (String, String, String) {
    match r {
        Some(r) => (r.value.to_string(), r.lo.to_string(), r.hi.to_string()),
        None => Default::default(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentOutput {
    pub config: String,
    pub seed: u64,
    pub rows: Vec<ResultRow>,
}

impl ExperimentOutput {
    pub fn row(&self, detector: &str, snr_db: f64) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.detector == detector && r.snr_db == snr_db)
    }

    /// `true` when every debiased detector row is entirely infeasible.
    pub fn all_infeasible(&self) -> bool {
        let mut debiased = self.rows.iter().filter(|r| r.kind != "nwld").peekable();
        debiased.peek().is_some() && debiased.all(|r| r.n_infeasible == r.n_trials)
    }
}

/// Writes results as CSV (with the resolved config as `#` comments) or JSON.
pub fn write_results<W: Write>(
    out: &ExperimentOutput,
    format: OutputFormat,
    mut w: W,
) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            writeln!(w, "# seed = {}", out.seed)?;
            for line in out.config.lines() {
                writeln!(w, "# {line}")?;
            }
            writeln!(w, "{CSV_HEADER}")?;
            for r in &out.rows {
                writeln!(w, "{}", r.to_csv())?;
            }
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut w, out).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Deduplicated weight vectors; detectors with equal weights share a solve.
struct Plan {
    slots: Vec<WeightVector<f64>>,
    slot_of: Vec<usize>,
    pfa: Vec<Option<Vec<f64>>>,
    kinds: Vec<DetectorKind>,
    prior: Vec<f64>,
    n: usize,
    sigma2: f64,
    gamma: f64,
}

impl Plan {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let prior = cfg.prior.build(cfg.n)?;
        let mut slots: Vec<WeightVector<f64>> = Vec::new();
        let mut slot_of = Vec::new();
        for d in &cfg.detectors {
            let w = d.weights.build(&prior)?;
            let idx = match slots.iter().position(|s| *s == w) {
                Some(i) => i,
                None => {
                    slots.push(w);
                    slots.len() - 1
                }
            };
            slot_of.push(idx);
        }
        Ok(Plan {
            slots,
            slot_of,
            pfa: cfg
                .detectors
                .iter()
                .map(|d| d.pfa.map(|p| vec![p; cfg.n]))
                .collect(),
            kinds: cfg.detectors.iter().map(|d| d.kind).collect(),
            prior: prior.as_slice().to_vec(),
            n: cfg.n,
            sigma2: cfg.sigma2,
            gamma: cfg.m as f64 / cfg.n as f64,
        })
    }
}

/// Per-detector outcome of one trial; `None` marks an infeasible trial.
struct Outcome {
    decisions: Option<DecisionVector>,
    sigma_w2: f64,
    rho_ca: f64,
    /// Null-entry `(index, |x_wl|^2)` pairs, only gathered during calibration.
    null_sq: Vec<(usize, f64)>,
}

fn numerical<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e) if e.is_numerical() => Ok(None),
        Err(e) => Err(e),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_trial(
    plan: &Plan,
    sampler: &SceneSampler<f64>,
    opts: &crate::solver::SolverOptions<f64>,
    kappas: &[Option<Vec<f64>>],
    active: &[bool],
    collect_null: &[bool],
    seed: u64,
    t: u64,
) -> Result<(Vec<usize>, Vec<Option<Outcome>>)> {
    let mut rng = trial_rng(seed, t);
    let (a, scene) = sampler.draw(&mut rng)?;
    let mut solves: Vec<Option<Option<ComplexSignal<f64>>>> = vec![None; plan.slots.len()];
    let mut out = Vec::with_capacity(plan.kinds.len());
    for (d, &kind) in plan.kinds.iter().enumerate() {
        if !active[d] {
            out.push(None);
            continue;
        }
        let slot = plan.slot_of[d];
        let w = &plan.slots[slot];
        if solves[slot].is_none() {
            solves[slot] = Some(numerical(solve_weighted_lasso(&scene.y, &a, w, opts))?);
        }
        let Some(x_wl) = solves[slot].as_ref().and_then(|s| s.as_ref()) else {
            out.push(Some(Outcome {
                decisions: None,
                sigma_w2: 0.0,
                rho_ca: 0.0,
                null_sq: Vec::new(),
            }));
            continue;
        };
        let null_sq = if collect_null[d] {
            let mut in_support = vec![false; plan.n];
            for &i in &scene.support {
                in_support[i] = true;
            }
            x_wl.iter()
                .enumerate()
                .filter(|&(i, _)| !in_support[i])
                .map(|(i, v)| (i, v.norm_sqr()))
                .collect()
        } else {
            Vec::new()
        };
        let outcome = if kind.is_debiased() {
            let pfa = plan.pfa[d].as_ref().expect("validated");
            match numerical(dwld_from_estimate(
                x_wl.clone(),
                &scene.y,
                &a,
                w,
                pfa,
                plan.sigma2,
            ))? {
                Some(o) => Outcome {
                    decisions: Some(o.decisions),
                    sigma_w2: o.debias.sigma_w2,
                    rho_ca: o.debias.rho_ca,
                    null_sq,
                },
                None => Outcome {
                    decisions: None,
                    sigma_w2: 0.0,
                    rho_ca: 0.0,
                    null_sq,
                },
            }
        } else {
            let kappa = kappas[d]
                .as_ref()
                .expect("threshold resolved before main run");
            let th = ThresholdVector::new(kappa.clone())?;
            Outcome {
                decisions: Some(nwld_detect(x_wl, &th)?),
                sigma_w2: 0.0,
                rho_ca: 0.0,
                null_sq,
            }
        };
        out.push(Some(outcome));
    }
    Ok((scene.support, out))
}

#[derive(Clone)]
struct Tally {
    metrics: MetricsAccumulator,
    sigma_sum: f64,
    rho_sum: f64,
    feasible: usize,
    infeasible: usize,
    null_sq: Vec<(usize, f64)>,
}

impl Tally {
    fn new(n: usize) -> Self {
        Tally {
            metrics: MetricsAccumulator::new(n),
            sigma_sum: 0.0,
            rho_sum: 0.0,
            feasible: 0,
            infeasible: 0,
            null_sq: Vec::new(),
        }
    }

    fn add(&mut self, support: &[usize], o: Outcome) -> Result<()> {
        self.null_sq.extend(o.null_sq);
        match o.decisions {
            Some(dv) => {
                self.metrics.accumulate(&dv, support)?;
                self.sigma_sum += o.sigma_w2;
                self.rho_sum += o.rho_ca;
                self.feasible += 1;
            }
            None => self.infeasible += 1,
        }
        Ok(())
    }

    fn merge(&mut self, other: Tally) -> Result<()> {
        self.metrics.merge(&other.metrics)?;
        self.sigma_sum += other.sigma_sum;
        self.rho_sum += other.rho_sum;
        self.feasible += other.feasible;
        self.infeasible += other.infeasible;
        self.null_sq.extend(other.null_sq);
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn run_ensemble(
    plan: &Plan,
    sampler: &SceneSampler<f64>,
    opts: &crate::solver::SolverOptions<f64>,
    kappas: &[Option<Vec<f64>>],
    active: &[bool],
    collect_null: &[bool],
    seed: u64,
    n_trials: usize,
) -> Result<Vec<Tally>> {
    let n_chunks = n_trials.div_ceil(CHUNK);
    let chunks: Vec<Result<Vec<Tally>>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut tallies = vec![Tally::new(plan.n); plan.kinds.len()];
            for t in c * CHUNK..((c + 1) * CHUNK).min(n_trials) {
                let (support, outcomes) = run_trial(
                    plan,
                    sampler,
                    opts,
                    kappas,
                    active,
                    collect_null,
                    seed,
                    t as u64,
                )?;
                for (tally, o) in tallies.iter_mut().zip(outcomes) {
                    if let Some(o) = o {
                        tally.add(&support, o)?;
                    }
                }
            }
            Ok(tallies)
        })
        .collect();
    let mut total = vec![Tally::new(plan.n); plan.kinds.len()];
    for chunk in chunks {
        for (acc, t) in total.iter_mut().zip(chunk?) {
            acc.merge(t)?;
        }
    }
    Ok(total)
}

/// NWLD threshold resolved for one SNR point.
#[derive(Default, Clone)]
struct Resolved {
    /// Per-entry thresholds.
    kappa: Option<Vec<f64>>,
    /// Distinct thresholds for reporting.
    summary: Option<Vec<f64>>,
    /// Pooled false-alarm rate the calibration aimed at.
    target: Option<f64>,
}

/// Groups entries with equal `(prior, weight, target weight)`; returns the
/// class of every entry, classes numbered by first appearance.
fn entry_classes(prior: &[f64], w: &[f64], w_target: &[f64]) -> (Vec<usize>, usize) {
    let mut keys: Vec<(u64, u64, u64)> = Vec::new();
    let class = (0..prior.len())
        .map(|i| {
            let key = (prior[i].to_bits(), w[i].to_bits(), w_target[i].to_bits());
            match keys.iter().position(|k| *k == key) {
                Some(c) => c,
                None => {
                    keys.push(key);
                    keys.len() - 1
                }
            }
        })
        .collect();
    (class, keys.len())
}

/// Resolves NWLD thresholds that must be calibrated at this SNR point.
fn calibrate(
    cfg: &ExperimentConfig,
    plan: &Plan,
    sampler: &SceneSampler<f64>,
) -> Result<Vec<Resolved>> {
    let nd = cfg.detectors.len();
    let mut resolved = vec![Resolved::default(); nd];
    let mut active = vec![false; nd];
    let mut collect = vec![false; nd];
    let target_of = |name: &str| {
        cfg.detectors
            .iter()
            .position(|o| o.name == name)
            .expect("validated")
    };
    for (d, spec) in cfg.detectors.iter().enumerate() {
        match &spec.kappa {
            Some(NwldThreshold::Fixed(k)) => {
                resolved[d].kappa = Some(vec![*k; plan.n]);
                resolved[d].summary = Some(vec![*k]);
            }
            Some(NwldThreshold::MatchRate(_)) => {
                active[d] = true;
                collect[d] = true;
            }
            Some(NwldThreshold::MatchDetector { target, .. }) => {
                active[d] = true;
                collect[d] = true;
                active[target_of(target)] = true;
            }
            None => {}
        }
    }
    if !collect.iter().any(|&c| c) {
        return Ok(resolved);
    }
    // NWLD detectors are only sampled for their magnitudes here; give them a
    // placeholder threshold so the trial runner can evaluate them.
    let placeholder: Vec<Option<Vec<f64>>> = resolved
        .iter()
        .map(|r| r.kappa.clone().or_else(|| Some(vec![0.0; plan.n])))
        .collect();
    let seed = derive_seed(cfg.master_seed, CALIBRATION_STREAM);
    let tallies = run_ensemble(
        plan,
        sampler,
        &cfg.solver,
        &placeholder,
        &active,
        &collect,
        seed,
        cfg.calibration_trials,
    )?;
    let infeasible = || Error::DebiasInfeasible {
        rho: f64::NAN,
        gamma: plan.gamma,
    };
    for (d, spec) in cfg.detectors.iter().enumerate() {
        let pooled: Vec<f64> = tallies[d].null_sq.iter().map(|&(_, v)| v).collect();
        match &spec.kappa {
            Some(NwldThreshold::MatchRate(r)) => {
                let k = calibrate_nwld_threshold(&pooled, *r)?;
                resolved[d] = Resolved {
                    kappa: Some(vec![k; plan.n]),
                    summary: Some(vec![k]),
                    target: Some(*r),
                };
            }
            Some(NwldThreshold::MatchDetector {
                target,
                per_class: false,
            }) => {
                // Every calibration trial of the target may have been infeasible.
                let r = tallies[target_of(target)]
                    .metrics
                    .total_pfa()
                    .ok_or_else(infeasible)?
                    .value;
                let k = calibrate_nwld_threshold(&pooled, r)?;
                resolved[d] = Resolved {
                    kappa: Some(vec![k; plan.n]),
                    summary: Some(vec![k]),
                    target: Some(r),
                };
            }
            Some(NwldThreshold::MatchDetector {
                target,
                per_class: true,
            }) => {
                let t = target_of(target);
                let m = &tallies[t].metrics;
                let (class, n_classes) = entry_classes(
                    &plan.prior,
                    plan.slots[plan.slot_of[d]].as_slice(),
                    plan.slots[plan.slot_of[t]].as_slice(),
                );
                let mut fa = vec![0u64; n_classes];
                let mut nulls = vec![0u64; n_classes];
                for i in 0..plan.n {
                    fa[class[i]] += m.false_alarms()[i];
                    nulls[class[i]] += m.null_occurrences()[i];
                }
                let mut samples = vec![Vec::new(); n_classes];
                for &(i, v) in &tallies[d].null_sq {
                    samples[class[i]].push(v);
                }
                let mut per_class = Vec::with_capacity(n_classes);
                for c in 0..n_classes {
                    if nulls[c] == 0 || samples[c].is_empty() {
                        // No null occurrences to calibrate on: never reject.
                        per_class.push(f64::INFINITY);
                    } else {
                        per_class.push(calibrate_nwld_threshold(
                            &samples[c],
                            fa[c] as f64 / nulls[c] as f64,
                        )?);
                    }
                }
                resolved[d] = Resolved {
                    kappa: Some(class.iter().map(|&c| per_class[c]).collect()),
                    summary: Some(per_class),
                    target: Some(m.total_pfa().ok_or_else(infeasible)?.value),
                };
            }
            _ => {}
        }
    }
    Ok(resolved)
}

/// Runs the configured sweep. With `dump`, trial 0 of every SNR point is
/// written there as `snr<k>_y.txt`, `snr<k>_a.txt`, `snr<k>_x0.txt`, plus one
/// `weights_<detector>.txt` per detector.
pub fn run_experiment(cfg: &ExperimentConfig, dump: Option<&Path>) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let plan = Plan::new(cfg)?;
    let base = SceneSampler::new(cfg.scene(1.0)?)?;
    let gamma = plan.gamma;
    if let Some(dir) = dump {
        std::fs::create_dir_all(dir)?;
        for (d, spec) in cfg.detectors.iter().enumerate() {
            let w = &plan.slots[plan.slot_of[d]];
            write_real_vector(
                &dir.join(format!("weights_{}.txt", spec.name)),
                w.as_slice(),
            )?;
        }
    }
    let nd = cfg.detectors.len();
    let mut rows = Vec::with_capacity(nd * cfg.snr_db.len());
    for (k, &snr_db) in cfg.snr_db.iter().enumerate() {
        let sampler = base.with_sigma_x2(sigma_x2_for_snr(snr_db, gamma, cfg.sigma2)?)?;
        if let Some(dir) = dump {
            let (a, scene) = sampler.draw(&mut trial_rng(cfg.master_seed, 0))?;
            write_complex_vector(&dir.join(format!("snr{k}_y.txt")), scene.y.as_slice())?;
            write_complex_vector(&dir.join(format!("snr{k}_x0.txt")), scene.x0.as_slice())?;
            write_matrix(&dir.join(format!("snr{k}_a.txt")), &a)?;
        }
        let resolved = calibrate(cfg, &plan, &sampler)?;
        let kappas: Vec<Option<Vec<f64>>> = resolved.iter().map(|r| r.kappa.clone()).collect();
        let all = vec![true; nd];
        let none = vec![false; nd];
        let tallies = run_ensemble(
            &plan,
            &sampler,
            &cfg.solver,
            &kappas,
            &all,
            &none,
            cfg.master_seed,
            cfg.n_trials,
        )?;
        for ((d, spec), t) in cfg.detectors.iter().enumerate().zip(tallies) {
            let debiased = spec.kind.is_debiased();
            let mean = |s: f64| (debiased && t.feasible > 0).then(|| s / t.feasible as f64);
            rows.push(ResultRow {
                detector: spec.name.clone(),
                kind: spec.kind.name(),
                snr_db,
                pfa_target: spec.pfa.or(resolved[d].target),
                kappa_wl: resolved[d].summary.clone(),
                pfa: t.metrics.total_pfa(),
                pd: t.metrics.total_pd(),
                sigma_w2_mean: mean(t.sigma_sum),
                rho_ca_mean: mean(t.rho_sum),
                n_trials: cfg.n_trials,
                n_infeasible: t.infeasible,
                metrics: t.metrics,
            });
        }
    }
    Ok(ExperimentOutput {
        config: cfg.render(),
        seed: cfg.master_seed,
        rows,
    })
}
