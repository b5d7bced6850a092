//! Experiment configuration: flat `key = value` lines under `[section]`
//! headers, `#` comments, comma-separated lists.
//!
//! ```text
//! [scene]
//! n = 512
//! gamma = 0.5
//! sigma2 = 0.01
//! matrix = partial-fourier
//! prior = two-level:0.01,0.8,0.75
//! seed = 1
//!
//! [run]
//! snr_db = 5, 10, 15, 20, 25, 30
//! trials = 2000
//!
//! [detector.dwld-1]
//! kind = dwld
//! weights = linear:0.1,0.1
//! pfa = 0.01
//!
//! [detector.nwld-1]
//! kind = nwld
//! weights = linear:0.1,0.1
//! kappa = 0
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{MatrixKind, NoiseSpec, PriorVector, SceneConfig};
use crate::solver::{SolverOptions, WeightVector};
use crate::weight_opt::{OptimizerSettings, WeightModel, WeightModelKind};

use super::io::read_real_vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Parse(format!("unknown format '{other}'"))),
        }
    }
}

impl OutputFormat {
    fn name(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threads {
    Auto,
    Fixed(usize),
}

impl std::str::FromStr for Threads {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Threads::Auto);
        }
        match s.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(Threads::Fixed(k)),
            _ => Err(Error::Parse(format!(
                "threads must be 'auto' or a positive integer, got '{s}'"
            ))),
        }
    }
}

impl std::fmt::Display for Threads {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Threads::Auto => f.write_str("auto"),
            Threads::Fixed(k) => write!(f, "{k}"),
        }
    }
}

/// How the prior vector was specified; kept for the config echo.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorSpec {
    Uniform(f64),
    TwoLevel { low: f64, high: f64, split: f64 },
    Values(Vec<f64>),
}

impl PriorSpec {
    fn parse(value: &str, base: &Path) -> Result<Self> {
        let (tag, rest) = split_tag(value)?;
        match tag {
            "uniform" => Ok(PriorSpec::Uniform(parse_f64(rest, "prior")?)),
            "two-level" => {
                let v = parse_list(rest)?;
                match v.as_slice() {
                    [low, high] => Ok(PriorSpec::TwoLevel {
                        low: *low,
                        high: *high,
                        split: 0.75,
                    }),
                    [low, high, split] => Ok(PriorSpec::TwoLevel {
                        low: *low,
                        high: *high,
                        split: *split,
                    }),
                    _ => Err(Error::Parse(
                        "two-level prior takes low,high[,split]".into(),
                    )),
                }
            }
            "values" => Ok(PriorSpec::Values(parse_list(rest)?)),
            "file" => Ok(PriorSpec::Values(read_real_vector(
                &base.join(rest.trim()),
            )?)),
            other => Err(Error::Parse(format!("unknown prior form '{other}'"))),
        }
    }

    pub fn build(&self, n: usize) -> Result<PriorVector<f64>> {
        match self {
            PriorSpec::Uniform(p) => PriorVector::uniform(n, *p),
            PriorSpec::TwoLevel { low, high, split } => {
                PriorVector::two_level(n, *low, *high, *split)
            }
            PriorSpec::Values(v) => {
                if v.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        actual: v.len(),
                        context: "prior values vs n",
                    });
                }
                PriorVector::new(v.clone())
            }
        }
    }

    fn render(&self) -> String {
        match self {
            PriorSpec::Uniform(p) => format!("uniform:{p}"),
            PriorSpec::TwoLevel { low, high, split } => format!("two-level:{low},{high},{split}"),
            PriorSpec::Values(v) => format!("values:{}", join(v)),
        }
    }
}

/// Where a detector's weights come from.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSource {
    Explicit(Vec<f64>),
    Model(WeightModel<f64>),
    Uniform(f64),
}

impl WeightSource {
    fn parse(value: &str, base: &Path) -> Result<Self> {
        let (tag, rest) = split_tag(value)?;
        match tag {
            "linear" | "exponential" => {
                let kind: WeightModelKind = tag.parse()?;
                let v = parse_list(rest)?;
                let [l0, al] = v.as_slice() else {
                    return Err(Error::Parse(format!("{tag} weights take lambda0,alpha")));
                };
                Ok(WeightSource::Model(WeightModel {
                    kind,
                    lambda0: *l0,
                    alpha: *al,
                }))
            }
            "uniform" => Ok(WeightSource::Uniform(parse_f64(rest, "weights")?)),
            "values" => Ok(WeightSource::Explicit(parse_list(rest)?)),
            "file" => Ok(WeightSource::Explicit(read_real_vector(
                &base.join(rest.trim()),
            )?)),
            other => Err(Error::Parse(format!("unknown weight form '{other}'"))),
        }
    }

    pub fn build(&self, prior: &PriorVector<f64>) -> Result<WeightVector<f64>> {
        match self {
            WeightSource::Explicit(v) => {
                if v.len() != prior.len() {
                    return Err(Error::DimensionMismatch {
                        expected: prior.len(),
                        actual: v.len(),
                        context: "explicit weights vs n",
                    });
                }
                WeightVector::new(v.clone())
            }
            WeightSource::Model(m) => m.weights(prior),
            WeightSource::Uniform(l) => WeightVector::uniform(prior.len(), *l),
        }
    }

    fn render(&self) -> String {
        match self {
            WeightSource::Explicit(v) => format!("values:{}", join(v)),
            WeightSource::Model(m) => {
                let tag = match m.kind {
                    WeightModelKind::Linear => "linear",
                    WeightModelKind::Exponential => "exponential",
                };
                format!("{tag}:{},{}", m.lambda0, m.alpha)
            }
            WeightSource::Uniform(l) => format!("uniform:{l}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorKind {
    Dwld,
    Nwld,
    Dld,
}

impl DetectorKind {
    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Dwld => "dwld",
            DetectorKind::Nwld => "nwld",
            DetectorKind::Dld => "dld",
        }
    }

    pub fn is_debiased(self) -> bool {
        !matches!(self, DetectorKind::Nwld)
    }
}

/// NWLD threshold choice.
#[derive(Debug, Clone, PartialEq)]
pub enum NwldThreshold {
    Fixed(f64),
    /// Bisected on a calibration ensemble to hit this pooled false-alarm rate.
    MatchRate(f64),
    /// Bisected to match the named debiased detector's empirical false-alarm
    /// rate on the calibration ensemble. With `per_class`, entries are grouped
    /// by their (prior, weight) values and each group gets its own threshold
    /// matched to the target's rate on that group; otherwise one threshold
    /// matches the pooled rate.
    MatchDetector {
        target: String,
        per_class: bool,
    },
}

impl NwldThreshold {
    fn parse(value: &str) -> Result<Self> {
        let v = value.trim();
        if let Some(rest) = v.strip_prefix("rate:") {
            return Ok(NwldThreshold::MatchRate(parse_f64(rest, "kappa rate")?));
        }
        if let Some(rest) = v.strip_prefix("match-class:") {
            return Ok(NwldThreshold::MatchDetector {
                target: rest.trim().to_string(),
                per_class: true,
            });
        }
        if let Some(rest) = v.strip_prefix("match:") {
            return Ok(NwldThreshold::MatchDetector {
                target: rest.trim().to_string(),
                per_class: false,
            });
        }
        if v.eq_ignore_ascii_case("inf") {
            return Ok(NwldThreshold::Fixed(f64::INFINITY));
        }
        Ok(NwldThreshold::Fixed(parse_f64(v, "kappa")?))
    }

    fn render(&self) -> String {
        match self {
            NwldThreshold::Fixed(k) if k.is_infinite() => "inf".into(),
            NwldThreshold::Fixed(k) => format!("{k}"),
            NwldThreshold::MatchRate(r) => format!("rate:{r}"),
            NwldThreshold::MatchDetector {
                target,
                per_class: false,
            } => format!("match:{target}"),
            NwldThreshold::MatchDetector {
                target,
                per_class: true,
            } => format!("match-class:{target}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSpec {
    pub name: String,
    pub kind: DetectorKind,
    pub weights: WeightSource,
    /// Target false-alarm rate (debiased detectors).
    pub pfa: Option<f64>,
    /// NWLD threshold.
    pub kappa: Option<NwldThreshold>,
}

/// Settings for the `optimize-weights` subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeSection {
    pub model: WeightModelKind,
    pub snr_db: f64,
    pub settings: OptimizerSettings<f64>,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        Self {
            model: WeightModelKind::Linear,
            snr_db: 15.0,
            settings: OptimizerSettings::default(),
        }
    }
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m: usize,
    pub sigma2: f64,
    pub matrix: MatrixKind,
    pub prior: PriorSpec,
    pub master_seed: u64,
    pub snr_db: Vec<f64>,
    pub n_trials: usize,
    pub calibration_trials: usize,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    pub threads: Threads,
    pub solver: SolverOptions<f64>,
    pub detectors: Vec<DetectorSpec>,
    pub optimize: OptimizeSection,
}

pub const DEFAULT_TRIALS: usize = 2000;
pub const DEFAULT_CALIBRATION_TRIALS: usize = 500;

fn default_snr_sweep() -> Vec<f64> {
    (0..=10).map(|k| 3.0 * k as f64).collect()
}

fn split_tag(value: &str) -> Result<(&str, &str)> {
    value
        .split_once(':')
        .map(|(t, r)| (t.trim(), r))
        .ok_or_else(|| Error::Parse(format!("expected 'form:values', got '{value}'")))
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("{what}: '{}' is not a number", s.trim())))?;
    if v.is_nan() {
        return Err(Error::Parse(format!("{what}: NaN is not allowed")));
    }
    Ok(v)
}

fn parse_usize(s: &str, what: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| {
        Error::Parse(format!(
            "{what}: '{}' is not a non-negative integer",
            s.trim()
        ))
    })
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| parse_f64(t, "list entry"))
        .collect()
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

type Sections = Vec<(String, BTreeMap<String, String>)>;

fn parse_sections(text: &str) -> Result<Sections> {
    let mut sections: Sections = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(h) = line.strip_prefix('[') {
            let name = h
                .strip_suffix(']')
                .ok_or_else(|| {
                    Error::Parse(format!("line {}: unterminated section header", lineno + 1))
                })?
                .trim()
                .to_string();
            if sections.iter().any(|(n, _)| *n == name) {
                return Err(Error::Parse(format!(
                    "line {}: duplicate section [{name}]",
                    lineno + 1
                )));
            }
            sections.push((name, BTreeMap::new()));
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", lineno + 1)))?;
        let Some((_, map)) = sections.last_mut() else {
            return Err(Error::Parse(format!(
                "line {}: key outside any section",
                lineno + 1
            )));
        };
        let key = k.trim().to_ascii_lowercase();
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Parse(format!(
                "line {}: duplicate key '{key}'",
                lineno + 1
            )));
        }
    }
    Ok(sections)
}

struct Keys<'a> {
    section: &'a str,
    map: BTreeMap<String, String>,
}

impl Keys<'_> {
    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn finish(self) -> Result<()> {
        match self.map.keys().next() {
            Some(k) => Err(Error::Parse(format!(
                "unknown key '{k}' in [{}]",
                self.section
            ))),
            None => Ok(()),
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses config text; relative `file:` paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let sections = parse_sections(text)?;
        let mut scene = None;
        let mut run = None;
        let mut solver = None;
        let mut optimize = None;
        let mut detector_sections = Vec::new();
        for (name, map) in sections {
            if let Some(det) = name
                .strip_prefix("detector.")
                .or_else(|| name.strip_prefix("detector "))
            {
                detector_sections.push((det.trim().to_string(), map));
                continue;
            }
            match name.as_str() {
                "scene" => scene = Some(map),
                "run" => run = Some(map),
                "solver" => solver = Some(map),
                "optimize" => optimize = Some(map),
                other => return Err(Error::Parse(format!("unknown section [{other}]"))),
            }
        }

        let mut s = Keys {
            section: "scene",
            map: scene.ok_or_else(|| Error::Parse("missing [scene] section".into()))?,
        };
        let n = parse_usize(
            &s.take("n")
                .ok_or_else(|| Error::Parse("scene.n is required".into()))?,
            "n",
        )?;
        let m = match (s.take("m"), s.take("gamma")) {
            (Some(m), None) => parse_usize(&m, "m")?,
            (None, Some(g)) => {
                let g = parse_f64(&g, "gamma")?;
                (g * n as f64).round() as usize
            }
            (None, None) => return Err(Error::Parse("scene needs m or gamma".into())),
            (Some(_), Some(_)) => {
                return Err(Error::Parse("give either m or gamma, not both".into()))
            }
        };
        let sigma2 = parse_f64(&s.take("sigma2").unwrap_or_else(|| "0.01".into()), "sigma2")?;
        let matrix: MatrixKind = s
            .take("matrix")
            .unwrap_or_else(|| "partial-fourier".into())
            .parse()?;
        let prior = match s.take("prior") {
            Some(p) => PriorSpec::parse(&p, base)?,
            None => return Err(Error::Parse("scene.prior is required".into())),
        };
        let master_seed = match s.take("seed") {
            Some(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("seed: '{v}' is not a u64")))?,
            None => 0,
        };
        s.finish()?;

        let mut r = Keys {
            section: "run",
            map: run.unwrap_or_default(),
        };
        let snr_db = match r.take("snr_db") {
            Some(v) => parse_list(&v)?,
            None => default_snr_sweep(),
        };
        let n_trials = match r.take("trials") {
            Some(v) => parse_usize(&v, "trials")?,
            None => DEFAULT_TRIALS,
        };
        let calibration_trials = match r.take("calibration_trials") {
            Some(v) => parse_usize(&v, "calibration_trials")?,
            None => DEFAULT_CALIBRATION_TRIALS,
        };
        let output = r.take("output").map(|p| base.join(p.trim()));
        let format = match r.take("format") {
            Some(v) => v.parse()?,
            None => OutputFormat::Csv,
        };
        let threads = match r.take("threads") {
            Some(v) => v.parse()?,
            None => Threads::Auto,
        };
        r.finish()?;

        let mut sv = Keys {
            section: "solver",
            map: solver.unwrap_or_default(),
        };
        let mut solver = SolverOptions::default();
        if let Some(v) = sv.take("kkt_tol") {
            solver.kkt_tol = parse_f64(&v, "kkt_tol")?;
        }
        if let Some(v) = sv.take("rel_tol") {
            solver.rel_tol = parse_f64(&v, "rel_tol")?;
        }
        if let Some(v) = sv.take("max_iters") {
            solver.max_iters = parse_usize(&v, "max_iters")?;
        }
        sv.finish()?;

        let mut detectors = Vec::new();
        for (name, map) in detector_sections {
            let mut d = Keys {
                section: "detector",
                map,
            };
            let kind = match d.take("kind").as_deref().map(str::trim) {
                Some("dwld") => DetectorKind::Dwld,
                Some("nwld") => DetectorKind::Nwld,
                Some("dld") => DetectorKind::Dld,
                Some(other) => {
                    return Err(Error::Parse(format!(
                        "detector {name}: unknown kind '{other}'"
                    )))
                }
                None => return Err(Error::Parse(format!("detector {name}: kind is required"))),
            };
            let weights = match (kind, d.take("weights"), d.take("lambda")) {
                (DetectorKind::Dld, None, Some(l)) => {
                    WeightSource::Uniform(parse_f64(&l, "lambda")?)
                }
                (DetectorKind::Dld, _, _) => {
                    return Err(Error::Parse(format!(
                        "detector {name}: dld takes a scalar 'lambda' only"
                    )))
                }
                (_, Some(w), None) => WeightSource::parse(&w, base)?,
                _ => {
                    return Err(Error::Parse(format!(
                        "detector {name}: 'weights' is required"
                    )))
                }
            };
            let pfa = d.take("pfa").map(|v| parse_f64(&v, "pfa")).transpose()?;
            let kappa = d
                .take("kappa")
                .map(|v| NwldThreshold::parse(&v))
                .transpose()?;
            match kind {
                DetectorKind::Nwld if pfa.is_some() => {
                    return Err(Error::Parse(format!(
                        "detector {name}: nwld has no analytic pfa; use kappa"
                    )))
                }
                DetectorKind::Nwld if kappa.is_none() => {
                    return Err(Error::Parse(format!("detector {name}: nwld needs kappa")))
                }
                DetectorKind::Dwld | DetectorKind::Dld if kappa.is_some() => {
                    return Err(Error::Parse(format!(
                        "detector {name}: kappa only applies to nwld"
                    )))
                }
                DetectorKind::Dwld | DetectorKind::Dld if pfa.is_none() => {
                    return Err(Error::Parse(format!("detector {name}: pfa is required")))
                }
                _ => {}
            }
            d.finish()?;
            detectors.push(DetectorSpec {
                name,
                kind,
                weights,
                pfa,
                kappa,
            });
        }

        let mut o = Keys {
            section: "optimize",
            map: optimize.unwrap_or_default(),
        };
        let mut optimize = OptimizeSection::default();
        if let Some(v) = o.take("model") {
            optimize.model = v.parse()?;
        }
        if let Some(v) = o.take("snr_db") {
            optimize.snr_db = parse_f64(&v, "snr_db")?;
        }
        let st = &mut optimize.settings;
        if let Some(v) = o.take("mc") {
            st.n_mc = parse_usize(&v, "mc")?;
        }
        if let Some(v) = o.take("max_evaluations") {
            st.max_evaluations = parse_usize(&v, "max_evaluations")?;
        }
        if let Some(v) = o.take("simplex_iters") {
            st.max_simplex_iters = parse_usize(&v, "simplex_iters")?;
        }
        if let Some(v) = o.take("lambda0_range") {
            let [lo, hi] = parse_list(&v)?[..] else {
                return Err(Error::Parse("lambda0_range takes lo,hi".into()));
            };
            st.lambda0_range = (lo, hi);
        }
        if let Some(v) = o.take("alpha_range") {
            let [lo, hi] = parse_list(&v)?[..] else {
                return Err(Error::Parse("alpha_range takes lo,hi".into()));
            };
            st.alpha_range = (lo, hi);
        }
        if let Some(v) = o.take("lambda0_points") {
            st.lambda0_points = parse_usize(&v, "lambda0_points")?;
        }
        if let Some(v) = o.take("alpha_points") {
            st.alpha_points = parse_usize(&v, "alpha_points")?;
        }
        o.finish()?;

        let cfg = ExperimentConfig {
            n,
            m,
            sigma2,
            matrix,
            prior,
            master_seed,
            snr_db,
            n_trials,
            calibration_trials,
            output,
            format,
            threads,
            solver,
            detectors,
            optimize,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scene(1.0)?.validate()?;
        self.solver.validate()?;
        if self.n_trials == 0 {
            return Err(Error::Parse("trials must be >= 1".into()));
        }
        if self.snr_db.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse("snr values must be finite".into()));
        }
        let mut names: Vec<&str> = self.detectors.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Parse("detector names must be unique".into()));
        }
        let prior = self.prior.build(self.n)?;
        for d in &self.detectors {
            d.weights.build(&prior)?;
            if let Some(p) = d.pfa {
                if !(p > 0.0 && p <= 1.0) {
                    return Err(Error::Parse(format!(
                        "detector {}: pfa must be in (0, 1]",
                        d.name
                    )));
                }
            }
            match &d.kappa {
                Some(NwldThreshold::Fixed(k)) if !(*k >= 0.0) => {
                    return Err(Error::Parse(format!(
                        "detector {}: kappa must be >= 0",
                        d.name
                    )))
                }
                Some(NwldThreshold::MatchRate(r)) if !(0.0..=1.0).contains(r) => {
                    return Err(Error::Parse(format!(
                        "detector {}: rate must be in [0, 1]",
                        d.name
                    )))
                }
                Some(NwldThreshold::MatchDetector { target, .. }) => {
                    let ok = self
                        .detectors
                        .iter()
                        .any(|o| o.name == *target && o.kind.is_debiased());
                    if !ok {
                        return Err(Error::Parse(format!(
                            "detector {}: match target '{target}' is not a debiased detector",
                            d.name
                        )));
                    }
                    if self.calibration_trials == 0 {
                        return Err(Error::Parse("calibration_trials must be >= 1".into()));
                    }
                }
                Some(NwldThreshold::MatchRate(_)) if self.calibration_trials == 0 => {
                    return Err(Error::Parse("calibration_trials must be >= 1".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Scene configuration at amplitude variance `sigma_x2`.
    pub fn scene(&self, sigma_x2: f64) -> Result<SceneConfig<f64>> {
        Ok(SceneConfig {
            n: self.n,
            m: self.m,
            sigma_x2,
            noise: NoiseSpec::new(self.sigma2)?,
            prior: self.prior.build(self.n)?,
            matrix_kind: self.matrix,
            master_seed: self.master_seed,
        })
    }

    /// Renders the resolved configuration back into the config format.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[scene]");
        let _ = writeln!(out, "n = {}", self.n);
        let _ = writeln!(out, "m = {}", self.m);
        let _ = writeln!(out, "sigma2 = {}", self.sigma2);
        let _ = writeln!(out, "matrix = {}", self.matrix.name());
        let _ = writeln!(out, "prior = {}", self.prior.render());
        let _ = writeln!(out, "seed = {}", self.master_seed);
        let _ = writeln!(out, "\n[run]");
        let _ = writeln!(out, "snr_db = {}", join(&self.snr_db));
        let _ = writeln!(out, "trials = {}", self.n_trials);
        let _ = writeln!(out, "calibration_trials = {}", self.calibration_trials);
        if let Some(p) = &self.output {
            let _ = writeln!(out, "output = {}", p.display());
        }
        let _ = writeln!(out, "format = {}", self.format.name());
        let _ = writeln!(out, "threads = {}", self.threads);
        let _ = writeln!(out, "\n[solver]");
        let _ = writeln!(out, "kkt_tol = {}", self.solver.kkt_tol);
        let _ = writeln!(out, "rel_tol = {}", self.solver.rel_tol);
        let _ = writeln!(out, "max_iters = {}", self.solver.max_iters);
        for d in &self.detectors {
            let _ = writeln!(out, "\n[detector.{}]", d.name);
            let _ = writeln!(out, "kind = {}", d.kind.name());
            match (&d.kind, &d.weights) {
                (DetectorKind::Dld, WeightSource::Uniform(l)) => {
                    let _ = writeln!(out, "lambda = {l}");
                }
                (_, w) => {
                    let _ = writeln!(out, "weights = {}", w.render());
                }
            }
            if let Some(p) = d.pfa {
                let _ = writeln!(out, "pfa = {p}");
            }
            if let Some(k) = &d.kappa {
                let _ = writeln!(out, "kappa = {}", k.render());
            }
        }
        let o = &self.optimize;
        let _ = writeln!(out, "\n[optimize]");
        let _ = writeln!(
            out,
            "model = {}",
            match o.model {
                WeightModelKind::Linear => "linear",
                WeightModelKind::Exponential => "exponential",
            }
        );
        let _ = writeln!(out, "snr_db = {}", o.snr_db);
        let _ = writeln!(out, "mc = {}", o.settings.n_mc);
        let _ = writeln!(out, "max_evaluations = {}", o.settings.max_evaluations);
        let _ = writeln!(out, "simplex_iters = {}", o.settings.max_simplex_iters);
        let _ = writeln!(
            out,
            "lambda0_range = {},{}",
            o.settings.lambda0_range.0, o.settings.lambda0_range.1
        );
        let _ = writeln!(out, "lambda0_points = {}", o.settings.lambda0_points);
        let _ = writeln!(
            out,
            "alpha_range = {},{}",
            o.settings.alpha_range.0, o.settings.alpha_range.1
        );
        let _ = writeln!(out, "alpha_points = {}", o.settings.alpha_points);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "
# comparison at the first prior setting
[scene]
n = 512
gamma = 0.5
sigma2 = 0.01
matrix = partial-fourier
prior = two-level:0.01,0.8,0.75
seed = 7

[run]
snr_db = 5, 10, 15
trials = 100

[detector.dwld-1]
kind = dwld
weights = linear:0.1,0.1
pfa = 0.01

[detector.nwld-1]
kind = nwld
weights = linear:0.1,0.1
kappa = 0

[detector.nwld-match]
kind = nwld
weights = linear:0.1,0.1
kappa = match:dwld-1

[detector.nwld-class]
kind = nwld
weights = linear:0.1,0.1
kappa = match-class:dwld-1

[detector.dld]
kind = dld
lambda = 0.2
pfa = 0.01
";

    #[test]
    fn parses_sample() {
        let c = ExperimentConfig::parse(SAMPLE, Path::new(".")).unwrap();
        assert_eq!((c.n, c.m), (512, 256));
        assert_eq!(c.snr_db, vec![5.0, 10.0, 15.0]);
        assert_eq!(c.detectors.len(), 5);
        assert_eq!(c.detectors[1].kappa, Some(NwldThreshold::Fixed(0.0)));
        assert_eq!(
            c.detectors[3].kappa,
            Some(NwldThreshold::MatchDetector {
                target: "dwld-1".into(),
                per_class: true
            })
        );
        assert_eq!(c.detectors[4].weights, WeightSource::Uniform(0.2));
        assert_eq!(c.calibration_trials, DEFAULT_CALIBRATION_TRIALS);
        let prior = c.prior.build(512).unwrap();
        assert_eq!(prior.as_slice()[383], 0.01);
        assert_eq!(prior.as_slice()[384], 0.8);
    }

    #[test]
    fn render_round_trips() {
        let c = ExperimentConfig::parse(SAMPLE, Path::new(".")).unwrap();
        let again = ExperimentConfig::parse(&c.render(), Path::new(".")).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn rejects_bad_input() {
        let bad = [
            "[scene]\nn = 8\nm = 9\nprior = uniform:0.1\n",
            "[scene]\nn = 8\nm = 4\nprior = uniform:1.5\n",
            "[scene]\nn = 8\nm = 4\nprior = uniform:0.1\nbogus = 1\n",
            "n = 8\n",
            "[scene]\nn = 8\nm = 4\nprior = uniform:0.1\n[detector.a]\nkind = nwld\nweights = uniform:0.1\npfa = 0.01\n",
            "[scene]\nn = 8\nm = 4\nprior = uniform:0.1\n[detector.a]\nkind = dwld\nweights = uniform:0.1\n",
            "[scene]\nn = 8\nm = 4\nprior = uniform:0.1\n[detector.a]\nkind = nwld\nweights = uniform:0.1\nkappa = match:zzz\n",
            "[scene]\nn = 8\nm = 4\nprior = uniform:0.1\n[run]\ntrials = 0\n",
            "[scene]\nn = 8\nm = 4\nprior = values:0.1,0.2\n",
        ];
        for text in bad {
            assert!(
                ExperimentConfig::parse(text, Path::new(".")).is_err(),
                "{text}"
            );
        }
    }
}
