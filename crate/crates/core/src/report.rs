//! Batch experiments and consolidated reports.
//!
//! Every suite maps seeds to work items on the rayon pool and collects them
//! back in seed order, so a report depends only on its configuration.
//! Wall-clock timings live in their own section and are the only fields
//! that differ between reruns.
//!
//! Default tolerances (all overridable through [`Tolerances`]):
//!
//! | field            | default | meaning                                              |
//! |------------------|---------|------------------------------------------------------|
//! | `p`              | 1e-10   | `max|f| / ‖p‖` on trains                             |
//! | `q`              | 1e-9    | `max|g| / ‖p‖²` on trains                            |
//! | `h`              | 1e-8    | `|h_n| / ‖p‖ⁿ` on trains and even-`n` generic trains |
//! | `nontrivial`     | 1e-3    | families must exceed this on random tensors          |
//! | `nontrivial_rate`| 0.99    | fraction of random tensors where each family does    |
//! | `certify`        | 1e-10   | odeco certificate acceptance                         |
//! | `planted`        | 1e-3    | certificate residual required on planted pairs       |
//! | `odd_h`          | 1e-6    | `|h_3|` threshold counted in the parity study        |
//! | `odd_rate`       | 0.95    | fraction of odd-`n` samples that must exceed `odd_h` |
//! | `planted_min_overlap` | 0.5 | planted pairs have `⟨u₁,u₂⟩ ∈ [0.5, 0.95]`          |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equations::{eval_h_report, eval_p_residual, eval_q_residual, Family, ResidualReport};
use crate::error::{Error, Result};
use crate::geometry::{param_jacobian_rank, variety_jacobian_corank, JacobianReport};
use crate::ideal::{ideal_membership, planted_member, MembershipVerdict, Verdict, DEFAULT_PRIMES};
use crate::models::{
    build_generic_train, build_odeco, build_train, certify_odeco, GenericRankModel, OdecoModel,
    Symmetry, TrainModel,
};
use crate::poly::{gen_h, gen_p, gen_q, SparsePolynomial};
use crate::tensor::{AnyTensor, DenseTensor};

pub const TOOL_NAME: &str = "odeco-tt";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

const FULL_VANISH_N: [usize; 3] = [2, 3, 4];
const FULL_NONTRIVIAL_N: [usize; 2] = [2, 3];
const FULL_CERTIFY_N: [usize; 5] = [2, 3, 4, 5, 6];
const FULL_IDEAL_N: [usize; 2] = [2, 3];
const FULL_PARAM_N: [usize; 3] = [2, 3, 4];
const FULL_VARIETY_N: [usize; 2] = [2, 3];
const FULL_PARITY_N: [usize; 3] = [2, 3, 4];

// Random streams per purpose, so that e.g. the random tensor for seed 7
// shares no draws with the train for seed 7.
const STREAM_RANDOM_TENSOR: u64 = 1;
const STREAM_CERTIFY: u64 = 2;
const STREAM_PLANTED: u64 = 3;
const STREAM_PARITY: u64 = 4;
const STREAM_IDEAL: u64 = 5;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub p: f64,
    pub q: f64,
    pub h: f64,
    pub nontrivial: f64,
    pub nontrivial_rate: f64,
    pub certify: f64,
    pub planted: f64,
    pub odd_h: f64,
    pub odd_rate: f64,
    pub planted_min_overlap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            p: 1e-10,
            q: 1e-9,
            h: 1e-8,
            nontrivial: 1e-3,
            nontrivial_rate: 0.99,
            certify: 1e-10,
            planted: 1e-3,
            odd_h: 1e-6,
            odd_rate: 0.95,
            planted_min_overlap: 0.5,
        }
    }
}

impl Tolerances {
    fn validate(&self) -> Result<()> {
        let all = [
            ("p", self.p),
            ("q", self.q),
            ("h", self.h),
            ("nontrivial", self.nontrivial),
            ("nontrivial_rate", self.nontrivial_rate),
            ("certify", self.certify),
            ("planted", self.planted),
            ("odd_h", self.odd_h),
            ("odd_rate", self.odd_rate),
            ("planted_min_overlap", self.planted_min_overlap),
        ];
        for (name, v) in all {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Precondition(format!("tolerance {name} must be positive, got {v}")));
            }
        }
        if self.odd_rate > 1.0 || self.nontrivial_rate > 1.0 || self.planted_min_overlap >= 0.95 {
            return Err(Error::Precondition(
                "rates must be at most 1 and planted_min_overlap below 0.95".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TensorSource {
    /// `build_train` of a sampled model.
    #[default]
    Train,
    /// Independent standard normal entries.
    Random,
    /// A train whose left weights are all zero (the zero tensor).
    Degenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub n: Vec<usize>,
    pub seeds: Vec<u64>,
    pub tolerances: Tolerances,
    pub primes: Vec<u32>,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

impl RunConfig {
    pub fn new(command: &str, n: Vec<usize>, seeds: Vec<u64>) -> Self {
        Self {
            command: command.to_string(),
            n,
            seeds,
            tolerances: Tolerances::default(),
            primes: DEFAULT_PRIMES.to_vec(),
            out: None,
            format: OutputFormat::Json,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(&n) = self.n.iter().find(|&&n| n < 2) {
            return Err(Error::NOutOfRange { n, min: 2, max: usize::MAX });
        }
        if self.seeds.is_empty() {
            return Err(Error::Precondition("at least one seed is required".into()));
        }
        if self.primes.is_empty() {
            return Err(Error::Precondition("at least one prime is required".into()));
        }
        self.tolerances.validate()
    }
}

/// Seeds from `K` (meaning `1..=K`), `a..b` (inclusive), or a comma list
/// mixing both forms, e.g. `3,7,10..12`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || Error::Format(format!("bad seed list {text:?}"));
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() == 1 && !text.contains("..") {
        let k: u64 = text.trim().parse().map_err(|_| bad())?;
        return if k == 0 { Err(bad()) } else { Ok((1..=k).collect()) };
    }
    let mut seeds = Vec::new();
    for part in parts {
        match part.split_once("..") {
            Some((a, b)) => {
                let a: u64 = a.parse().map_err(|_| bad())?;
                let b: u64 = b.trim_start_matches('=').parse().map_err(|_| bad())?;
                if a > b {
                    return Err(bad());
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().map_err(|_| bad())?),
        }
    }
    Ok(seeds)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Vanish,
    Nontrivial,
    Certify,
    Ideal,
    Dimension,
    Parity,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Vanish,
        Suite::Nontrivial,
        Suite::Certify,
        Suite::Ideal,
        Suite::Dimension,
        Suite::Parity,
    ];

    /// Bit set in the process exit code when the suite has a failure.
    pub fn exit_bit(self) -> i32 {
        match self {
            Suite::Vanish => 1,
            Suite::Certify => 2,
            Suite::Ideal => 4,
            Suite::Dimension => 8,
            Suite::Parity => 16,
            Suite::Nontrivial => 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VanishItem {
    pub n: usize,
    pub seed: u64,
    pub source: TensorSource,
    pub residuals: Vec<ResidualReport>,
    /// All three families are within tolerance.
    pub vanishes: bool,
    /// Train and degenerate sources pass when they vanish; random tensors
    /// pass when they do not.
    pub pass: bool,
}

/// How often each family exceeds the non-triviality threshold on random
/// tensors of one size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NontrivialItem {
    pub n: usize,
    pub seeds: usize,
    pub threshold: f64,
    pub required_rate: f64,
    /// Counts for `P`, `Q`, `h`, in that order.
    pub above: [usize; 3],
    pub min_normalized: [f64; 3],
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertifySample {
    Odeco,
    Planted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyItem {
    pub n: usize,
    pub seed: u64,
    pub sample: CertifySample,
    /// Inner product of the planted directions.
    pub overlap: Option<f64>,
    pub residual: f64,
    pub certified: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipItem {
    pub n: usize,
    pub generators: Vec<Family>,
    pub expected: Verdict,
    pub result: MembershipVerdict,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionItem {
    pub report: JacobianReport,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParityItem {
    pub n: usize,
    pub seeds: usize,
    /// `|h_n| / ‖p‖ⁿ` per seed, in seed order.
    pub h_normalized: Vec<f64>,
    pub q_normalized_min: f64,
    pub h_min: f64,
    pub h_median: f64,
    pub h_max: f64,
    pub count_within_h_tol: usize,
    pub count_above_odd_threshold: usize,
    /// Even `n`: every sample vanishes. Odd `n`: at least `odd_rate` of the
    /// samples exceed the odd threshold.
    pub claim: String,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ReportItem {
    Vanish(VanishItem),
    Nontrivial(NontrivialItem),
    Certify(CertifyItem),
    Membership(MembershipItem),
    Dimension(DimensionItem),
    Parity(ParityItem),
}

impl ReportItem {
    pub fn pass(&self) -> bool {
        match self {
            ReportItem::Vanish(i) => i.pass,
            ReportItem::Nontrivial(i) => i.pass,
            ReportItem::Certify(i) => i.pass,
            ReportItem::Membership(i) => i.pass,
            ReportItem::Dimension(i) => i.pass,
            ReportItem::Parity(i) => i.pass,
        }
    }

    pub fn suite(&self) -> Suite {
        match self {
            ReportItem::Vanish(i) if i.source == TensorSource::Random => Suite::Nontrivial,
            ReportItem::Vanish(_) => Suite::Vanish,
            ReportItem::Nontrivial(_) => Suite::Nontrivial,
            ReportItem::Certify(_) => Suite::Certify,
            ReportItem::Membership(_) => Suite::Ideal,
            ReportItem::Dimension(_) => Suite::Dimension,
            ReportItem::Parity(_) => Suite::Parity,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteCounts {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub suites: BTreeMap<Suite, SuiteCounts>,
}

impl Summary {
    pub fn of(items: &[ReportItem]) -> Self {
        let mut s = Summary::default();
        for item in items {
            let c = s.suites.entry(item.suite()).or_default();
            c.total += 1;
            s.total += 1;
            if item.pass() {
                c.passed += 1;
                s.passed += 1;
            } else {
                c.failed += 1;
                s.failed += 1;
            }
        }
        s
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub suites: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub items: Vec<ReportItem>,
    pub summary: Summary,
    pub notes: Vec<String>,
    /// A sub-step failed and later suites were skipped.
    pub partial: bool,
    pub error: Option<String>,
    pub timings: Timings,
}

/// Reported with every document that contains algebraic suites.
pub const LIMITATION_NOTE: &str = "Primeness and radicality of the ideal are not checked. Graded-slice non-membership mod several primes and Jacobian coranks at smooth points stand in for them; a member verdict mod p is evidence, not a proof over the rationals.";

struct Builder {
    config: RunConfig,
    items: Vec<ReportItem>,
    notes: Vec<String>,
    timings: Timings,
    start: Instant,
}

impl Builder {
    fn new(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config: config.clone(),
            items: Vec::new(),
            notes: Vec::new(),
            timings: Timings::default(),
            start: Instant::now(),
        })
    }

    fn run(&mut self, label: &str, f: impl FnOnce(&RunConfig) -> Result<Vec<ReportItem>>) -> Result<()> {
        let t = Instant::now();
        let items = f(&self.config)?;
        self.items.extend(items);
        *self.timings.suites.entry(label.to_string()).or_default() += t.elapsed().as_secs_f64();
        Ok(())
    }

    fn finish(mut self, error: Option<Error>) -> ReportDocument {
        self.timings.total_seconds = self.start.elapsed().as_secs_f64();
        ReportDocument {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            summary: Summary::of(&self.items),
            config: self.config,
            items: self.items,
            notes: self.notes,
            partial: error.is_some(),
            error: error.map(|e| e.to_string()),
            timings: self.timings,
        }
    }
}

impl ReportDocument {
    pub fn all_pass(&self) -> bool {
        !self.partial && self.summary.failed == 0
    }

    /// 0 when everything passed; otherwise the OR of [`Suite::exit_bit`]
    /// over failing suites, or 64 for a partial report.
    pub fn exit_code(&self) -> i32 {
        let mut code = if self.partial { 64 } else { 0 };
        for (suite, counts) in &self.summary.suites {
            if counts.failed > 0 {
                code |= suite.exit_bit();
            }
        }
        code
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// The document without its timing section, for rerun comparisons.
    pub fn without_timings(&self) -> Self {
        Self {
            timings: Timings::default(),
            ..self.clone()
        }
    }

    /// One row per item: `suite,kind,n,seed,metric,value,pass`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["suite", "kind", "n", "seed", "metric", "value", "pass"])
            .map_err(csv_err)?;
        for item in &self.items {
            let suite = format!("{:?}", item.suite()).to_lowercase();
            let opt = |s: Option<u64>| s.map(|v| v.to_string()).unwrap_or_default();
            let (kind, n, seed, metric, value) = match item {
                ReportItem::Vanish(i) => {
                    let worst = i.residuals.iter().map(|r| r.normalized).fold(0.0, f64::max);
                    let best = i.residuals.iter().map(|r| r.normalized).fold(f64::INFINITY, f64::min);
                    let (metric, v) = if i.source == TensorSource::Random {
                        ("min_normalized_residual", best)
                    } else {
                        ("max_normalized_residual", worst)
                    };
                    ("vanish", i.n, opt(Some(i.seed)), metric.to_string(), v.to_string())
                }
                ReportItem::Nontrivial(i) => (
                    "nontrivial",
                    i.n,
                    String::new(),
                    "min_count_above".to_string(),
                    i.above.iter().min().copied().unwrap_or(0).to_string(),
                ),
                ReportItem::Certify(i) => (
                    "certify",
                    i.n,
                    opt(Some(i.seed)),
                    format!("{:?}_residual", i.sample).to_lowercase(),
                    i.residual.to_string(),
                ),
                ReportItem::Membership(i) => (
                    "membership",
                    i.n,
                    String::new(),
                    format!("verdict_{}", i.result.target),
                    serde_json::to_value(i.result.verdict)?
                        .as_str()
                        .unwrap_or_default()
                        .to_string(),
                ),
                ReportItem::Dimension(i) => (
                    "dimension",
                    i.report.n,
                    opt(i.report.seed),
                    format!("{:?}_measured", i.report.mode).to_lowercase(),
                    i.report.measured().to_string(),
                ),
                ReportItem::Parity(i) => (
                    "parity",
                    i.n,
                    String::new(),
                    "h_median".to_string(),
                    i.h_median.to_string(),
                ),
            };
            w.write_record([
                suite,
                kind.to_string(),
                n.to_string(),
                seed,
                metric,
                value,
                item.pass().to_string(),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn render(&self, format: OutputFormat) -> Result<String> {
        match format {
            OutputFormat::Json => self.to_json(),
            OutputFormat::Csv => self.to_csv(),
        }
    }

    pub fn write(&self, path: impl AsRef<Path>, format: OutputFormat) -> Result<()> {
        std::fs::write(path, self.render(format)?)?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

fn random_tensor(n: usize, seed: u64) -> DenseTensor<f64> {
    let mut rng = stream_rng(seed, STREAM_RANDOM_TENSOR);
    DenseTensor::from_fn(vec![n; 4], |_| rng.sample(StandardNormal))
}

fn degenerate_train(n: usize, seed: u64) -> Result<DenseTensor<f64>> {
    let m = TrainModel::sample(n, seed)?;
    let left = OdecoModel::new(vec![0.0; n], m.left.frame().clone())?;
    Ok(build_train(&TrainModel::new(left, m.right)?))
}

/// The three residual reports of `p`.
pub fn residuals(p: &DenseTensor<f64>) -> Result<Vec<ResidualReport>> {
    Ok(vec![eval_p_residual(p)?, eval_q_residual(p)?, eval_h_report(p)?])
}

fn vanishes(reports: &[ResidualReport], tol: &Tolerances) -> bool {
    reports.iter().all(|r| {
        r.normalized
            <= match r.family {
                Family::P => tol.p,
                Family::Q => tol.q,
                Family::H => tol.h,
            }
    })
}

/// Residual reports for a tensor from a file, judged against the vanishing
/// tolerances.
pub fn vanish_check_tensor(t: &AnyTensor, tol: &Tolerances) -> Result<(Vec<ResidualReport>, bool)> {
    let reps = match t {
        AnyTensor::Real(p) => residuals(p)?,
        AnyTensor::Integer(p) => vec![eval_p_residual(p)?, eval_q_residual(p)?, eval_h_report(p)?],
    };
    let ok = vanishes(&reps, tol);
    Ok((reps, ok))
}

fn vanish_items(config: &RunConfig, ns: &[usize], source: TensorSource) -> Result<Vec<ReportItem>> {
    let tol = &config.tolerances;
    let jobs: Vec<(usize, u64)> = ns
        .iter()
        .flat_map(|&n| config.seeds.iter().map(move |&s| (n, s)))
        .collect();
    jobs.par_iter()
        .map(|&(n, seed)| {
            let p = match source {
                TensorSource::Train => build_train(&TrainModel::sample(n, seed)?),
                TensorSource::Random => random_tensor(n, seed),
                TensorSource::Degenerate => degenerate_train(n, seed)?,
            };
            let reps = residuals(&p)?;
            let vanish = vanishes(&reps, tol);
            let pass = match source {
                TensorSource::Random => !vanish,
                _ => vanish,
            };
            Ok(ReportItem::Vanish(VanishItem {
                n,
                seed,
                source,
                residuals: reps,
                vanishes: vanish,
                pass,
            }))
        })
        .collect()
}

fn nontrivial_items(config: &RunConfig, ns: &[usize]) -> Result<Vec<ReportItem>> {
    let tol = &config.tolerances;
    ns.iter()
        .map(|&n| {
            let all: Vec<Vec<ResidualReport>> = config
                .seeds
                .par_iter()
                .map(|&seed| residuals(&random_tensor(n, seed)))
                .collect::<Result<_>>()?;
            let mut above = [0usize; 3];
            let mut min_normalized = [f64::INFINITY; 3];
            for reps in &all {
                for (k, r) in reps.iter().enumerate() {
                    above[k] += (r.normalized > tol.nontrivial) as usize;
                    min_normalized[k] = min_normalized[k].min(r.normalized);
                }
            }
            let needed = tol.nontrivial_rate * all.len() as f64;
            Ok(ReportItem::Nontrivial(NontrivialItem {
                n,
                seeds: all.len(),
                threshold: tol.nontrivial,
                required_rate: tol.nontrivial_rate,
                above,
                min_normalized,
                pass: above.iter().all(|&c| c as f64 >= needed),
            }))
        })
        .collect()
}

/// Residuals of `P`, `Q`, `h` on the configured seeds and sizes.
pub fn cmd_vanish_check(config: &RunConfig, source: TensorSource) -> Result<ReportDocument> {
    let mut b = Builder::new(config)?;
    let ns = config.n.clone();
    let r = b.run("vanish", |c| vanish_items(c, &ns, source));
    Ok(b.finish(r.err()))
}

fn certify_items(config: &RunConfig, ns: &[usize]) -> Result<Vec<ReportItem>> {
    let tol = &config.tolerances;
    let jobs: Vec<(usize, u64, CertifySample)> = ns
        .iter()
        .flat_map(|&n| {
            config.seeds.iter().flat_map(move |&s| {
                [(n, s, CertifySample::Odeco), (n, s, CertifySample::Planted)]
            })
        })
        .collect();
    jobs.par_iter()
        .map(|&(n, seed, sample)| {
            let (t, overlap) = match sample {
                CertifySample::Odeco => {
                    let m = OdecoModel::sample(n, &mut stream_rng(seed, STREAM_CERTIFY))?;
                    (build_odeco(&m), None)
                }
                CertifySample::Planted => {
                    let mut rng = stream_rng(seed, STREAM_PLANTED);
                    let overlap = rng.random_range(tol.planted_min_overlap..0.95);
                    let m = GenericRankModel::planted_pair(n, overlap, &mut rng)?;
                    (m.build(), Some(overlap))
                }
            };
            let cert = certify_odeco(&t, tol.certify, Symmetry::Symmetric)?;
            let pass = match sample {
                CertifySample::Odeco => cert.pass,
                CertifySample::Planted => !cert.pass && cert.residual > tol.planted,
            };
            Ok(ReportItem::Certify(CertifyItem {
                n,
                seed,
                sample,
                overlap,
                residual: cert.residual,
                certified: cert.pass,
                pass,
            }))
        })
        .collect()
}

/// Certificates on odeco samples (expected to pass) and planted
/// non-orthogonal pairs (expected to fail).
pub fn cmd_certify(config: &RunConfig) -> Result<ReportDocument> {
    let mut b = Builder::new(config)?;
    let ns = config.n.clone();
    let r = b.run("certify", |c| certify_items(c, &ns));
    Ok(b.finish(r.err()))
}

/// `|h_n|` of a tensor, with the exact value for integer input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HEvaluation {
    #[serde(flatten)]
    pub report: ResidualReport,
    /// Signed value: exact decimal for integer tensors, 17 significant
    /// digits for real ones.
    pub value: String,
}

pub fn cmd_h_eval(t: &AnyTensor) -> Result<HEvaluation> {
    match t {
        AnyTensor::Real(p) => {
            let v = crate::equations::eval_h_det(p)?;
            Ok(HEvaluation {
                report: eval_h_report(p)?,
                value: format!("{v:.16e}"),
            })
        }
        AnyTensor::Integer(p) => {
            let v = crate::equations::eval_h_det(p)?;
            Ok(HEvaluation {
                report: eval_h_report(p)?,
                value: v.to_string(),
            })
        }
    }
}

/// Writes `model_n{n}_seed{s}.json` and `tensor_n{n}_seed{s}.json` for each
/// configured size and seed into `dir`; returns the written paths in order.
pub fn cmd_sample(config: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    config.validate()?;
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for &n in &config.n {
        for &seed in &config.seeds {
            let model = TrainModel::sample(n, seed)?;
            let model_path = dir.join(format!("model_n{n}_seed{seed}.json"));
            model.write(&model_path)?;
            let tensor_path = dir.join(format!("tensor_n{n}_seed{seed}.json"));
            AnyTensor::Real(build_train(&model)).write(&tensor_path)?;
            written.push(model_path);
            written.push(tensor_path);
        }
    }
    Ok(written)
}

/// Generators selectable for ideal tests.
pub fn generator_polys(families: &[Family], n: usize) -> Result<Vec<SparsePolynomial>> {
    let mut out = Vec::new();
    for f in families {
        match f {
            Family::P => out.extend(gen_p(n)?.generators.into_iter().map(|g| g.poly)),
            Family::Q => out.extend(gen_q(n)?.generators.into_iter().map(|g| g.poly)),
            Family::H => out.push(gen_h(n)?),
        }
    }
    Ok(out)
}

/// Membership of `target` (`h_n`, or a planted member of the generator
/// ideal) in `⟨gens⟩`.
pub fn ideal_test(n: usize, target: IdealTarget, gens: &[Family], primes: &[u32]) -> Result<MembershipItem> {
    let polys = generator_polys(gens, n)?;
    let refs: Vec<&SparsePolynomial> = polys.iter().collect();
    let (name, poly, expected) = match target {
        IdealTarget::H => (format!("h{n}"), gen_h(n)?, Verdict::NonMember),
        IdealTarget::Planted(seed) => {
            let d = n as u32;
            let t = planted_member(&refs, d, 8, &mut stream_rng(seed, STREAM_IDEAL))?;
            (format!("planted{n}_seed{seed}"), t, Verdict::MemberModAllPrimes)
        }
    };
    let result = ideal_membership(&name, &poly, &refs, primes)?;
    let pass = result.verdict == expected && result.ranks_agree;
    Ok(MembershipItem {
        n,
        generators: gens.to_vec(),
        expected,
        result,
        pass,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IdealTarget {
    H,
    /// `Σ c_i m_i g_i` drawn from the given seed.
    Planted(u64),
}

fn ideal_items(config: &RunConfig, ns: &[usize]) -> Result<Vec<ReportItem>> {
    let gens = [Family::P, Family::Q];
    let mut items = Vec::new();
    for &n in ns {
        items.push(ReportItem::Membership(ideal_test(n, IdealTarget::H, &gens, &config.primes)?));
        let seed = config.seeds[0];
        items.push(ReportItem::Membership(ideal_test(
            n,
            IdealTarget::Planted(seed),
            &gens,
            &config.primes,
        )?));
    }
    Ok(items)
}

pub fn cmd_ideal_test(config: &RunConfig, target: IdealTarget, gens: &[Family]) -> Result<ReportDocument> {
    let mut b = Builder::new(config)?;
    let ns = config.n.clone();
    let gens = gens.to_vec();
    let r = b.run("ideal", |c| {
        ns.iter()
            .map(|&n| Ok(ReportItem::Membership(ideal_test(n, target, &gens, &c.primes)?)))
            .collect()
    });
    b.notes.push(LIMITATION_NOTE.to_string());
    Ok(b.finish(r.err()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DimensionMode {
    Param,
    Variety,
}

fn dimension_items(config: &RunConfig, ns: &[usize], mode: DimensionMode) -> Result<Vec<ReportItem>> {
    let jobs: Vec<(usize, u64)> = ns
        .iter()
        .flat_map(|&n| config.seeds.iter().map(move |&s| (n, s)))
        .collect();
    jobs.par_iter()
        .map(|&(n, seed)| {
            let report = match mode {
                DimensionMode::Param => param_jacobian_rank(n, seed)?,
                DimensionMode::Variety => variety_jacobian_corank(n, seed)?,
            };
            let pass = report.pass;
            Ok(ReportItem::Dimension(DimensionItem { report, pass }))
        })
        .collect()
}

pub fn cmd_dimension(config: &RunConfig, mode: DimensionMode) -> Result<ReportDocument> {
    let mut b = Builder::new(config)?;
    let ns = config.n.clone();
    let r = b.run("dimension", |c| dimension_items(c, &ns, mode));
    if mode == DimensionMode::Variety {
        b.notes.push(LIMITATION_NOTE.to_string());
    }
    Ok(b.finish(r.err()))
}

fn parity_item(config: &RunConfig, n: usize) -> Result<ParityItem> {
    let tol = &config.tolerances;
    let samples: Vec<(f64, f64)> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = stream_rng(seed, STREAM_PARITY);
            let left = GenericRankModel::sample(n, n, &mut rng)?;
            let right = GenericRankModel::sample(n, n, &mut rng)?;
            let p = build_generic_train(&left, &right)?;
            Ok((eval_h_report(&p)?.normalized, eval_q_residual(&p)?.normalized))
        })
        .collect::<Result<_>>()?;
    let h: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let mut sorted = h.clone();
    sorted.sort_by(f64::total_cmp);
    let within = h.iter().filter(|&&x| x <= tol.h).count();
    let above = h.iter().filter(|&&x| x > tol.odd_h).count();
    let even = n.is_multiple_of(2);
    let (claim, pass) = if even {
        ("h vanishes on every sample".to_string(), within == h.len())
    } else {
        (
            format!("h exceeds {:e} on at least {} of samples", tol.odd_h, tol.odd_rate),
            above as f64 >= tol.odd_rate * h.len() as f64,
        )
    };
    Ok(ParityItem {
        n,
        seeds: h.len(),
        q_normalized_min: samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min),
        h_min: sorted[0],
        h_median: sorted[sorted.len() / 2],
        h_max: sorted[sorted.len() - 1],
        h_normalized: h,
        count_within_h_tol: within,
        count_above_odd_threshold: above,
        claim,
        pass,
    })
}

/// `h_n` on trains of non-orthogonal rank-`n` nodes.
pub fn cmd_parity_study(config: &RunConfig) -> Result<ReportDocument> {
    let mut b = Builder::new(config)?;
    let ns = config.n.clone();
    let r = b.run("parity", |c| {
        ns.iter().map(|&n| Ok(ReportItem::Parity(parity_item(c, n)?))).collect()
    });
    Ok(b.finish(r.err()))
}

/// Every suite with its standard sizes; `config.n` is ignored. A step that
/// errors ends the run and the document is flagged as partial.
pub fn cmd_full_report(config: &RunConfig) -> Result<ReportDocument> {
    let mut b = Builder::new(config)?;
    b.notes.push(LIMITATION_NOTE.to_string());
    let steps: [(&str, Box<dyn Fn(&RunConfig) -> Result<Vec<ReportItem>>>); 7] = [
        ("vanish", Box::new(|c| vanish_items(c, &FULL_VANISH_N, TensorSource::Train))),
        ("nontrivial", Box::new(|c| nontrivial_items(c, &FULL_NONTRIVIAL_N))),
        ("certify", Box::new(|c| certify_items(c, &FULL_CERTIFY_N))),
        ("ideal", Box::new(|c| ideal_items(c, &FULL_IDEAL_N))),
        ("dimension", Box::new(|c| dimension_items(c, &FULL_PARAM_N, DimensionMode::Param))),
        ("variety", Box::new(|c| dimension_items(c, &FULL_VARIETY_N, DimensionMode::Variety))),
        (
            "parity",
            Box::new(|c| FULL_PARITY_N.iter().map(|&n| Ok(ReportItem::Parity(parity_item(c, n)?))).collect()),
        ),
    ];
    for (label, step) in steps {
        if let Err(e) = b.run(label, step) {
            return Ok(b.finish(Some(e)));
        }
    }
    Ok(b.finish(None))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(n: Vec<usize>, seeds: Vec<u64>) -> RunConfig {
        RunConfig::new("test", n, seeds)
    }

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_seeds("3,7").unwrap(), vec![3, 7]);
        assert_eq!(parse_seeds("5..7").unwrap(), vec![5, 6, 7]);
        assert_eq!(parse_seeds("1,4..5").unwrap(), vec![1, 4, 5]);
        assert!(parse_seeds("0").is_err());
        assert!(parse_seeds("7..5").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn config_validation() {
        assert!(config(vec![2], vec![1]).validate().is_ok());
        assert!(config(vec![1], vec![1]).validate().is_err());
        assert!(config(vec![2], vec![]).validate().is_err());
        let mut c = config(vec![2], vec![1]);
        c.tolerances.q = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn vanish_sources() {
        let c = config(vec![2, 3], (1..=5).collect());
        let doc = cmd_vanish_check(&c, TensorSource::Train).unwrap();
        assert_eq!(doc.summary.total, 10);
        assert!(doc.all_pass());
        let zero = cmd_vanish_check(&c, TensorSource::Degenerate).unwrap();
        assert!(zero.all_pass());
        let random = cmd_vanish_check(&c, TensorSource::Random).unwrap();
        assert!(random.items.iter().all(|i| matches!(i, ReportItem::Vanish(v) if !v.vanishes)));
        assert_eq!(random.summary.suites[&Suite::Nontrivial].passed, 10);
    }

    #[test]
    fn summary_matches_items_and_exit_code() {
        let c = config(vec![2], vec![1, 2]);
        let mut doc = cmd_certify(&c).unwrap();
        assert_eq!(doc.summary.total, 4);
        assert_eq!(doc.exit_code(), 0);
        if let ReportItem::Certify(i) = &mut doc.items[0] {
            i.pass = false;
        }
        doc.summary = Summary::of(&doc.items);
        assert_eq!(doc.summary.failed, 1);
        assert_eq!(doc.exit_code(), Suite::Certify.exit_bit());
    }

    #[test]
    fn reruns_are_identical_modulo_timings() {
        let c = config(vec![2, 3], vec![4, 9]);
        let a = cmd_parity_study(&c).unwrap().without_timings().to_json().unwrap();
        let b = cmd_parity_study(&c).unwrap().without_timings().to_json().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn csv_has_one_row_per_item() {
        let c = config(vec![2], vec![1, 2, 3]);
        let doc = cmd_vanish_check(&c, TensorSource::Train).unwrap();
        let csv = doc.to_csv().unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("suite,kind,n,seed,metric,value,pass"));
    }

    #[test]
    fn h_eval_exact_value() {
        let t = AnyTensor::Integer(DenseTensor::from_fn(vec![2; 4], |i| {
            num_bigint::BigInt::from(((i[0] + 2 * i[1] + 3 * i[2] + 5 * i[3]) % 7) as i64 - 3)
        }));
        let r = cmd_h_eval(&t).unwrap();
        assert_eq!(r.value, "18");
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["family"], "h");
        assert_eq!(v["value"], "18");
    }
}
