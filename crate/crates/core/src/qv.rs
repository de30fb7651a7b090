//! Quantum volume: model circuits, heavy outputs and the pass criterion.
//!
//! ```
//! use qbench::qv::qv_pass;
//!
//! let v = qv_pass(100, 1000, 76_000).unwrap();
//! assert!(v.passed && (v.lower_bound - 0.67458).abs() < 1e-5);
//! assert!(!qv_pass(100, 1000, 75_000).unwrap().passed);
//! assert!(!qv_pass(99, 1000, 99_000).unwrap().passed);
//! ```

use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::apps::filter_low_frequency;
use crate::circuit::{qv_model_circuit, Circuit};
use crate::error::{invalid, Error, Result};
use crate::opt::{Manifest, OverheadLedger, Pipeline};
use crate::rng;
use crate::sim::{simulate_ideal_with_cap, CountsDistribution, Executor, NoiseModel};

/// Fewest circuits for which a pass can be claimed.
pub const MIN_CIRCUITS: usize = 100;
/// Recommended shots per circuit.
pub const DEFAULT_SHOTS: u64 = 1000;
/// The "don't" row of the quantum volume rules that covers mitigation.
pub const MITIGATION_RULE: &str = "Error mitigation acting on quasi-distribution or expectation values: \
No measurement mitigation, zero-noise extrapolation, or probabilistic error cancellation";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QvConfig {
    /// Width and depth of the square model circuits.
    pub m: usize,
    pub n_c: usize,
    pub n_s: u64,
    pub seed: u64,
}

impl QvConfig {
    pub fn new(m: usize, seed: u64) -> Self {
        QvConfig {
            m,
            n_c: MIN_CIRCUITS,
            n_s: DEFAULT_SHOTS,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(invalid("width", "must be at least 1"));
        }
        if self.n_c < 1 {
            return Err(invalid("circuits", "must be at least 1"));
        }
        if self.n_s < 1 {
            return Err(invalid("shots", "must be at least 1"));
        }
        Ok(())
    }
}

/// Outcomes whose ideal probability is strictly above the median.
#[derive(Clone, Debug, PartialEq)]
pub struct HeavySet {
    pub median: f64,
    heavy: Vec<bool>,
    /// Ideal probability mass of the heavy outcomes.
    pub ideal_mass: f64,
}

impl HeavySet {
    /// Median of `probs` (even count: mean of the two central order
    /// statistics) and the outcomes strictly above it.
    pub fn from_probabilities(probs: &[f64]) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        let mut sorted = probs.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n.is_multiple_of(2) {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        } else {
            sorted[n / 2]
        };
        let heavy: Vec<bool> = probs.iter().map(|&p| p > median).collect();
        let ideal_mass = probs.iter().zip(&heavy).filter(|(_, &h)| h).map(|(p, _)| p).sum();
        Ok(HeavySet { median, heavy, ideal_mass })
    }

    pub fn contains(&self, index: usize) -> bool {
        self.heavy.get(index).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.heavy.iter().filter(|&&h| h).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Heavy outcome indices in increasing order.
    pub fn indices(&self) -> Vec<usize> {
        (0..self.heavy.len()).filter(|&i| self.heavy[i]).collect()
    }

    /// Shots of `counts` that landed in the heavy set.
    pub fn heavy_count(&self, counts: &CountsDistribution) -> u64 {
        counts.indexed().filter(|(i, _)| self.contains(*i)).map(|(_, c)| c).sum()
    }
}

pub fn heavy_set(c: &Circuit) -> Result<HeavySet> {
    HeavySet::from_probabilities(&simulate_ideal_with_cap(c, crate::sim::DEFAULT_WIDTH_CAP)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QvVerdict {
    pub lower_bound: f64,
    pub passed: bool,
}

/// The two-sigma test: passes iff `n_c ≥ 100` and
/// `(n_h − 2√(n_h(n_s − n_h/n_c))) / (n_c·n_s) > 2/3`.
pub fn qv_pass(n_c: usize, n_s: u64, n_h: u64) -> Result<QvVerdict> {
    let total = n_c as u64 * n_s;
    if n_c == 0 || n_s == 0 {
        return Err(invalid("qv_pass", "n_c and n_s must be positive"));
    }
    if n_h > total {
        return Err(invalid("qv_pass", format!("n_h = {n_h} exceeds n_c·n_s = {total}")));
    }
    let (nc, ns, nh) = (n_c as f64, n_s as f64, n_h as f64);
    let spread = (nh * (ns - nh / nc)).max(0.0).sqrt();
    let lower_bound = (nh - 2.0 * spread) / (nc * ns);
    Ok(QvVerdict {
        lower_bound,
        passed: n_c >= MIN_CIRCUITS && lower_bound > 2.0 / 3.0,
    })
}

/// Refuse pipelines the quantum volume rules forbid: measurement
/// mitigation and PEC act on the output distribution or expectation values.
pub fn check_rules(pipeline: &Pipeline) -> Result<()> {
    for t in pipeline.techniques() {
        if matches!(t.name(), "mmit" | "pec") {
            return Err(Error::RuleViolation {
                rule: format!("quantum volume rules, don't: {MITIGATION_RULE}"),
                detail: format!("pipeline contains `{}`", t.name()),
            });
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QvResult {
    pub m: usize,
    pub n_c: usize,
    pub n_s: u64,
    pub heavy_counts: Vec<u64>,
    pub n_h: u64,
    pub hop_mean: f64,
    pub lower_bound: f64,
    pub passed: bool,
    /// Mean ideal heavy mass of the generated circuits.
    pub ideal_heavy_mass: f64,
}

#[derive(Clone, Debug)]
pub struct QvRun {
    pub result: QvResult,
    pub manifest: Manifest,
    pub ledger: OverheadLedger,
}

/// Heavy count of one circuit's counts, rescaled to `n_s` shots when a
/// filter changed the number of surviving shots.
fn heavy_shots(heavy: &HeavySet, counts: &CountsDistribution, n_s: u64) -> u64 {
    let h = heavy.heavy_count(counts);
    if counts.shots() == n_s {
        h
    } else {
        (h as f64 / counts.shots() as f64 * n_s as f64).round() as u64
    }
}

/// Generate, compile, execute and score `n_c` model circuits.
pub fn run_qv(cfg: &QvConfig, nm: &NoiseModel, pipeline: &Pipeline, executor: &Executor) -> Result<QvRun> {
    cfg.validate()?;
    check_rules(pipeline)?;
    let before = executor.stats();
    let filter = pipeline.filter_threshold();
    let per_circuit: Vec<(u64, f64)> = (0..cfg.n_c)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::child(cfg.seed, rng::CIRCUITS, i as u64);
            let c = qv_model_circuit(cfg.m, &mut rng)?;
            let heavy = heavy_set(&c)?;
            let prepared = pipeline.prepare(&c, nm)?;
            let seed = rng::derive_seed(cfg.seed, rng::SHOTS, i as u64);
            let mut counts = executor.run(&prepared.circuit, &prepared.noise, cfg.n_s, seed)?;
            if let Some(t) = filter {
                counts = filter_low_frequency(&counts, t)?;
            }
            Ok((heavy_shots(&heavy, &counts, cfg.n_s), heavy.ideal_mass))
        })
        .collect::<Result<_>>()?;
    let mut ledger = OverheadLedger::new();
    ledger.record_base(cfg.n_c as u64, cfg.n_c as u64 * cfg.n_s);
    let after = executor.stats();
    ledger.reconcile(&crate::sim::ExecutionStats {
        circuits: after.circuits - before.circuits,
        shots: after.shots - before.shots,
    })?;

    let heavy_counts: Vec<u64> = per_circuit.iter().map(|x| x.0).collect();
    let n_h: u64 = heavy_counts.iter().sum();
    let verdict = qv_pass(cfg.n_c, cfg.n_s, n_h)?;
    Ok(QvRun {
        result: QvResult {
            m: cfg.m,
            n_c: cfg.n_c,
            n_s: cfg.n_s,
            n_h,
            hop_mean: n_h as f64 / (cfg.n_c as f64 * cfg.n_s as f64),
            lower_bound: verdict.lower_bound,
            passed: verdict.passed,
            ideal_heavy_mass: per_circuit.iter().map(|x| x.1).sum::<f64>() / cfg.n_c as f64,
            heavy_counts,
        },
        manifest: pipeline.manifest(),
        ledger,
    })
}

#[derive(Clone, Debug)]
pub struct VolumeScan {
    pub results: Vec<QvResult>,
    /// Largest passing width before the first failure, `None` if the first
    /// width already fails.
    pub log2_vq: Option<usize>,
    pub manifest: Manifest,
    pub ledger: OverheadLedger,
}

/// Run square circuits of increasing width until one fails.
pub fn scan_volume(
    widths: RangeInclusive<usize>,
    template: &QvConfig,
    nm: &NoiseModel,
    pipeline: &Pipeline,
    executor: &Executor,
) -> Result<VolumeScan> {
    if widths.is_empty() {
        return Err(invalid("widths", "empty range"));
    }
    check_rules(pipeline)?;
    let mut scan = VolumeScan {
        results: Vec::new(),
        log2_vq: None,
        manifest: pipeline.manifest(),
        ledger: OverheadLedger::new(),
    };
    for m in widths {
        let cfg = QvConfig {
            m,
            seed: rng::derive_seed(template.seed, rng::CIRCUITS, m as u64),
            ..*template
        };
        let run = run_qv(&cfg, nm, pipeline, executor)?;
        let base = run.ledger.base;
        scan.ledger.record_base(base.circuits, base.shots);
        let passed = run.result.passed;
        scan.results.push(run.result);
        if !passed {
            break;
        }
        scan.log2_vq = Some(m);
    }
    Ok(scan)
}
