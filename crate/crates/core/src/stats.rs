//! Monte Carlo study of the quantum volume acceptance test.
//!
//! Two decision rules on the same binomial heavy-output model: the
//! closed-form two-sigma test of [`crate::qv::qv_pass`] and a bootstrap
//! lower bound.

use rand::Rng as _;
use rand_distr::{Beta, Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::qv::qv_pass;
use crate::report::Series;
use crate::rng::{self, Rng};

/// One-sided two-sigma Gaussian tail, `1 − Φ(2)`.
pub const TWO_SIGMA_RATE: f64 = 0.022_750_131_948_179_2;
pub const THRESHOLD: f64 = 2.0 / 3.0;
/// Fewest bootstrap resamples accepted.
pub const MIN_RESAMPLES: usize = 100;

/// Each circuit's heavy-output probability is `p`, or drawn from a beta
/// distribution with mean `p` and concentration `spread` when given.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopModel {
    pub p: f64,
    pub n_c: usize,
    pub n_s: u64,
    pub spread: Option<f64>,
}

impl HopModel {
    pub fn new(p: f64, n_c: usize, n_s: u64) -> Self {
        HopModel { p, n_c, n_s, spread: None }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(invalid("p", "must lie in [0, 1]"));
        }
        if self.n_c == 0 || self.n_s == 0 {
            return Err(invalid("model", "n_c and n_s must be positive"));
        }
        if let Some(k) = self.spread {
            if k.is_nan() || k <= 0.0 {
                return Err(invalid("spread", "beta concentration must be positive"));
            }
        }
        Ok(())
    }

    fn circuit_hop(&self, rng: &mut Rng) -> f64 {
        match self.spread {
            Some(k) if self.p > 0.0 && self.p < 1.0 => {
                Beta::new(self.p * k, (1.0 - self.p) * k).expect("valid beta").sample(rng)
            }
            _ => self.p,
        }
    }

    /// Heavy counts of every circuit for one trial.
    fn draw_circuits(&self, rng: &mut Rng) -> Vec<u64> {
        (0..self.n_c)
            .map(|_| {
                let p = self.circuit_hop(rng);
                Binomial::new(self.n_s, p).expect("valid binomial").sample(rng)
            })
            .collect()
    }

    /// Total heavy count of one trial.
    fn draw_total(&self, rng: &mut Rng) -> u64 {
        match self.spread {
            None => Binomial::new(self.n_c as u64 * self.n_s, self.p)
                .expect("valid binomial")
                .sample(rng),
            Some(_) => self.draw_circuits(rng).iter().sum(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resampling {
    /// Resample whole circuits with replacement.
    #[default]
    Circuit,
    /// Resample the shots of each circuit with replacement.
    Shot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Original,
    Bootstrap,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Original => "original",
            Protocol::Bootstrap => "bootstrap",
        }
    }
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    Ok(())
}

fn pass_fraction(trials: usize, seed: u64, stream: u64, trial: impl Fn(&mut Rng) -> bool + Sync) -> f64 {
    let passes = (0..trials)
        .into_par_iter()
        .filter(|&t| trial(&mut rng::child(seed, stream, t as u64)))
        .count();
    passes as f64 / trials as f64
}

/// Fraction of trials in which the two-sigma test passes.
pub fn simulate_original(model: &HopModel, trials: usize, seed: u64) -> Result<f64> {
    model.validate()?;
    check_trials(trials)?;
    Ok(pass_fraction(trials, seed, rng::TRIALS, |rng| {
        qv_pass(model.n_c, model.n_s, model.draw_total(rng))
            .expect("count within range")
            .passed
    }))
}

/// Standard deviation (n − 1 denominator) of a sample.
fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Bootstrap decision for one trial's per-circuit heavy counts.
pub fn bootstrap_pass(heavy: &[u64], n_s: u64, resamples: usize, resampling: Resampling, rng: &mut Rng) -> bool {
    let n_c = heavy.len();
    let total = (n_c as u64 * n_s) as f64;
    let mean = heavy.iter().sum::<u64>() as f64 / total;
    let means: Vec<f64> = (0..resamples)
        .map(|_| {
            let sum: u64 = match resampling {
                Resampling::Circuit => (0..n_c).map(|_| heavy[rng.random_range(0..n_c)]).sum(),
                Resampling::Shot => heavy
                    .iter()
                    .map(|&k| Binomial::new(n_s, k as f64 / n_s as f64).expect("valid").sample(rng))
                    .sum(),
            };
            sum as f64 / total
        })
        .collect();
    mean - 2.0 * std_dev(&means) > THRESHOLD
}

/// Fraction of trials in which the bootstrap lower bound
/// `mean − 2·std(bootstrap means)` exceeds 2/3.
pub fn simulate_bootstrap(
    model: &HopModel,
    trials: usize,
    resamples: usize,
    resampling: Resampling,
    seed: u64,
) -> Result<f64> {
    model.validate()?;
    check_trials(trials)?;
    if resamples < MIN_RESAMPLES {
        return Err(invalid("resamples", format!("need at least {MIN_RESAMPLES}")));
    }
    Ok(pass_fraction(trials, seed, rng::TRIALS, |rng| {
        let heavy = model.draw_circuits(rng);
        bootstrap_pass(&heavy, model.n_s, resamples, resampling, rng)
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub p: f64,
    pub pass_prob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionCurve {
    pub protocol: Protocol,
    pub n_c: usize,
    pub n_s: u64,
    pub trials: usize,
    pub points: Vec<CurvePoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveConfig {
    pub p_grid: Vec<f64>,
    pub n_c: Vec<usize>,
    pub n_s: u64,
    pub trials: usize,
    pub resamples: usize,
    pub resampling: Resampling,
    pub seed: u64,
}

/// Pass probability against true HOP for both protocols and every `n_c`.
pub fn failure_curves(cfg: &CurveConfig) -> Result<Vec<DecisionCurve>> {
    if cfg.p_grid.is_empty() || cfg.n_c.is_empty() {
        return Err(invalid("grid", "p grid and n_c list must be nonempty"));
    }
    let mut curves = Vec::new();
    for protocol in [Protocol::Original, Protocol::Bootstrap] {
        for (ci, &n_c) in cfg.n_c.iter().enumerate() {
            let points = cfg
                .p_grid
                .iter()
                .enumerate()
                .map(|(pi, &p)| {
                    let model = HopModel::new(p, n_c, cfg.n_s);
                    let seed = rng::derive_seed(cfg.seed, ci as u64, pi as u64);
                    let pass_prob = match protocol {
                        Protocol::Original => simulate_original(&model, cfg.trials, seed)?,
                        Protocol::Bootstrap => {
                            simulate_bootstrap(&model, cfg.trials, cfg.resamples, cfg.resampling, seed)?
                        }
                    };
                    Ok(CurvePoint { p, pass_prob })
                })
                .collect::<Result<_>>()?;
            curves.push(DecisionCurve {
                protocol,
                n_c,
                n_s: cfg.n_s,
                trials: cfg.trials,
                points,
            });
        }
    }
    Ok(curves)
}

/// Curves as one table: protocol, n_c, n_s, p, pass_prob, trials.
pub fn curves_series(curves: &[DecisionCurve]) -> Series {
    let mut s = Series::new(&["protocol", "n_c", "n_s", "p", "pass_prob", "trials"]);
    for c in curves {
        for pt in &c.points {
            s.push(vec![
                c.protocol.name().into(),
                c.n_c.into(),
                c.n_s.into(),
                pt.p.into(),
                pt.pass_prob.into(),
                c.trials.into(),
            ]);
        }
    }
    s
}

/// Parse `start:stop:step` (inclusive of `stop` up to rounding) or a comma list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || invalid("pgrid", format!("expected start:stop:step or a comma list, got `{spec}`"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 {
        let nums: Vec<f64> = parts
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let (start, stop, step) = (nums[0], nums[1], nums[2]);
        if step.is_nan() || step <= 0.0 || stop < start {
            return Err(bad());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| start + i as f64 * step).collect());
    }
    spec.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect()
}
