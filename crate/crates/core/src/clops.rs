//! CLOPS: circuit layer operations per second of a parameterized QV
//! template loop, timed against a configurable backend latency model.
//!
//! ```
//! use qbench::clops::clops_value;
//!
//! assert_eq!(clops_value(100, 10, 100, 5, 50.0).unwrap(), 10_000.0);
//! assert!(clops_value(1, 1, 1, 1, 0.0).is_err());
//! ```

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::time::Instant;

use rand::{Rng as _, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circuit::{bind_params, Circuit, EulerAngles, Gate, PermutationSpec, SlotId};
use crate::error::{invalid, Error, Result};
use crate::rng::{self, Rng};
use crate::sim::{CountsDistribution, Executor, NoiseModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClopsConfig {
    /// Template circuits.
    pub m: usize,
    /// Parameter updates.
    pub k: usize,
    /// Shots per circuit.
    pub s: u64,
    /// Layers per template.
    pub d: usize,
    pub seed: u64,
}

impl ClopsConfig {
    pub fn new(d: usize, seed: u64) -> Self {
        ClopsConfig { m: 100, k: 10, s: 100, d, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.k == 0 || self.s == 0 || self.d == 0 {
            return Err(invalid("clops", "M, K, S and D must all be positive"));
        }
        Ok(())
    }
}

/// Costs in abstract time units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyModel {
    pub circuit_fixed: f64,
    pub per_shot: f64,
    /// Charged per shot and layer.
    pub per_layer: f64,
    pub bind: f64,
    /// Charged once per iteration.
    pub result_return: f64,
}

impl LatencyModel {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: LatencyModel = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.circuit_fixed, self.per_shot, self.per_layer, self.bind, self.result_return];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("latency", "all costs must be finite and non-negative"));
        }
        Ok(())
    }

    /// Time of one iteration of `m` templates.
    pub fn iteration_time(&self, m: usize, s: u64, d: usize) -> f64 {
        let per_circuit = self.bind + self.circuit_fixed + s as f64 * (self.per_shot + d as f64 * self.per_layer);
        m as f64 * per_circuit + self.result_return
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClockMode {
    /// Latency model only; deterministic.
    #[default]
    Virtual,
    /// Latency model plus measured simulation time in seconds.
    Wall,
}

impl std::str::FromStr for ClockMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "virtual" => Ok(ClockMode::Virtual),
            "wall" => Ok(ClockMode::Wall),
            _ => Err(Error::Unknown { what: "clock mode", name: s.into() }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    TemplateGeneration,
    Compilation,
    TimerStart,
    Iteration,
    TimerStop,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTiming {
    pub iteration: usize,
    pub latency: f64,
    pub simulation: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClopsResult {
    pub config: ClopsConfig,
    pub clock: ClockMode,
    pub time_taken: f64,
    pub clops: f64,
    pub iterations: Vec<IterationTiming>,
    /// Phase markers in the order they happened.
    pub phases: Vec<Phase>,
}

/// `M·K·S·D / time`.
pub fn clops_value(m: usize, k: usize, s: u64, d: usize, time: f64) -> Result<f64> {
    if time <= 0.0 || !time.is_finite() {
        return Err(Error::DegenerateTimer);
    }
    Ok(m as f64 * k as f64 * s as f64 * d as f64 / time)
}

/// A width-`max(d, 2)` template of `d` QV-style layers. Each pair of a
/// layer is decomposed as three CXs between four rows of parameter slots.
pub fn clops_template(d: usize, rng: &mut Rng) -> Result<Circuit> {
    let width = d.max(2);
    let mut c = Circuit::new(width);
    let mut slot: SlotId = 0;
    for _ in 0..d {
        let perm = PermutationSpec::random(width, rng);
        let pairs: Vec<(usize, usize)> = (0..width / 2).map(|j| (perm.map(2 * j), perm.map(2 * j + 1))).collect();
        for row in 0..4 {
            let mut gates = Vec::new();
            for &(a, b) in &pairs {
                gates.push(Gate::param(slot, a));
                gates.push(Gate::param(slot + 1, b));
                slot += 2;
            }
            c.push(gates)?;
            if row < 3 {
                c.push(pairs.iter().map(|&(a, b)| Gate::cx(a, b)).collect::<Result<_>>()?)?;
            }
        }
    }
    Ok(c)
}

/// Angles for the next iteration, seeded by a SHA-256 digest of the
/// previous counts (or of the seed and template index on the first pass).
pub fn derive_parameters(
    slots: &[SlotId],
    previous: Option<&CountsDistribution>,
    seed: u64,
    template: usize,
) -> BTreeMap<SlotId, EulerAngles> {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((template as u64).to_le_bytes());
    if let Some(counts) = previous {
        for (bits, n) in counts.counts() {
            h.update(bits.as_bytes());
            h.update(n.to_le_bytes());
        }
    }
    let mut rng = Rng::from_seed(h.finalize().into());
    slots
        .iter()
        .map(|&s| {
            let a = EulerAngles::new(rng.random::<f64>() * TAU, rng.random::<f64>() * TAU, rng.random::<f64>() * TAU);
            (s, a)
        })
        .collect()
}

/// Run the timed loop. Templates are generated and checked before the
/// timer starts; each iteration derives new angles from the previous
/// iteration's results, binds, executes and returns.
pub fn run_clops(
    cfg: &ClopsConfig,
    latency: &LatencyModel,
    clock: ClockMode,
    nm: &NoiseModel,
    executor: &Executor,
) -> Result<ClopsResult> {
    cfg.validate()?;
    latency.validate()?;
    let mut phases = vec![Phase::TemplateGeneration];
    let templates: Vec<Circuit> = (0..cfg.m)
        .map(|j| clops_template(cfg.d, &mut rng::child(cfg.seed, rng::CIRCUITS, j as u64)))
        .collect::<Result<_>>()?;
    phases.push(Phase::Compilation);
    let slots = templates[0].param_slots();

    phases.push(Phase::TimerStart);
    let mut previous: Vec<Option<CountsDistribution>> = vec![None; cfg.m];
    let mut iterations = Vec::with_capacity(cfg.k);
    for it in 0..cfg.k {
        phases.push(Phase::Iteration);
        let started = Instant::now();
        let results: Vec<CountsDistribution> = templates
            .par_iter()
            .enumerate()
            .map(|(j, t)| {
                let values = derive_parameters(&slots, previous[j].as_ref(), cfg.seed, j);
                let bound = bind_params(t, &values)?;
                let key = (it * cfg.m + j) as u64;
                executor.run(&bound, nm, cfg.s, rng::derive_seed(cfg.seed, rng::SHOTS, key))
            })
            .collect::<Result<_>>()?;
        let simulation = started.elapsed().as_secs_f64();
        previous = results.into_iter().map(Some).collect();
        let lat = latency.iteration_time(cfg.m, cfg.s, cfg.d);
        let total = match clock {
            ClockMode::Virtual => lat,
            ClockMode::Wall => lat + simulation,
        };
        iterations.push(IterationTiming {
            iteration: it,
            latency: lat,
            simulation,
            total,
        });
    }
    phases.push(Phase::TimerStop);

    let time_taken: f64 = iterations.iter().map(|i| i.total).sum();
    Ok(ClopsResult {
        config: *cfg,
        clock,
        clops: clops_value(cfg.m, cfg.k, cfg.s, cfg.d, time_taken)?,
        time_taken,
        iterations,
        phases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn small(seed: u64) -> ClopsConfig {
        ClopsConfig { m: 4, k: 3, s: 20, d: 3, seed }
    }

    #[test]
    fn template_shape() {
        let c = clops_template(4, &mut stream(0)).unwrap();
        assert_eq!(c.width(), 4);
        assert_eq!(c.depth(), 4 * 7);
        assert_eq!(c.param_slots().len(), 4 * 4 * 4);
        assert_eq!(c.two_qubit_count(), 4 * 3 * 2);
    }

    #[test]
    fn zero_latency_virtual_is_degenerate() {
        let r = run_clops(&small(0), &LatencyModel::default(), ClockMode::Virtual, &NoiseModel::none(), &Executor::new());
        assert!(matches!(r, Err(Error::DegenerateTimer)));
    }

    #[test]
    fn virtual_clock_formula() {
        let lat = LatencyModel { circuit_fixed: 0.5, per_shot: 0.01, per_layer: 0.001, bind: 0.1, result_return: 2.0 };
        let cfg = small(1);
        let r = run_clops(&cfg, &lat, ClockMode::Virtual, &NoiseModel::none(), &Executor::new()).unwrap();
        let expect = 3.0 * (4.0 * (0.1 + 0.5 + 20.0 * (0.01 + 3.0 * 0.001)) + 2.0);
        assert!((r.time_taken - expect).abs() < 1e-12);
        assert_eq!(r.clops, (4 * 3 * 20 * 3) as f64 / r.time_taken);
        let again = run_clops(&cfg, &lat, ClockMode::Virtual, &NoiseModel::none(), &Executor::new()).unwrap();
        assert_eq!(r.clops, again.clops);
    }

    #[test]
    fn timer_excludes_setup() {
        let lat = LatencyModel { per_shot: 1.0, ..Default::default() };
        let r = run_clops(&small(2), &lat, ClockMode::Wall, &NoiseModel::none(), &Executor::new()).unwrap();
        let start = r.phases.iter().position(|p| *p == Phase::TimerStart).unwrap();
        assert!(r.phases[..start].contains(&Phase::TemplateGeneration));
        assert!(r.phases[..start].contains(&Phase::Compilation));
        assert_eq!(r.phases.iter().filter(|p| **p == Phase::Iteration).count(), 3);
        assert_eq!(*r.phases.last().unwrap(), Phase::TimerStop);
    }

    #[test]
    fn parameters_depend_on_counts() {
        let slots = [0, 1, 2];
        let a = CountsDistribution::from_pairs(2, [("00", 10), ("11", 10)]).unwrap();
        let b = CountsDistribution::from_pairs(2, [("00", 11), ("11", 9)]).unwrap();
        assert_ne!(derive_parameters(&slots, Some(&a), 0, 0), derive_parameters(&slots, Some(&b), 0, 0));
        assert_eq!(derive_parameters(&slots, Some(&a), 0, 0), derive_parameters(&slots, Some(&a), 0, 0));
    }

    #[test]
    fn latency_json() {
        let m = LatencyModel::from_json(r#"{"per_shot": 0.5}"#).unwrap();
        assert_eq!(m.per_shot, 0.5);
        assert!(LatencyModel::from_json(r#"{"per_shot": -1}"#).is_err());
        assert!(LatencyModel::from_json(r#"{"typo": 1}"#).is_err());
    }
}
