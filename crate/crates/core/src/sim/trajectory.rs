//! Pauli-trajectory Monte Carlo.
//!
//! A circuit is lowered to a list of steps. Each step holds the deterministic
//! operations (gates, coherent drift) followed by stochastic error sites.
//! Every shot draws its error pattern first; a shot without errors samples
//! from the cached error-free distribution, a shot with errors resumes from
//! the checkpoint just before its first error.

use std::collections::HashMap;

use rand::Rng as _;

use super::{check_terminal_measures, CountsDistribution, NoiseModel, Statevector};
use crate::circuit::{Circuit, GateKind, Layer};
use crate::error::{Error, Result};
use crate::linalg::{Mat2, Mat4};
use crate::rng::Rng;

#[derive(Clone, Debug)]
pub(crate) enum Op {
    One(usize, Mat2),
    Two(usize, usize, Mat4),
    Rz(usize, f64),
    X(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Site {
    /// Uniform non-identity Pauli on one qubit.
    One { q: usize, p: f64 },
    /// Uniform non-identity two-qubit Pauli.
    Two { a: usize, b: usize, p: f64 },
    /// Z flip.
    ZFlip { q: usize, p: f64 },
}

impl Site {
    pub(crate) fn probability(&self) -> f64 {
        match *self {
            Site::One { p, .. } | Site::Two { p, .. } | Site::ZFlip { p, .. } => p,
        }
    }
}

/// A noise site together with where it sits in its layer.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PlannedSite {
    pub site: Site,
    /// Index of the gate the error follows, `None` for idle dephasing.
    pub gate: Option<usize>,
    /// Sub-step within the layer (echo pulses split a layer into three).
    pub step: usize,
}

pub(crate) struct LayerPlan {
    pub ops: Vec<Vec<Op>>,
    pub sites: Vec<PlannedSite>,
}

fn push_drift(ops: &mut Vec<Op>, q: usize, angle: f64) {
    if angle != 0.0 {
        ops.push(Op::Rz(q, angle));
    }
}

fn idle_probability(nm: &NoiseModel, time: f64) -> f64 {
    if nm.idle_dephase == 0.0 || time <= 0.0 {
        0.0
    } else {
        1.0 - (1.0 - nm.idle_dephase).powf(time)
    }
}

/// Lower one layer to operations and noise sites.
pub(crate) fn plan_layer(layer: &Layer, width: usize, nm: &NoiseModel) -> Result<LayerPlan> {
    let mut plan = LayerPlan {
        ops: vec![Vec::new()],
        sites: Vec::new(),
    };
    if layer.is_barrier() || layer.gates().iter().all(|g| g.kind == GateKind::Measure) {
        return Ok(plan);
    }
    let d = nm.durations;
    let has_echo = layer.gates().iter().any(|g| g.kind == GateKind::Echo);
    let longest = layer
        .gates()
        .iter()
        .filter_map(|g| match g.kind {
            GateKind::U1q(_) | GateKind::X => Some(d.one_qubit),
            GateKind::Su4(_) | GateKind::Cx => Some(d.two_qubit),
            _ => None,
        })
        .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.max(t))));
    let duration = longest.unwrap_or(d.one_qubit);
    if has_echo {
        plan.ops.resize(3, Vec::new());
    }
    let last = plan.ops.len() - 1;
    let mut busy = vec![false; width];
    let kappa = nm.gate_drift;

    for (gi, g) in layer.gates().iter().enumerate() {
        for &q in &g.targets {
            busy[q] = true;
        }
        let pre = |ops: &mut Vec<Op>| {
            if g.sign_inverted {
                for &q in &g.targets {
                    push_drift(ops, q, -kappa);
                }
            }
        };
        let post = |ops: &mut Vec<Op>| {
            if !g.sign_inverted {
                for &q in &g.targets {
                    push_drift(ops, q, kappa);
                }
            }
        };
        match &g.kind {
            GateKind::Param(slot) => return Err(Error::UnboundSlot { slot: *slot }),
            GateKind::Measure | GateKind::Barrier => {}
            GateKind::U1q(_) | GateKind::X => {
                let q = g.targets[0];
                let ops = &mut plan.ops[0];
                pre(ops);
                match &g.kind {
                    GateKind::X => ops.push(Op::X(q)),
                    GateKind::U1q(m) => ops.push(Op::One(q, *m)),
                    _ => unreachable!(),
                }
                post(ops);
                plan.sites.push(PlannedSite { site: Site::One { q, p: nm.p1 }, gate: Some(gi), step: 0 });
                let idle = duration - d.one_qubit;
                push_drift(&mut plan.ops[last], q, nm.idle_drift * idle);
                plan.sites.push(PlannedSite {
                    site: Site::ZFlip { q, p: idle_probability(nm, idle) },
                    gate: None,
                    step: last,
                });
            }
            GateKind::Su4(_) | GateKind::Cx => {
                let (a, b) = (g.targets[0], g.targets[1]);
                let m = g.matrix2().expect("two-qubit gate");
                let ops = &mut plan.ops[0];
                pre(ops);
                ops.push(Op::Two(a, b, m));
                post(ops);
                plan.sites.push(PlannedSite {
                    site: Site::Two { a, b, p: nm.p2_for(a, b) },
                    gate: Some(gi),
                    step: 0,
                });
                let idle = duration - d.two_qubit;
                for q in [a, b] {
                    push_drift(&mut plan.ops[last], q, nm.idle_drift * idle);
                    plan.sites.push(PlannedSite {
                        site: Site::ZFlip { q, p: idle_probability(nm, idle) },
                        gate: None,
                        step: last,
                    });
                }
            }
            GateKind::Echo => {
                let q = g.targets[0];
                let delta = nm.idle_drift * duration;
                for (step, frac) in [(0usize, 0.25), (1, 0.5)] {
                    let ops = &mut plan.ops[step];
                    push_drift(ops, q, delta * frac);
                    ops.push(Op::X(q));
                    push_drift(ops, q, kappa);
                    plan.sites.push(PlannedSite { site: Site::One { q, p: nm.p1 }, gate: Some(gi), step });
                }
                push_drift(&mut plan.ops[2], q, delta * 0.25);
                plan.sites.push(PlannedSite {
                    site: Site::ZFlip { q, p: idle_probability(nm, duration) },
                    gate: None,
                    step: 2,
                });
            }
        }
    }
    for q in (0..width).filter(|&q| !busy[q]) {
        push_drift(&mut plan.ops[last], q, nm.idle_drift * duration);
        plan.sites.push(PlannedSite {
            site: Site::ZFlip { q, p: idle_probability(nm, duration) },
            gate: None,
            step: last,
        });
    }
    Ok(plan)
}

struct Step {
    ops: Vec<Op>,
    sites: Vec<Site>,
}

struct Program {
    width: usize,
    steps: Vec<Step>,
}

fn compile(c: &Circuit, nm: &NoiseModel) -> Result<Program> {
    nm.validate()?;
    check_terminal_measures(c)?;
    let mut steps = Vec::new();
    for layer in c.layers() {
        let plan = plan_layer(layer, c.width(), nm)?;
        let base = steps.len();
        for ops in plan.ops {
            steps.push(Step { ops, sites: Vec::new() });
        }
        for ps in plan.sites.into_iter().filter(|ps| ps.site.probability() > 0.0) {
            steps[base + ps.step].sites.push(ps.site);
        }
    }
    Ok(Program { width: c.width(), steps })
}

fn apply_ops(psi: &mut Statevector, ops: &[Op]) {
    for op in ops {
        match op {
            Op::One(q, m) => psi.apply_1q(*q, m),
            Op::Two(a, b, m) => psi.apply_2q(*a, *b, m),
            Op::Rz(q, angle) => psi.apply_rz(*q, *angle),
            Op::X(q) => psi.apply_pauli(*q, 1),
        }
    }
}

fn apply_error(psi: &mut Statevector, site: &Site, code: u8) {
    match *site {
        Site::One { q, .. } | Site::ZFlip { q, .. } => psi.apply_pauli(q, code),
        Site::Two { a, b, .. } => {
            psi.apply_pauli(a, code >> 2);
            psi.apply_pauli(b, code & 3);
        }
    }
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    p.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

fn sample_index(cdf: &[f64], rng: &mut Rng) -> usize {
    let total = *cdf.last().expect("non-empty");
    let u = rng.random::<f64>() * total;
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// Probabilities of the trajectory in which no stochastic error fires:
/// ideal gates plus all coherent drift, before readout.
pub fn deterministic_probabilities(c: &Circuit, nm: &NoiseModel) -> Result<Vec<f64>> {
    let program = compile(c, nm)?;
    let mut psi = Statevector::zero(program.width);
    for step in &program.steps {
        apply_ops(&mut psi, &step.ops);
    }
    Ok(psi.probabilities())
}

/// Sample `shots` noisy executions of `c`.
///
/// Per shot: after each gate a uniformly random non-identity Pauli on its
/// targets with probability `p1` / `p2`; every idle qubit gets the coherent
/// `Rz(idle_drift · t)` and a Z flip with probability `idle_dephase` per unit
/// idle time; the measured bitstring then passes through the per-qubit
/// confusion matrices. Deterministic for a given RNG state.
pub fn sample_noisy(c: &Circuit, nm: &NoiseModel, shots: u64, rng: &mut Rng) -> Result<CountsDistribution> {
    let program = compile(c, nm)?;
    let width = program.width;
    let stochastic = program.steps.iter().any(|s| !s.sites.is_empty());

    let mut checkpoints = Vec::new();
    let mut psi = Statevector::zero(width);
    for step in &program.steps {
        if stochastic {
            checkpoints.push(psi.clone());
        }
        apply_ops(&mut psi, &step.ops);
    }
    let clean_cdf = cumulative(&psi.probabilities());

    let flips: Vec<[f64; 2]> = (0..width)
        .map(|q| {
            let conf = nm.readout_for(q);
            [conf.flip_probability(0), conf.flip_probability(1)]
        })
        .collect();
    let readout_noise = flips.iter().any(|f| f[0] > 0.0 || f[1] > 0.0);

    let mut hist: HashMap<usize, u64> = HashMap::new();
    let mut errors: Vec<(usize, usize, u8)> = Vec::new();
    for _ in 0..shots {
        errors.clear();
        if stochastic {
            for (si, step) in program.steps.iter().enumerate() {
                for (k, site) in step.sites.iter().enumerate() {
                    if rng.random::<f64>() < site.probability() {
                        let code = match site {
                            Site::One { .. } => rng.random_range(1..4u8),
                            Site::Two { .. } => rng.random_range(1..16u8),
                            Site::ZFlip { .. } => 3,
                        };
                        errors.push((si, k, code));
                    }
                }
            }
        }
        let mut outcome = match errors.first() {
            None => sample_index(&clean_cdf, rng),
            Some(&(first, _, _)) => {
                let mut psi = checkpoints[first].clone();
                let mut pending = errors.iter().peekable();
                for (si, step) in program.steps.iter().enumerate().skip(first) {
                    apply_ops(&mut psi, &step.ops);
                    while let Some(&&(s, k, code)) = pending.peek() {
                        if s != si {
                            break;
                        }
                        apply_error(&mut psi, &step.sites[k], code);
                        pending.next();
                    }
                }
                sample_index(&cumulative(&psi.probabilities()), rng)
            }
        };
        if readout_noise {
            for (q, f) in flips.iter().enumerate() {
                let bit = (outcome >> q) & 1;
                if f[bit] > 0.0 && rng.random::<f64>() < f[bit] {
                    outcome ^= 1 << q;
                }
            }
        }
        *hist.entry(outcome).or_insert(0) += 1;
    }
    Ok(CountsDistribution::from_indices(width, hist))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{qv_model_circuit, Gate};
    use crate::rng::stream;
    use crate::linalg;
    use crate::sim::{simulate_ideal, Confusion};

    /// Pearson χ² statistic and degrees of freedom against expected probabilities.
    fn chi_square(counts: &CountsDistribution, expected: &[f64]) -> (f64, usize) {
        let n = counts.shots() as f64;
        let p = counts.probabilities().unwrap();
        let mut stat = 0.0;
        let mut dof = 0usize;
        for (i, &e) in expected.iter().enumerate() {
            if e * n < 1e-9 {
                assert_eq!(p[i], 0.0, "outcome {i} has zero expected probability");
                continue;
            }
            let o = p[i] * n;
            stat += (o - e * n).powi(2) / (e * n);
            dof += 1;
        }
        (stat, dof.saturating_sub(1))
    }

    /// Upper 0.001 quantile of χ²(k) via the Wilson–Hilferty approximation.
    fn chi_square_critical(k: usize) -> f64 {
        let k = k.max(1) as f64;
        let z = 3.090_232; // Φ⁻¹(0.999)
        k * (1.0 - 2.0 / (9.0 * k) + z * (2.0 / (9.0 * k)).sqrt()).powi(3)
    }

    #[test]
    fn noiseless_sampling_matches_born_rule() {
        let c = qv_model_circuit(3, &mut stream(12)).unwrap();
        let counts = sample_noisy(&c, &NoiseModel::none(), 10_000, &mut stream(1)).unwrap();
        let (stat, dof) = chi_square(&counts, &simulate_ideal(&c).unwrap());
        assert!(stat < chi_square_critical(dof), "chi2 {stat} dof {dof}");
    }

    #[test]
    fn full_two_qubit_depolarization_is_uniform() {
        let mut c = Circuit::new(2);
        c.push(vec![Gate::cx(0, 1).unwrap()]).unwrap();
        let nm = NoiseModel { p2: 1.0, ..NoiseModel::none() };
        let counts = sample_noisy(&c, &nm, 10_000, &mut stream(2)).unwrap();
        // A uniformly random non-identity Pauli on |00>: 12 of 15 Paulis flip
        // at least one bit, so P(00) = 3/15 and the rest 4/15 each.
        let expected = [3.0 / 15.0, 4.0 / 15.0, 4.0 / 15.0, 4.0 / 15.0];
        let (stat, dof) = chi_square(&counts, &expected);
        assert!(stat < chi_square_critical(dof), "chi2 {stat}");
    }

    #[test]
    fn readout_flip_rate_is_binomial() {
        let nm = NoiseModel { readout: vec![Confusion::flip(0.1)], ..NoiseModel::none() };
        let counts = sample_noisy(&Circuit::new(1), &nm, 10_000, &mut stream(3)).unwrap();
        let ones = counts.get("1") as f64 / 1e4;
        assert!((ones - 0.1).abs() < 0.01, "{ones}");
    }

    #[test]
    fn depolarized_identity_matches_channel() {
        // X then depolarizing p: P(0) = 2p/3 exactly.
        let mut c = Circuit::new(1);
        c.push(vec![Gate::x(0)]).unwrap();
        let p = 0.3;
        let nm = NoiseModel { p1: p, ..NoiseModel::none() };
        let n = 20_000;
        let counts = sample_noisy(&c, &nm, n, &mut stream(4)).unwrap();
        let observed = counts.get("0") as f64 / n as f64;
        let expected = 2.0 * p / 3.0;
        let sigma = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!((observed - expected).abs() < 3.0 * sigma, "{observed} vs {expected}");
    }

    #[test]
    fn identical_seed_identical_counts() {
        let c = qv_model_circuit(3, &mut stream(5)).unwrap();
        let nm = NoiseModel::kolkata_like().restrict(&[0, 1, 2]);
        let a = sample_noisy(&c, &nm, 2000, &mut stream(6)).unwrap();
        let b = sample_noisy(&c, &nm, 2000, &mut stream(6)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.shots(), 2000);
    }

    #[test]
    fn idle_drift_is_refocused_by_x_pair() {
        // Qubit 0 idles for four layers between two Hadamards. With drift
        // the final |+> is rotated; an X on layers 0 and 2 cancels it.
        let h = linalg::hadamard();
        let nm = NoiseModel { idle_drift: 0.3, ..NoiseModel::none() };
        let build = |dd: bool| {
            let mut c = Circuit::new(2);
            c.push(vec![Gate::u1q(h, 0).unwrap()]).unwrap();
            for k in 0..4 {
                let mut gates = vec![Gate::x(1)];
                if dd && (k == 0 || k == 2) {
                    gates.push(Gate::x(0));
                }
                c.push(gates).unwrap();
            }
            c.push(vec![Gate::u1q(h, 0).unwrap()]).unwrap();
            c
        };
        let drifted = deterministic_probabilities(&build(false), &nm).unwrap();
        let refocused = deterministic_probabilities(&build(true), &nm).unwrap();
        let p0 = |p: &[f64]| p[0] + p[2];
        assert!(p0(&drifted) < 0.9);
        assert!((p0(&refocused) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn echo_gate_cancels_drift_within_a_layer() {
        let h = linalg::hadamard();
        let nm = NoiseModel { idle_drift: 0.4, ..NoiseModel::none() };
        let build = |echo: bool| {
            let mut c = Circuit::new(2);
            c.push(vec![Gate::u1q(h, 0).unwrap()]).unwrap();
            let mut gates = vec![Gate::x(1)];
            if echo {
                gates.push(Gate::echo(0));
            }
            c.push(gates).unwrap();
            c.push(vec![Gate::u1q(h, 0).unwrap()]).unwrap();
            c
        };
        let p0 = |p: Vec<f64>| p[0] + p[2];
        assert!(p0(deterministic_probabilities(&build(false), &nm).unwrap()) < 0.97);
        assert!((p0(deterministic_probabilities(&build(true), &nm).unwrap()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sign_inverted_gates_cancel_gate_drift() {
        let mut rng = stream(9);
        let u = crate::circuit::haar_su2(&mut rng);
        let nm = NoiseModel { gate_drift: 0.2, ..NoiseModel::none() };
        let mut fwd = Circuit::new(1);
        fwd.push(vec![Gate::u1q(u, 0).unwrap()]).unwrap();
        let flipped = crate::circuit::compose(&fwd, &crate::circuit::inverse(&fwd).unwrap(), true).unwrap();
        let native = crate::circuit::compose(
            &fwd,
            &crate::circuit::inverse_with(&fwd, crate::circuit::InverseStyle::Native).unwrap(),
            true,
        )
        .unwrap();
        let s_flip = deterministic_probabilities(&flipped, &nm).unwrap()[0];
        let s_native = deterministic_probabilities(&native, &nm).unwrap()[0];
        assert!((s_flip - 1.0).abs() < 1e-12);
        assert!(s_native <= s_flip);
    }
}
