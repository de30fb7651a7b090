use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate, GateKind};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat2};
use crate::rng;
use crate::sim::trajectory::{plan_layer, Site};
use crate::sim::{estimate_from_counts, Estimate, Executor, NoiseModel, PauliString};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PecConfig {
    /// Number of sampled correction circuits.
    pub samples: usize,
    pub shots_per_sample: u64,
    pub gamma_cap: f64,
    pub seed: u64,
}

impl Default for PecConfig {
    fn default() -> Self {
        PecConfig {
            samples: 500,
            shots_per_sample: 100,
            gamma_cap: super::DEFAULT_GAMMA_CAP,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PecEstimate {
    pub estimate: Estimate,
    pub gamma: f64,
    /// Sampling-overhead multiplier γ².
    pub multiplier: f64,
    pub circuits: u64,
    pub shots: u64,
}

/// Symplectic commutation sign between two k-qubit Pauli codes
/// (two bits per qubit, `0..4` = I, X, Y, Z).
fn commutes(p: usize, q: usize, k: usize) -> bool {
    let xz = |c: usize| (matches!(c, 1 | 2) as usize, matches!(c, 2 | 3) as usize);
    let mut parity = 0;
    for i in 0..k {
        let (xp, zp) = xz((p >> (2 * i)) & 3);
        let (xq, zq) = xz((q >> (2 * i)) & 3);
        parity ^= (xp & zq) ^ (zp & xq);
    }
    parity == 0
}

/// Quasi-probabilities of the inverse of a k-qubit Pauli channel with
/// error probabilities `q` (indexed by Pauli code).
fn inverse_channel(q: &[f64], k: usize) -> Result<Vec<f64>> {
    let n = q.len();
    let sign = |a: usize, b: usize| if commutes(a, b, k) { 1.0 } else { -1.0 };
    let fidelity: Vec<f64> = (0..n).map(|b| (0..n).map(|r| q[r] * sign(r, b)).sum()).collect();
    if fidelity.iter().any(|&f| f <= 1e-12) {
        return Err(Error::InvalidNoise("Pauli channel is not invertible".into()));
    }
    Ok((0..n)
        .map(|p| (0..n).map(|b| sign(p, b) / fidelity[b]).sum::<f64>() / n as f64)
        .collect())
}

/// Code layout of a two-qubit site: first target in the high two bits,
/// matching the trajectory sampler.
fn site_channel(site: &Site) -> (Vec<f64>, usize) {
    match *site {
        Site::One { p, .. } => (vec![1.0 - p, p / 3.0, p / 3.0, p / 3.0], 1),
        Site::ZFlip { p, .. } => (vec![1.0 - p, 0.0, 0.0, p], 1),
        Site::Two { p, .. } => {
            let mut q = vec![p / 15.0; 16];
            q[0] = 1.0 - p;
            (q, 2)
        }
    }
}

struct Correction {
    layer: usize,
    gate: usize,
    /// Per target of the gate: which qubit of the site maps onto it.
    targets: Vec<usize>,
    quasi: Vec<f64>,
    gamma: f64,
    cdf: Vec<f64>,
}

fn corrections(c: &Circuit, nm: &NoiseModel) -> Result<Vec<Correction>> {
    let mut out = Vec::new();
    // last[q] = (layer, gate) of the latest operation on qubit q so far.
    let mut last: Vec<Option<(usize, usize)>> = vec![None; c.width()];
    for (li, layer) in c.layers().iter().enumerate() {
        if layer.gates().iter().any(|g| g.kind == GateKind::Echo) {
            return Err(Error::Inapplicable {
                technique: "pec".into(),
                reason: "echo pulses split layers into sub-steps the cancellation does not model".into(),
            });
        }
        for (gi, g) in layer.gates().iter().enumerate() {
            if !matches!(g.kind, GateKind::Measure | GateKind::Barrier) {
                for &q in &g.targets {
                    last[q] = Some((li, gi));
                }
            }
        }
        let plan = plan_layer(layer, c.width(), nm)?;
        for ps in plan.sites.iter().filter(|ps| ps.site.probability() > 0.0) {
            let (anchor, targets) = match (ps.gate, ps.site) {
                (Some(gi), Site::Two { .. }) => ((li, gi), vec![0, 1]),
                (Some(gi), _) => ((li, gi), vec![0]),
                (None, Site::ZFlip { q, .. }) => match last[q] {
                    // Idle dephasing before any gate acts on |0⟩ and is harmless.
                    None => continue,
                    Some(anchor) => {
                        let g = &c.layers()[anchor.0].gates()[anchor.1];
                        let slot = g.targets.iter().position(|&t| t == q).expect("gate acts on q");
                        let mut t = vec![usize::MAX; g.targets.len()];
                        t[slot] = 0;
                        (anchor, t)
                    }
                },
                (None, _) => unreachable!("only dephasing sites lack a gate"),
            };
            let (channel, k) = site_channel(&ps.site);
            let quasi = inverse_channel(&channel, k)?;
            let gamma = quasi.iter().map(|x| x.abs()).sum::<f64>();
            let cdf = quasi
                .iter()
                .scan(0.0, |acc, x| {
                    *acc += x.abs() / gamma;
                    Some(*acc)
                })
                .collect();
            out.push(Correction {
                layer: anchor.0,
                gate: anchor.1,
                targets,
                quasi,
                gamma,
                cdf,
            });
        }
    }
    Ok(out)
}

/// Total sampling overhead γ of cancelling every stochastic Pauli error of
/// `nm` in `c`.
pub fn pec_gamma(c: &Circuit, nm: &NoiseModel) -> Result<f64> {
    Ok(corrections(c, nm)?.iter().map(|k| k.gamma).product())
}

fn corrected_gate(g: &Gate, frame: &[Mat2]) -> Result<Gate> {
    let mut out = match (&g.kind, g.matrix1(), g.matrix2()) {
        (_, Some(m), _) => Gate::u1q(linalg::matmul(&frame[0], &m), g.targets[0])?,
        (_, _, Some(m)) => {
            let p = linalg::kron(&frame[0], &frame[1]);
            Gate::su4(linalg::matmul(&p, &m), g.targets[0], g.targets[1])?
        }
        (kind, _, _) => {
            return Err(Error::Inapplicable {
                technique: "pec".into(),
                reason: format!("cannot attach a correction to a `{}` gate", kind.name()),
            })
        }
    };
    out.sign_inverted = g.sign_inverted;
    Ok(out)
}

/// Probabilistic error cancellation of `⟨observable⟩`.
///
/// The inverse of every stochastic Pauli error channel in `nm` is written as
/// a signed mixture of Pauli corrections; each sample draws one correction
/// per error site with probability `|η|/γ`, merges it into the gate it
/// follows and runs the circuit. The estimate is γ times the mean of the
/// signed sample means. Coherent drift and readout error are not cancelled.
pub fn pec_expectation(
    c: &Circuit,
    observable: &PauliString,
    nm: &NoiseModel,
    cfg: &PecConfig,
    executor: &Executor,
) -> Result<PecEstimate> {
    use rand::Rng as _;

    if cfg.samples == 0 || cfg.shots_per_sample == 0 {
        return Err(crate::error::invalid("pec", "samples and shots must be positive"));
    }
    let sites = corrections(c, nm)?;
    let gamma: f64 = sites.iter().map(|k| k.gamma).product();
    if gamma > cfg.gamma_cap {
        return Err(Error::GammaCap {
            gamma,
            cap: cfg.gamma_cap,
            multiplier: gamma * gamma,
        });
    }
    let mut values = Vec::with_capacity(cfg.samples);
    for i in 0..cfg.samples {
        let mut rng = rng::child(cfg.seed, rng::PEC, i as u64);
        let mut sign = 1.0;
        let mut frames: std::collections::BTreeMap<(usize, usize), Vec<Mat2>> = Default::default();
        for site in &sites {
            let u = rng.random::<f64>();
            let code = site.cdf.partition_point(|&x| x <= u).min(site.quasi.len() - 1);
            if site.quasi[code] < 0.0 {
                sign = -sign;
            }
            if code == 0 {
                continue;
            }
            let g = &c.layers()[site.layer].gates()[site.gate];
            let frame = frames
                .entry((site.layer, site.gate))
                .or_insert_with(|| vec![linalg::identity(); g.targets.len()]);
            let k = site.quasi.len().trailing_zeros() as usize / 2;
            for (slot, &which) in site.targets.iter().enumerate() {
                if which == usize::MAX {
                    continue;
                }
                // Site qubit 0 is the high pair of bits for a two-qubit code.
                let shift = 2 * (k - 1 - which);
                let pauli = linalg::pauli(((code >> shift) & 3) as u8);
                frame[slot] = linalg::matmul(&pauli, &frame[slot]);
            }
        }
        let mut circuit = c.clone();
        for ((li, gi), frame) in &frames {
            let layers = circuit.layers_mut();
            let g = corrected_gate(&layers[*li].gates()[*gi], frame)?;
            layers[*li].gates_mut()[*gi] = g;
        }
        let run = observable.measurement_circuit(&circuit)?;
        let seed = rng::derive_seed(cfg.seed, rng::SHOTS, i as u64);
        let counts = executor.run(&run, nm, cfg.shots_per_sample, seed)?;
        values.push(sign * gamma * estimate_from_counts(observable, &counts).mean);
    }
    Ok(PecEstimate {
        estimate: Estimate::from_samples(&values),
        gamma,
        multiplier: gamma * gamma,
        circuits: cfg.samples as u64,
        shots: cfg.samples as u64 * cfg.shots_per_sample,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x_chain(depth: usize) -> Circuit {
        let mut c = Circuit::new(1);
        for _ in 0..depth {
            c.push(vec![Gate::x(0)]).unwrap();
        }
        c
    }

    #[test]
    fn depolarizing_inverse_matches_closed_form() {
        let p = 0.1;
        let q = [1.0 - p, p / 3.0, p / 3.0, p / 3.0];
        let eta = inverse_channel(&q, 1).unwrap();
        let f = 1.0 - 4.0 * p / 3.0;
        let gamma: f64 = eta.iter().map(|x| x.abs()).sum();
        assert!((gamma - (3.0 / f - 1.0) / 2.0).abs() < 1e-12);
        assert!((eta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_qubit_inverse_composes_to_identity() {
        let p = 0.2;
        let mut q = vec![p / 15.0; 16];
        q[0] = 1.0 - p;
        let eta = inverse_channel(&q, 2).unwrap();
        // Convolution of the channel with its inverse over the Pauli group
        // (Paulis compose by XOR of their codes up to phase).
        let mut composed = [0.0; 16];
        for a in 0..16 {
            for b in 0..16 {
                composed[a ^ b] += q[a] * eta[b];
            }
        }
        assert!((composed[0] - 1.0).abs() < 1e-12);
        assert!(composed[1..].iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn zero_noise_is_free() {
        let ex = Executor::new();
        let cfg = PecConfig { samples: 20, shots_per_sample: 50, ..PecConfig::default() };
        let z = PauliString::parse("Z").unwrap();
        let r = pec_expectation(&x_chain(1), &z, &NoiseModel::none(), &cfg, &ex).unwrap();
        assert_eq!(r.gamma, 1.0);
        assert_eq!(r.estimate.mean, -1.0);
        assert_eq!(ex.stats().circuits, 20);
    }

    #[test]
    fn cancels_depolarizing_after_x() {
        let nm = NoiseModel { p1: 0.1, ..NoiseModel::none() };
        let ex = Executor::new();
        let z = PauliString::parse("Z").unwrap();
        let cfg = PecConfig { samples: 2000, shots_per_sample: 50, seed: 3, ..PecConfig::default() };
        let r = pec_expectation(&x_chain(1), &z, &nm, &cfg, &ex).unwrap();
        assert!((r.estimate.mean + 1.0).abs() < 3.0 * r.estimate.std_err, "{:?}", r.estimate);

        // Unmitigated: Z after X is −(1 − 4p/3).
        let shots = 40_000;
        let counts = ex.run(&x_chain(1), &nm, shots, 5).unwrap();
        let raw = (counts.get("0") as f64 - counts.get("1") as f64) / shots as f64;
        let want: f64 = -(1.0 - 4.0 * 0.1 / 3.0);
        let sigma = (1.0 - want * want).sqrt() / (shots as f64).sqrt();
        assert!((raw - want).abs() < 3.0 * sigma, "{raw} vs {want}");
    }

    #[test]
    fn gamma_grows_with_depth_and_is_capped() {
        let nm = NoiseModel { p1: 0.1, ..NoiseModel::none() };
        let g: Vec<f64> = (1..6).map(|d| pec_gamma(&x_chain(d), &nm).unwrap()).collect();
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        let cfg = PecConfig { gamma_cap: 2.0, ..PecConfig::default() };
        let z = PauliString::parse("Z").unwrap();
        let err = pec_expectation(&x_chain(5), &z, &nm, &cfg, &Executor::new()).unwrap_err();
        assert!(matches!(err, Error::GammaCap { .. }));
    }

    #[test]
    fn two_qubit_and_dephasing_sites_cancel() {
        let nm = NoiseModel { p2: 0.08, idle_dephase: 0.05, ..NoiseModel::none() };
        let h = linalg::hadamard();
        let mut c = Circuit::new(2);
        c.push(vec![Gate::u1q(h, 0).unwrap()]).unwrap();
        c.push(vec![Gate::cx(0, 1).unwrap()]).unwrap();
        c.push(vec![Gate::x(1)]).unwrap();
        // Bell state: ⟨XX⟩ = 1 ideally; qubit 0 idles during the X layer.
        let xx = PauliString::parse("XX").unwrap();
        let cfg = PecConfig { samples: 3000, shots_per_sample: 20, seed: 11, ..PecConfig::default() };
        let r = pec_expectation(&c, &xx, &nm, &cfg, &Executor::new()).unwrap();
        assert!(r.gamma > 1.0);
        assert!((r.estimate.mean - 1.0).abs() < 3.0 * r.estimate.std_err, "{:?}", r.estimate);
    }
}
