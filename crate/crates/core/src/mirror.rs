//! Mirror circuits: a random circuit followed by its inverse, so the ideal
//! output is one known bitstring at any width.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{compose, haar_su2, inverse_with, qv_layer, Circuit, Gate, InverseStyle, Layer};
use crate::error::{invalid, Error, Result};
use crate::fit;
use crate::linalg;
use crate::opt::{Manifest, OverheadLedger, Pipeline};
use crate::rng::{self, Rng};
use crate::sim::{CountsDistribution, ExecutionStats, Executor, NoiseModel};

/// Hamming-distance histogram `h_k` of outcomes relative to `target`.
pub fn hamming_histogram(counts: &CountsDistribution, target: &str) -> Result<Vec<f64>> {
    let n = counts.width();
    if target.len() != n {
        return Err(Error::WidthMismatch {
            left: target.len(),
            right: n,
        });
    }
    let t = crate::sim::parse_bitstring(target)?;
    let mut h = vec![0.0; n + 1];
    for (i, c) in counts.indexed() {
        h[(i ^ t).count_ones() as usize] += c as f64;
    }
    let shots = counts.shots() as f64;
    h.iter_mut().for_each(|x| *x /= shots);
    Ok(h)
}

/// `s = 4ⁿ/(4ⁿ−1) · Σ_k (−1/2)^k h_k − 1/(4ⁿ−1)`.
///
/// ```
/// use qbench::mirror::polarization_from_histogram;
///
/// assert!((polarization_from_histogram(&[0.75, 0.25]) - 0.5).abs() < 1e-12);
/// assert_eq!(polarization_from_histogram(&[1.0, 0.0, 0.0]), 1.0);
/// ```
pub fn polarization_from_histogram(h: &[f64]) -> f64 {
    let n = h.len() as i32 - 1;
    let four_n = 4f64.powi(n);
    let weighted: f64 = h.iter().enumerate().map(|(k, &x)| (-0.5f64).powi(k as i32) * x).sum();
    four_n / (four_n - 1.0) * weighted - 1.0 / (four_n - 1.0)
}

pub fn effective_polarization(counts: &CountsDistribution, target: &str) -> Result<f64> {
    Ok(polarization_from_histogram(&hamming_histogram(counts, target)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MirrorOutcome {
    /// Fraction of shots equal to the target.
    pub success: f64,
    pub hamming: Vec<f64>,
    pub polarization: f64,
}

impl MirrorOutcome {
    pub fn from_counts(counts: &CountsDistribution, target: &str) -> Result<Self> {
        let hamming = hamming_histogram(counts, target)?;
        Ok(MirrorOutcome {
            success: hamming[0],
            polarization: polarization_from_histogram(&hamming),
            hamming,
        })
    }
}

/// A random Pauli layer and the bitstring it flips `|0…0⟩` to.
fn pauli_twirl(m: usize, rng: &mut Rng) -> Result<(Layer, String)> {
    let mut gates = Vec::new();
    let mut target = String::with_capacity(m);
    for q in 0..m {
        let code: u8 = rng.random_range(0..4);
        target.push(if matches!(code, 1 | 2) { '1' } else { '0' });
        if code != 0 {
            gates.push(Gate::u1q(linalg::pauli(code), q)?);
        }
    }
    Ok((Layer::new(gates)?, target))
}

/// Mirror quantum volume circuit: `⌈m/2⌉` model layers, a barrier, and
/// their sign-flipped inverse. Depth is `m` for even `m`, `m + 1` for odd.
/// The target is all zeros.
///
/// ```
/// use qbench::mirror::mirror_qv_circuit;
/// use qbench::rng::stream;
///
/// let (c, target) = mirror_qv_circuit(5, &mut stream(1)).unwrap();
/// assert_eq!(c.depth(), 6);
/// assert_eq!(target, "00000");
/// ```
pub fn mirror_qv_circuit(m: usize, rng: &mut Rng) -> Result<(Circuit, String)> {
    mirror_qv_circuit_with(m, InverseStyle::default(), rng)
}

pub fn mirror_qv_circuit_with(m: usize, style: InverseStyle, rng: &mut Rng) -> Result<(Circuit, String)> {
    if m < 2 {
        return Err(invalid("width", "mirror circuits need at least 2 qubits"));
    }
    let mut half = Circuit::new(m);
    for _ in 0..m.div_ceil(2) {
        half.push_layer(qv_layer(m, rng))?;
    }
    let c = compose(&half, &inverse_with(&half, style)?, true)?;
    Ok((c, "0".repeat(m)))
}

fn twirled(c: Circuit, target: String, twirl: bool, rng: &mut Rng) -> Result<(Circuit, String)> {
    if !twirl {
        return Ok((c, target));
    }
    let (layer, target) = pauli_twirl(c.width(), rng)?;
    let mut head = Circuit::new(c.width());
    head.push_layer(layer)?;
    Ok((compose(&head, &c, false)?, target))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MirrorQvConfig {
    pub m: usize,
    pub n_c: usize,
    pub n_s: u64,
    pub pauli_twirl: bool,
    pub inverse: InverseStyle,
    pub seed: u64,
}

impl MirrorQvConfig {
    pub fn new(m: usize, seed: u64) -> Self {
        MirrorQvConfig {
            m,
            n_c: 100,
            n_s: 1000,
            pauli_twirl: false,
            inverse: InverseStyle::default(),
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MirrorQvResult {
    pub m: usize,
    pub n_c: usize,
    pub mean_success: f64,
    pub mean_polarization: f64,
    pub success: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct MirrorRun<T> {
    pub result: T,
    pub manifest: Manifest,
    pub ledger: OverheadLedger,
}

fn run_scored(
    circuits: &[(Circuit, String)],
    nm: &NoiseModel,
    pipeline: &Pipeline,
    executor: &Executor,
    shots: u64,
    seed: u64,
) -> Result<Vec<MirrorOutcome>> {
    let filter = pipeline.filter_threshold();
    circuits
        .par_iter()
        .enumerate()
        .map(|(i, (c, target))| {
            let prepared = pipeline.prepare(c, nm)?;
            let mut counts = executor.run(&prepared.circuit, &prepared.noise, shots, rng::derive_seed(seed, rng::SHOTS, i as u64))?;
            if let Some(t) = filter {
                counts = crate::apps::filter_low_frequency(&counts, t)?;
            }
            MirrorOutcome::from_counts(&counts, target)
        })
        .collect()
}

fn reconciled(before: ExecutionStats, executor: &Executor, circuits: u64, shots: u64) -> Result<OverheadLedger> {
    let mut ledger = OverheadLedger::new();
    ledger.record_base(circuits, circuits * shots);
    let after = executor.stats();
    ledger.reconcile(&ExecutionStats {
        circuits: after.circuits - before.circuits,
        shots: after.shots - before.shots,
    })?;
    Ok(ledger)
}

/// Mean success probability of `n_c` mirror circuits. Uses the same rule
/// gate as quantum volume.
pub fn run_mirror_qv(
    cfg: &MirrorQvConfig,
    nm: &NoiseModel,
    pipeline: &Pipeline,
    executor: &Executor,
) -> Result<MirrorRun<MirrorQvResult>> {
    crate::qv::check_rules(pipeline)?;
    if cfg.n_c < 1 || cfg.n_s < 1 {
        return Err(invalid("circuits", "n_c and n_s must be positive"));
    }
    let before = executor.stats();
    let circuits: Vec<(Circuit, String)> = (0..cfg.n_c)
        .map(|i| {
            let mut rng = rng::child(cfg.seed, rng::CIRCUITS, i as u64);
            let (c, t) = mirror_qv_circuit_with(cfg.m, cfg.inverse, &mut rng)?;
            twirled(c, t, cfg.pauli_twirl, &mut rng)
        })
        .collect::<Result<_>>()?;
    let outcomes = run_scored(&circuits, nm, pipeline, executor, cfg.n_s, cfg.seed)?;
    let ledger = reconciled(before, executor, cfg.n_c as u64, cfg.n_s)?;
    let n = outcomes.len() as f64;
    Ok(MirrorRun {
        result: MirrorQvResult {
            m: cfg.m,
            n_c: cfg.n_c,
            mean_success: outcomes.iter().map(|o| o.success).sum::<f64>() / n,
            mean_polarization: outcomes.iter().map(|o| o.polarization).sum::<f64>() / n,
            success: outcomes.iter().map(|o| o.success).collect(),
        },
        manifest: pipeline.manifest(),
        ledger,
    })
}

/// CX layer on a linear chain: a uniformly random maximal matching of
/// adjacent pairs, each kept with the probability that makes the expected
/// number of CXs `ξ·n/2`.
fn cx_layer(width: usize, density: f64, rng: &mut Rng) -> Result<Layer> {
    let mut pairs = Vec::new();
    let mut q = 0;
    // Random maximal matching: scan the chain, pairing q with q+1 by a coin
    // flip unless forced.
    while q + 1 < width {
        if rng.random_bool(0.5) || q + 2 >= width {
            pairs.push((q, q + 1));
            q += 2;
        } else {
            q += 1;
        }
    }
    let keep = if pairs.is_empty() {
        0.0
    } else {
        (density * width as f64 / (2.0 * pairs.len() as f64)).min(1.0)
    };
    let mut gates = Vec::new();
    for (a, b) in pairs {
        if keep > 0.0 && rng.random_bool(keep) {
            gates.push(if rng.random_bool(0.5) { Gate::cx(a, b)? } else { Gate::cx(b, a)? });
        }
    }
    Layer::new(gates)
}

/// Mirror randomized benchmarking circuit of benchmark depth `depth`
/// (even): `depth/2` layers of Haar SU(2) on every qubit followed by a CX
/// layer of two-qubit density `ξ`, a barrier, then the exact inverse.
pub fn mirror_rb_circuit(width: usize, depth: usize, density: f64, rng: &mut Rng) -> Result<(Circuit, String)> {
    mirror_rb_circuit_with(width, depth, density, InverseStyle::default(), rng)
}

pub fn mirror_rb_circuit_with(
    width: usize,
    depth: usize,
    density: f64,
    style: InverseStyle,
    rng: &mut Rng,
) -> Result<(Circuit, String)> {
    if !(0.0..=0.5).contains(&density) {
        return Err(invalid("density", "two-qubit density must lie in [0, 1/2]"));
    }
    if !depth.is_multiple_of(2) {
        return Err(invalid("depth", "mirror RB depth must be even"));
    }
    if width < 1 {
        return Err(invalid("width", "must be positive"));
    }
    let mut half = Circuit::new(width);
    for _ in 0..depth / 2 {
        half.push((0..width).map(|q| Gate::u1q(haar_su2(rng), q)).collect::<Result<_>>()?)?;
        half.push_layer(cx_layer(width, density, rng)?)?;
    }
    let c = compose(&half, &inverse_with(&half, style)?, true)?;
    Ok((c, "0".repeat(width)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MirrorRbConfig {
    pub widths: Vec<usize>,
    /// Benchmark depths (even): forward plus mirrored composite layers.
    pub depths: Vec<usize>,
    pub density: f64,
    pub circuits: usize,
    pub shots: u64,
    pub pauli_twirl: bool,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbPoint {
    pub width: usize,
    pub depth: usize,
    /// Mean effective polarization.
    pub s: f64,
    pub s_sem: f64,
    pub success: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MirrorRbFit {
    pub width: usize,
    pub amplitude: f64,
    pub p: f64,
    pub eps_layer: f64,
    pub eps_qubit: f64,
    pub residual: f64,
    /// All polarizations equal: no decay to fit, `p` reported as 1.
    pub degenerate: bool,
}

/// Fit `s(d) = A·p^d` and convert to error per layer and per qubit:
/// `ε_L = (4ⁿ−1)/4ⁿ · (1 − p)`, `ε_Q = 1 − (1 − ε_L)^(1/n)`.
pub fn fit_mirror_rb(points: &[(usize, f64)], width: usize) -> Result<MirrorRbFit> {
    let mut depths: Vec<usize> = points.iter().map(|p| p.0).collect();
    depths.sort_unstable();
    depths.dedup();
    if depths.len() < 3 {
        return Err(invalid("depths", "need at least 3 distinct depths per width"));
    }
    if width == 0 {
        return Err(invalid("width", "must be positive"));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let four_n = 4f64.powi(width as i32);
    let convert = |amplitude: f64, p: f64, residual: f64, degenerate: bool| {
        let p = p.clamp(0.0, 1.0);
        let eps_layer = (four_n - 1.0) / four_n * (1.0 - p);
        MirrorRbFit {
            width,
            amplitude,
            p,
            eps_layer,
            eps_qubit: 1.0 - (1.0 - eps_layer).powf(1.0 / width as f64),
            residual,
            degenerate,
        }
    };
    let (lo, hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &y| (l.min(y), h.max(y)));
    if hi - lo < 1e-12 {
        return Ok(convert(hi, 1.0, 0.0, true));
    }
    let model = |q: &[f64], d: f64| {
        let v = q[1].powf(d);
        (q[0] * v, vec![v, if d == 0.0 { 0.0 } else { q[0] * d * q[1].powf(d - 1.0) }])
    };
    // Log-linear estimate as the starting point.
    let positive: Vec<(f64, f64)> = xs.iter().zip(&ys).filter(|(_, &y)| y > 0.0).map(|(&x, &y)| (x, y.ln())).collect();
    let mut starts = vec![vec![1.0, 0.99], vec![1.0, 0.9], vec![1.0, 0.5]];
    if positive.len() >= 2 {
        let n = positive.len() as f64;
        let mx = positive.iter().map(|p| p.0).sum::<f64>() / n;
        let my = positive.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = positive.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = positive.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if sxx > 0.0 {
            let slope = sxy / sxx;
            starts.insert(0, vec![(my - slope * mx).exp(), slope.exp().min(1.0)]);
        }
    }
    let best = fit::fit_multistart(&model, &starts, &xs, &ys)
        .ok_or_else(|| Error::Fit("mirror RB decay did not fit".into()))?;
    Ok(convert(best.params[0], best.params[1], best.residual, false))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MirrorRbResult {
    pub points: Vec<RbPoint>,
    pub fits: Vec<MirrorRbFit>,
}

/// Mirror RB over every (width, depth); points sorted by (width, depth).
pub fn run_mirror_rb(
    cfg: &MirrorRbConfig,
    nm: &NoiseModel,
    pipeline: &Pipeline,
    executor: &Executor,
) -> Result<MirrorRun<MirrorRbResult>> {
    crate::qv::check_rules(pipeline)?;
    if cfg.widths.is_empty() || cfg.depths.len() < 3 || cfg.circuits < 1 || cfg.shots < 1 {
        return Err(invalid("mirror-rb", "need widths, at least 3 depths, and positive circuits and shots"));
    }
    let before = executor.stats();
    let mut widths = cfg.widths.clone();
    widths.sort_unstable();
    widths.dedup();
    let mut depths = cfg.depths.clone();
    depths.sort_unstable();
    depths.dedup();
    let mut points = Vec::new();
    let mut fits = Vec::new();
    let mut total = 0u64;
    for &w in &widths {
        let mut per_width = Vec::new();
        for &d in &depths {
            let key = ((w as u64) << 32) | d as u64;
            let seed = rng::derive_seed(cfg.seed, key, 0);
            let circuits: Vec<(Circuit, String)> = (0..cfg.circuits)
                .map(|i| {
                    let mut rng = rng::child(seed, rng::CIRCUITS, i as u64);
                    let (c, t) = mirror_rb_circuit(w, d, cfg.density, &mut rng)?;
                    twirled(c, t, cfg.pauli_twirl, &mut rng)
                })
                .collect::<Result<_>>()?;
            let outcomes = run_scored(&circuits, nm, pipeline, executor, cfg.shots, seed)?;
            total += circuits.len() as u64;
            let s: Vec<f64> = outcomes.iter().map(|o| o.polarization).collect();
            let est = crate::sim::Estimate::from_samples(&s);
            per_width.push((d, est.mean));
            points.push(RbPoint {
                width: w,
                depth: d,
                s: est.mean,
                s_sem: est.std_err,
                success: outcomes.iter().map(|o| o.success).sum::<f64>() / outcomes.len() as f64,
            });
        }
        fits.push(fit_mirror_rb(&per_width, w)?);
    }
    let ledger = reconciled(before, executor, total, cfg.shots)?;
    Ok(MirrorRun {
        result: MirrorRbResult { points, fits },
        manifest: pipeline.manifest(),
        ledger,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::sim::simulate_ideal;

    #[test]
    fn mirror_qv_depths() {
        assert_eq!(mirror_qv_circuit(4, &mut stream(0)).unwrap().0.depth(), 4);
        assert_eq!(mirror_qv_circuit(5, &mut stream(0)).unwrap().0.depth(), 6);
        assert!(mirror_qv_circuit(1, &mut stream(0)).is_err());
    }

    #[test]
    fn noiseless_mirrors_return_target() {
        for seed in 0..5 {
            let mut rng = stream(seed);
            let (c, _) = mirror_qv_circuit(4, &mut rng).unwrap();
            assert!((simulate_ideal(&c).unwrap()[0] - 1.0).abs() < 1e-8);
            let (c, _) = mirror_rb_circuit(3, 6, 0.25, &mut rng).unwrap();
            assert!((simulate_ideal(&c).unwrap()[0] - 1.0).abs() < 1e-8);
            let (c, t) = mirror_qv_circuit(3, &mut rng).unwrap();
            let (c, t) = twirled(c, t, true, &mut rng).unwrap();
            let idx = crate::sim::parse_bitstring(&t).unwrap();
            assert!((simulate_ideal(&c).unwrap()[idx] - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_density_has_no_cx() {
        let (c, _) = mirror_rb_circuit(4, 8, 0.0, &mut stream(1)).unwrap();
        assert_eq!(c.two_qubit_count(), 0);
        assert!(mirror_rb_circuit(4, 8, 0.6, &mut stream(1)).is_err());
        assert!(mirror_rb_circuit(4, 7, 0.25, &mut stream(1)).is_err());
    }

    #[test]
    fn cx_density_matches_expectation() {
        let mut rng = stream(3);
        let layers = 2000;
        let total: usize = (0..layers).map(|_| cx_layer(4, 0.25, &mut rng).unwrap().gates().len()).sum();
        let mean = total as f64 / layers as f64;
        assert!((mean - 0.5).abs() < 0.05, "{mean}");
    }

    #[test]
    fn polarization_examples() {
        let target = CountsDistribution::from_pairs(2, [("00", 100)]).unwrap();
        assert_eq!(effective_polarization(&target, "00").unwrap(), 1.0);
        let uniform = CountsDistribution::from_pairs(2, [("00", 25), ("01", 25), ("10", 25), ("11", 25)]).unwrap();
        assert!(effective_polarization(&uniform, "00").unwrap().abs() < 1e-12);
        assert!(effective_polarization(&uniform, "0").is_err());
    }

    #[test]
    fn fit_synthetic_decay() {
        let pts: Vec<(usize, f64)> = [2, 4, 8, 16, 32].iter().map(|&d| (d, 0.99 * 0.95f64.powi(d as i32))).collect();
        let f = fit_mirror_rb(&pts, 2).unwrap();
        assert!((f.p - 0.95).abs() < 0.005);
        assert!((f.eps_layer - 0.046_875).abs() < 0.004);
        assert!(fit_mirror_rb(&pts[..2], 2).is_err());
        let flat: Vec<(usize, f64)> = [2, 4, 8].iter().map(|&d| (d, 1.0)).collect();
        let f = fit_mirror_rb(&flat, 3).unwrap();
        assert!(f.degenerate && f.eps_layer == 0.0);
    }
}
