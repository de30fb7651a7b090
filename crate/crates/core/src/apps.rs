//! Application circuits, normalized fidelity and the volume-fidelity fit.
//!
//! The normalized fidelity rescales the Hellinger fidelity so that the
//! uniform distribution scores 0 and the ideal one scores 1:
//!
//! ```
//! use qbench::apps::normalized_fidelity;
//!
//! let ideal = [0.0, 0.0, 1.0, 0.0];
//! assert_eq!(normalized_fidelity(&ideal, &ideal).unwrap().fidelity, 1.0);
//! assert_eq!(normalized_fidelity(&ideal, &[0.25; 4]).unwrap().fidelity, 0.0);
//! ```

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate, Layer};
use crate::error::{invalid, Error, Result};
use crate::fit;
use crate::linalg;
use crate::opt::{calibrate, mitigate_measurement, project_to_simplex, Manifest, OverheadLedger, Pipeline};
use crate::rng::{self, Rng};
use crate::sim::{simulate_ideal, Confusion, CountsDistribution, Executor, NoiseModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    BernsteinVazirani,
    HiddenShift,
    HamiltonianSimulation,
    Ghz,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::BernsteinVazirani,
        Algorithm::HiddenShift,
        Algorithm::HamiltonianSimulation,
        Algorithm::Ghz,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::BernsteinVazirani => "bernstein-vazirani",
            Algorithm::HiddenShift => "hidden-shift",
            Algorithm::HamiltonianSimulation => "hamiltonian-simulation",
            Algorithm::Ghz => "ghz",
        }
    }

    /// Whether `n` is a valid problem size.
    pub fn supports(self, n: usize) -> bool {
        match self {
            Algorithm::BernsteinVazirani => n >= 1,
            Algorithm::HiddenShift => n >= 2 && n.is_multiple_of(2),
            Algorithm::HamiltonianSimulation | Algorithm::Ghz => n >= 2,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "bv" | "bernstein-vazirani" => Ok(Algorithm::BernsteinVazirani),
            "hs" | "hidden-shift" => Ok(Algorithm::HiddenShift),
            "hamsim" | "hamiltonian-simulation" => Ok(Algorithm::HamiltonianSimulation),
            "ghz" => Ok(Algorithm::Ghz),
            other => Err(Error::Unknown {
                what: "algorithm",
                name: other.to_string(),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppSpec {
    pub algorithm: Algorithm,
    /// Problem size: secret or shift length, spin count, GHZ width.
    pub n: usize,
    pub n_circs: usize,
    /// Angle draws per circuit; only Hamiltonian simulation has angles.
    pub n_params: usize,
    pub seed: u64,
}

impl AppSpec {
    pub fn new(algorithm: Algorithm, n: usize, n_circs: usize, seed: u64) -> Self {
        AppSpec {
            algorithm,
            n,
            n_circs,
            n_params: 1,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_circs < 1 || self.n_params < 1 {
            return Err(invalid("ncircs", "at least one circuit and one parameter draw"));
        }
        if !self.algorithm.supports(self.n) {
            return Err(invalid("sizes", format!("{} does not support n = {}", self.algorithm, self.n)));
        }
        Ok(())
    }
}

/// One generated application circuit with its ideal output distribution
/// over `measured` (bit `k` of the distribution is qubit `measured[k]`).
#[derive(Clone, Debug)]
pub struct AppInstance {
    pub algorithm: Algorithm,
    pub circuit: Circuit,
    pub measured: Vec<usize>,
    pub ideal: Vec<f64>,
}

/// As-soon-as-possible layering of a gate sequence.
struct Builder {
    circuit: Circuit,
    frontier: Vec<usize>,
}

impl Builder {
    fn new(width: usize) -> Self {
        Builder {
            circuit: Circuit::new(width),
            frontier: vec![0; width],
        }
    }

    fn add(&mut self, g: Gate) {
        let layer = g.targets.iter().map(|&q| self.frontier[q]).max().unwrap_or(0);
        let layers = self.circuit.layers_mut();
        while layers.len() <= layer {
            layers.push(Layer::default());
        }
        for &q in &g.targets {
            self.frontier[q] = layer + 1;
        }
        layers[layer].gates_mut().push(g);
    }

    fn h(&mut self, q: usize) {
        self.add(Gate::u1q(linalg::hadamard(), q).expect("unitary"));
    }

    fn cz(&mut self, a: usize, b: usize) {
        self.add(Gate::su4(linalg::cz(), a, b).expect("unitary"));
    }

    fn finish(self) -> Circuit {
        self.circuit
    }
}

fn peaked(bits: &[bool]) -> Vec<f64> {
    let index = bits.iter().enumerate().map(|(i, &b)| (b as usize) << i).sum::<usize>();
    let mut p = vec![0.0; 1 << bits.len()];
    p[index] = 1.0;
    p
}

/// Bernstein–Vazirani for `secret` on `secret.len() + 1` qubits; the last
/// qubit is the phase-kickback ancilla and ends in `|0⟩`.
pub fn bernstein_vazirani(secret: &[bool]) -> Circuit {
    let n = secret.len();
    let mut b = Builder::new(n + 1);
    b.add(Gate::x(n));
    for q in 0..=n {
        b.h(q);
    }
    for (q, _) in secret.iter().enumerate().filter(|(_, &s)| s) {
        b.add(Gate::cx(q, n).expect("distinct qubits"));
    }
    for q in 0..=n {
        b.h(q);
    }
    b.add(Gate::x(n));
    b.finish()
}

/// Hidden shift of the inner-product bent function; outputs `shift`.
pub fn hidden_shift(shift: &[bool]) -> Result<Circuit> {
    let n = shift.len();
    if n < 2 || !n.is_multiple_of(2) {
        return Err(invalid("sizes", "hidden shift needs an even number of qubits"));
    }
    let mut b = Builder::new(n);
    let flip = |b: &mut Builder| {
        for (q, _) in shift.iter().enumerate().filter(|(_, &s)| s) {
            b.add(Gate::x(q));
        }
    };
    let oracle = |b: &mut Builder| {
        for q in (0..n).step_by(2) {
            b.cz(q, q + 1);
        }
    };
    (0..n).for_each(|q| b.h(q));
    flip(&mut b);
    oracle(&mut b);
    flip(&mut b);
    (0..n).for_each(|q| b.h(q));
    oracle(&mut b);
    (0..n).for_each(|q| b.h(q));
    Ok(b.finish())
}

/// Trotter steps of the transverse-field Ising chain
/// `H = Σ J_i Z_i Z_{i+1} + Σ h_i X_i` with time step `dt`.
pub fn ising_trotter(couplings: &[f64], fields: &[f64], dt: f64, steps: usize) -> Result<Circuit> {
    let n = fields.len();
    if n < 2 || couplings.len() != n - 1 {
        return Err(invalid("sizes", "Ising chain needs n ≥ 2 fields and n − 1 couplings"));
    }
    let mut b = Builder::new(n);
    for _ in 0..steps {
        for (q, &h) in fields.iter().enumerate() {
            b.add(Gate::u1q(linalg::rx(2.0 * h * dt), q)?);
        }
        for parity in [0, 1] {
            for q in (parity..n - 1).step_by(2) {
                b.add(Gate::su4(linalg::zz(2.0 * couplings[q] * dt), q, q + 1)?);
            }
        }
    }
    Ok(b.finish())
}

pub fn ghz(n: usize) -> Result<Circuit> {
    if n < 2 {
        return Err(invalid("sizes", "GHZ needs at least two qubits"));
    }
    let mut b = Builder::new(n);
    b.h(0);
    for q in 0..n - 1 {
        b.add(Gate::cx(q, q + 1)?);
    }
    Ok(b.finish())
}

const TROTTER_STEPS: usize = 2;
const TROTTER_DT: f64 = 0.5;

fn random_bits(n: usize, rng: &mut Rng) -> Vec<bool> {
    (0..n).map(|_| rng.random_bool(0.5)).collect()
}

/// `n_circs × n_params` instances of one algorithm.
pub fn generate_app_circuits(spec: &AppSpec, rng: &mut Rng) -> Result<Vec<AppInstance>> {
    spec.validate()?;
    let n = spec.n;
    let mut out = Vec::new();
    for _ in 0..spec.n_circs {
        match spec.algorithm {
            Algorithm::BernsteinVazirani => {
                let secret = random_bits(n, rng);
                out.push(AppInstance {
                    algorithm: spec.algorithm,
                    circuit: bernstein_vazirani(&secret),
                    measured: (0..n).collect(),
                    ideal: peaked(&secret),
                });
            }
            Algorithm::HiddenShift => {
                let shift = random_bits(n, rng);
                out.push(AppInstance {
                    algorithm: spec.algorithm,
                    circuit: hidden_shift(&shift)?,
                    measured: (0..n).collect(),
                    ideal: peaked(&shift),
                });
            }
            Algorithm::HamiltonianSimulation => {
                for _ in 0..spec.n_params {
                    let j: Vec<f64> = (0..n - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let h: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let circuit = ising_trotter(&j, &h, TROTTER_DT, TROTTER_STEPS)?;
                    let ideal = simulate_ideal(&circuit)?;
                    out.push(AppInstance {
                        algorithm: spec.algorithm,
                        circuit,
                        measured: (0..n).collect(),
                        ideal,
                    });
                }
            }
            Algorithm::Ghz => {
                let circuit = ghz(n)?;
                let mut ideal = vec![0.0; 1 << n];
                ideal[0] = 0.5;
                ideal[(1 << n) - 1] = 0.5;
                out.push(AppInstance {
                    algorithm: spec.algorithm,
                    circuit,
                    measured: (0..n).collect(),
                    ideal,
                });
            }
        }
    }
    Ok(out)
}

fn check_distribution(p: &[f64]) -> Result<()> {
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 || p.iter().any(|&x| x < -1e-12) {
        return Err(Error::NotNormalized { total });
    }
    Ok(())
}

/// `(Σ_x √(P_A(x) P_B(x)))²` of two distributions over the same outcomes.
pub fn hellinger_fidelity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::WidthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    check_distribution(a)?;
    check_distribution(b)?;
    let overlap: f64 = a.iter().zip(b).map(|(x, y)| (x.max(0.0) * y.max(0.0)).sqrt()).sum();
    Ok(overlap * overlap)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityResult {
    pub hellinger: f64,
    pub raw: f64,
    /// `max(raw, 0)`.
    pub fidelity: f64,
}

/// Hellinger fidelity rescaled against the uniform distribution.
pub fn normalized_fidelity(ideal: &[f64], output: &[f64]) -> Result<FidelityResult> {
    let hellinger = hellinger_fidelity(ideal, output)?;
    let uniform = vec![1.0 / ideal.len() as f64; ideal.len()];
    let floor = hellinger_fidelity(ideal, &uniform)?;
    if (1.0 - floor).abs() < 1e-12 {
        return Err(Error::Degenerate("ideal distribution is uniform".into()));
    }
    let raw = (hellinger - floor) / (1.0 - floor);
    Ok(FidelityResult {
        hellinger,
        raw,
        fidelity: raw.max(0.0),
    })
}

/// Drop outcomes seen in fewer than `threshold · shots` shots.
///
/// This post-selects on the observed output and is never part of a
/// benchmark; runs that use it are reported as gaming demonstrations.
pub fn filter_low_frequency(counts: &CountsDistribution, threshold: f64) -> Result<CountsDistribution> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(invalid("threshold", "must lie in [0, 1]"));
    }
    let shots = counts.shots() as f64;
    let kept: Vec<(&str, u64)> = counts
        .counts()
        .iter()
        .filter(|(_, &c)| c as f64 / shots >= threshold)
        .map(|(s, &c)| (s.as_str(), c))
        .collect();
    if kept.iter().all(|&(_, c)| c == 0) {
        return Err(Error::EmptyDistribution);
    }
    CountsDistribution::from_pairs(counts.width(), kept)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub shots: u64,
    /// log₂ of the reference quantum volume used to normalize circuit size.
    pub qv_log2: usize,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            shots: 1000,
            qv_log2: 4,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppPoint {
    pub algorithm: Algorithm,
    pub n: usize,
    pub instances: usize,
    pub f_mean: f64,
    pub f_std: f64,
    /// Standard error of `f_mean`.
    pub f_sem: f64,
    /// Mean of width × depth over instances, divided by `qv_log2²`.
    pub normalized_volume: f64,
    pub fidelities: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumePoint {
    pub x: f64,
    pub y: f64,
    pub pipeline: String,
}

#[derive(Clone, Debug)]
pub struct SuiteRun {
    pub points: Vec<AppPoint>,
    pub volume_points: Vec<VolumePoint>,
    pub manifest: Manifest,
    pub ledger: OverheadLedger,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Run every spec under `nm` through `pipeline` and average the normalized
/// fidelity per (algorithm, n).
pub fn run_suite(
    specs: &[AppSpec],
    nm: &NoiseModel,
    pipeline: &Pipeline,
    executor: &Executor,
    cfg: &SuiteConfig,
) -> Result<SuiteRun> {
    if pipeline.has("pec") {
        return Err(Error::Inapplicable {
            technique: "pec".into(),
            reason: "application fidelities are computed from full output distributions, not expectation values".into(),
        });
    }
    if cfg.shots == 0 || cfg.qv_log2 == 0 {
        return Err(invalid("apps", "shots and qv_log2 must be positive"));
    }
    let before = executor.stats();
    let mut ledger = OverheadLedger::new();
    let generated: Vec<Vec<AppInstance>> = specs
        .iter()
        .map(|s| generate_app_circuits(s, &mut rng::child(s.seed, rng::CIRCUITS, s.n as u64)))
        .collect::<Result<_>>()?;

    let calibration: Option<Vec<Confusion>> = if pipeline.has("mmit") {
        let widest = generated.iter().flatten().map(|i| i.circuit.width()).max().unwrap_or(1);
        let width = nm.device_qubits().max(widest);
        let seed = rng::derive_seed(cfg.seed, rng::CALIBRATION, 0);
        let cal = calibrate(executor, nm, width, cfg.shots, seed)?;
        ledger.record("mmit", 2, 2 * cfg.shots);
        Some(cal)
    } else {
        None
    };

    let volume = (cfg.qv_log2 * cfg.qv_log2) as f64;
    let mut points = Vec::new();
    let mut volume_points = Vec::new();
    for (si, (spec, instances)) in specs.iter().zip(&generated).enumerate() {
        let mut fidelities = Vec::with_capacity(instances.len());
        let mut size = 0.0;
        for (k, inst) in instances.iter().enumerate() {
            let prepared = pipeline.prepare(&inst.circuit, nm)?;
            let seed = rng::derive_seed(cfg.seed, rng::SHOTS, ((si as u64) << 32) | k as u64);
            let counts = executor.run(&prepared.circuit, &prepared.noise, cfg.shots, seed)?;
            ledger.record_base(1, cfg.shots);
            let mut observed = counts.marginal(&inst.measured)?;
            if let Some(t) = pipeline.filter_threshold() {
                observed = filter_low_frequency(&observed, t)?;
            }
            let output = match &calibration {
                Some(cal) => {
                    let conf: Vec<Confusion> = inst.measured.iter().map(|&v| cal[prepared.physical[v]]).collect();
                    project_to_simplex(&mitigate_measurement(&observed, &conf)?)
                }
                None => observed.probabilities()?,
            };
            fidelities.push(normalized_fidelity(&inst.ideal, &output)?.fidelity);
            size += (inst.circuit.width() * inst.circuit.depth()) as f64;
        }
        let (f_mean, f_std) = mean_std(&fidelities);
        let normalized_volume = size / instances.len() as f64 / volume;
        volume_points.push(VolumePoint {
            x: normalized_volume,
            y: f_mean,
            pipeline: pipeline.to_string(),
        });
        points.push(AppPoint {
            algorithm: spec.algorithm,
            n: spec.n,
            instances: fidelities.len(),
            f_mean,
            f_std,
            f_sem: f_std / (fidelities.len() as f64).sqrt(),
            normalized_volume,
            fidelities,
        });
    }
    let after = executor.stats();
    ledger.reconcile(&crate::sim::ExecutionStats {
        circuits: after.circuits - before.circuits,
        shots: after.shots - before.shots,
    })?;
    Ok(SuiteRun {
        points,
        volume_points,
        manifest: pipeline.manifest(),
        ledger,
    })
}

/// Base of the logistic curve. The base and the rate `d` enter only as
/// `d · ln c`, so one of them has to be fixed.
pub const LOGISTIC_BASE: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub residual: f64,
    pub converged: bool,
    /// The data carry no decay to fit.
    pub degenerate: bool,
}

impl LogisticFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.a / (1.0 + self.b * self.c.powf(-self.d * x))
    }
}

/// Least-squares fit of `y = a / (1 + b·c^(−d·x))` with `c` fixed to
/// [`LOGISTIC_BASE`], by multi-start Levenberg–Marquardt.
pub fn fit_logistic(points: &[(f64, f64)]) -> Result<LogisticFit> {
    fit_logistic_with_base(points, LOGISTIC_BASE)
}

pub fn fit_logistic_with_base(points: &[(f64, f64)], c: f64) -> Result<LogisticFit> {
    if points.len() < 8 {
        return Err(invalid("points", format!("need at least 8 points, got {}", points.len())));
    }
    if !(c > 0.0 && c != 1.0) {
        return Err(invalid("base", "must be positive and not 1"));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|p, q| p.0.total_cmp(&q.0));
    let xs: Vec<f64> = sorted.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = sorted.iter().map(|p| p.1).collect();
    let (lo, hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &y| (l.min(y), h.max(y)));
    if hi - lo < 1e-12 {
        return Ok(LogisticFit {
            a: hi,
            b: 0.0,
            c,
            d: 0.0,
            residual: 0.0,
            converged: true,
            degenerate: true,
        });
    }
    let ln_c = c.ln();
    let model = move |p: &[f64], x: f64| {
        let (a, b, d) = (p[0], p[1], p[2]);
        let e = (-d * x * ln_c).exp();
        let den = 1.0 + b * e;
        let y = a / den;
        (y, vec![1.0 / den, -a * e / (den * den), a * b * e * x * ln_c / (den * den)])
    };

    // Log-slope of the first three points gives the initial decay rate.
    let head: Vec<(f64, f64)> = xs.iter().zip(&ys).take(3).filter(|(_, &y)| y > 0.0).map(|(&x, &y)| (x, y.ln())).collect();
    let slope = if head.len() >= 2 {
        let (mx, my) = (
            head.iter().map(|p| p.0).sum::<f64>() / head.len() as f64,
            head.iter().map(|p| p.1).sum::<f64>() / head.len() as f64,
        );
        let sxx: f64 = head.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = head.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if sxx > 0.0 { sxy / sxx } else { 0.0 }
    } else {
        0.0
    };
    let mut d0 = vec![slope / ln_c, -0.3, -1.0, -3.0, 0.3, 1.0];
    d0.retain(|d| d.is_finite());
    let mut starts = Vec::new();
    for &b in &[0.01, 0.1, 1.0, 10.0] {
        for &d in &d0 {
            starts.push(vec![hi, b, d]);
        }
    }
    let best = fit::fit_multistart(&model, &starts, &xs, &ys)
        .ok_or_else(|| Error::Fit("no starting point produced a finite fit".into()))?;
    Ok(LogisticFit {
        a: best.params[0],
        b: best.params[1],
        c,
        d: best.params[2],
        residual: best.residual,
        converged: best.converged,
        degenerate: false,
    })
}

/// Table III style counts: `(bitstring, count)` pairs.
pub fn counts_from_table(width: usize, rows: &[(&str, u64)]) -> Result<CountsDistribution> {
    CountsDistribution::from_pairs(width, rows.iter().copied())
}
