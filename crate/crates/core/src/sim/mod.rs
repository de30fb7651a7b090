//! Statevector simulation and Monte-Carlo noise trajectories.
//!
//! Ideal simulation returns exact Born probabilities. Noisy execution draws
//! one Pauli trajectory per shot (see [`sample_noisy`]); the deterministic
//! part of the evolution is simulated once per circuit and reused for every
//! shot that draws no stochastic error.

mod counts;
mod noise;
pub(crate) mod trajectory;

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

pub use counts::{bitstring, parse_bitstring, CountsDistribution};
pub use noise::{Confusion, Durations, EdgeError, NoiseModel, PRESETS};
pub use trajectory::{deterministic_probabilities, sample_noisy};

use crate::circuit::{Circuit, Gate, GateKind};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat2, Mat4, C64};
use crate::rng::Rng;

/// Widest circuit simulated exactly.
pub const DEFAULT_WIDTH_CAP: usize = 14;

#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    width: usize,
    amps: Vec<C64>,
}

impl Statevector {
    /// `|0…0⟩` on `width` qubits.
    pub fn zero(width: usize) -> Self {
        let mut amps = vec![linalg::ZERO; 1 << width];
        amps[0] = linalg::ONE;
        Statevector { width, amps }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn apply_1q(&mut self, q: usize, m: &Mat2) {
        let stride = 1 << q;
        for base in (0..self.amps.len()).step_by(2 * stride) {
            for i in base..base + stride {
                let (a, b) = (self.amps[i], self.amps[i + stride]);
                self.amps[i] = m[0][0] * a + m[0][1] * b;
                self.amps[i + stride] = m[1][0] * a + m[1][1] * b;
            }
        }
    }

    /// Apply a two-qubit matrix; `a` is the high bit of the 4×4 basis index.
    pub fn apply_2q(&mut self, a: usize, b: usize, m: &Mat4) {
        let (ma, mb) = (1usize << a, 1usize << b);
        for i in 0..self.amps.len() {
            if i & (ma | mb) != 0 {
                continue;
            }
            let idx = [i, i | mb, i | ma, i | ma | mb];
            let v = idx.map(|k| self.amps[k]);
            for (r, &k) in idx.iter().enumerate() {
                self.amps[k] = m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2] + m[r][3] * v[3];
            }
        }
    }

    /// `Rz(angle)` on qubit `q`.
    pub fn apply_rz(&mut self, q: usize, angle: f64) {
        if angle == 0.0 {
            return;
        }
        let (lo, hi) = (C64::from_polar(1.0, -angle / 2.0), C64::from_polar(1.0, angle / 2.0));
        let mask = 1 << q;
        for (i, amp) in self.amps.iter_mut().enumerate() {
            *amp *= if i & mask == 0 { lo } else { hi };
        }
    }

    /// Pauli by code (1 = X, 2 = Y, 3 = Z) on qubit `q`.
    pub fn apply_pauli(&mut self, q: usize, code: u8) {
        let mask = 1 << q;
        match code {
            1 => {
                for i in 0..self.amps.len() {
                    if i & mask == 0 {
                        self.amps.swap(i, i | mask);
                    }
                }
            }
            2 => {
                for i in 0..self.amps.len() {
                    if i & mask == 0 {
                        let (a, b) = (self.amps[i], self.amps[i | mask]);
                        self.amps[i] = -linalg::I * b;
                        self.amps[i | mask] = linalg::I * a;
                    }
                }
            }
            3 => {
                for (i, amp) in self.amps.iter_mut().enumerate() {
                    if i & mask != 0 {
                        *amp = -*amp;
                    }
                }
            }
            _ => {}
        }
    }

    /// Apply the ideal action of one gate.
    pub fn apply_gate(&mut self, g: &Gate) -> Result<()> {
        match &g.kind {
            GateKind::Param(slot) => return Err(Error::UnboundSlot { slot: *slot }),
            GateKind::Measure | GateKind::Barrier | GateKind::Echo => {}
            GateKind::X => self.apply_pauli(g.targets[0], 1),
            GateKind::U1q(m) => self.apply_1q(g.targets[0], m),
            GateKind::Su4(m) => self.apply_2q(g.targets[0], g.targets[1], m),
            GateKind::Cx => self.apply_2q(g.targets[0], g.targets[1], &linalg::cx()),
        }
        Ok(())
    }
}

/// Reject circuits that use a qubit after measuring it.
pub(crate) fn check_terminal_measures(c: &Circuit) -> Result<()> {
    let mut measured = vec![false; c.width()];
    for g in c.gates() {
        match g.kind {
            GateKind::Measure => measured[g.targets[0]] = true,
            _ => {
                if let Some(&q) = g.targets.iter().find(|&&q| measured[q]) {
                    return Err(Error::MidCircuitMeasure { qubit: q });
                }
            }
        }
    }
    Ok(())
}

fn check_width(c: &Circuit, cap: usize) -> Result<()> {
    if c.width() > cap {
        return Err(Error::WidthOverCap { width: c.width(), cap });
    }
    Ok(())
}

/// Final statevector of the ideal circuit.
pub fn simulate_statevector(c: &Circuit) -> Result<Statevector> {
    check_width(c, DEFAULT_WIDTH_CAP)?;
    check_terminal_measures(c)?;
    let mut psi = Statevector::zero(c.width());
    for g in c.gates() {
        psi.apply_gate(g)?;
    }
    Ok(psi)
}

/// Exact Born probabilities over the `2^m` basis states.
pub fn simulate_ideal(c: &Circuit) -> Result<Vec<f64>> {
    simulate_ideal_with_cap(c, DEFAULT_WIDTH_CAP)
}

pub fn simulate_ideal_with_cap(c: &Circuit, cap: usize) -> Result<Vec<f64>> {
    check_width(c, cap)?;
    check_terminal_measures(c)?;
    let mut psi = Statevector::zero(c.width());
    for g in c.gates() {
        psi.apply_gate(g)?;
    }
    Ok(psi.probabilities())
}

/// Totals of everything executed on an [`Executor`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionStats {
    pub circuits: u64,
    pub shots: u64,
}

/// The simulated device front end: runs circuits under a noise model and
/// counts every circuit and shot it executes.
#[derive(Debug)]
pub struct Executor {
    cap: usize,
    circuits: AtomicU64,
    shots: AtomicU64,
}

impl Default for Executor {
    fn default() -> Self {
        Executor::new()
    }
}

impl Executor {
    pub fn new() -> Self {
        Executor::with_cap(DEFAULT_WIDTH_CAP)
    }

    pub fn with_cap(cap: usize) -> Self {
        Executor {
            cap,
            circuits: AtomicU64::new(0),
            shots: AtomicU64::new(0),
        }
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// Run `shots` noisy shots with a stream derived from `seed`.
    pub fn run(&self, c: &Circuit, nm: &NoiseModel, shots: u64, seed: u64) -> Result<CountsDistribution> {
        check_width(c, self.cap)?;
        let counts = sample_noisy(c, nm, shots, &mut crate::rng::stream(seed))?;
        self.circuits.fetch_add(1, Ordering::Relaxed);
        self.shots.fetch_add(shots, Ordering::Relaxed);
        Ok(counts)
    }

    pub fn stats(&self) -> ExecutionStats {
        ExecutionStats {
            circuits: self.circuits.load(Ordering::Relaxed),
            shots: self.shots.load(Ordering::Relaxed),
        }
    }
}

/// A Pauli observable, one character per qubit from `{I, X, Y, Z}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PauliString(Vec<u8>);

impl PauliString {
    pub fn parse(s: &str) -> Result<Self> {
        let codes = s
            .chars()
            .map(|ch| match ch.to_ascii_uppercase() {
                'I' => Ok(0),
                'X' => Ok(1),
                'Y' => Ok(2),
                'Z' => Ok(3),
                _ => Err(Error::MalformedObservable(s.to_string())),
            })
            .collect::<Result<Vec<_>>>()?;
        if codes.is_empty() {
            return Err(Error::MalformedObservable(s.to_string()));
        }
        Ok(PauliString(codes))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn codes(&self) -> &[u8] {
        &self.0
    }

    /// `c` followed by the single-qubit rotations that map the observable's
    /// eigenbasis to the computational basis.
    pub fn measurement_circuit(&self, c: &Circuit) -> Result<Circuit> {
        if self.len() != c.width() {
            return Err(Error::MalformedObservable(format!(
                "observable acts on {} qubits, circuit has {}",
                self.len(),
                c.width()
            )));
        }
        let mut out = c.clone();
        let h = linalg::hadamard();
        let sdg = [[linalg::ONE, linalg::ZERO], [linalg::ZERO, -linalg::I]];
        let gates: Vec<Gate> = self
            .0
            .iter()
            .enumerate()
            .filter_map(|(q, &p)| match p {
                1 => Some(Gate::u1q(h, q)),
                2 => Some(Gate::u1q(linalg::matmul(&h, &sdg), q)),
                _ => None,
            })
            .collect::<Result<_>>()?;
        if !gates.is_empty() {
            out.push(gates)?;
        }
        Ok(out)
    }

    /// ±1 eigenvalue of a computational-basis outcome.
    pub fn eigenvalue(&self, index: usize) -> f64 {
        let parity = self
            .0
            .iter()
            .enumerate()
            .filter(|(q, &p)| p != 0 && (index >> q) & 1 == 1)
            .count();
        if parity % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

impl Estimate {
    /// Mean and `std / √n` of a sample.
    pub fn from_samples(values: &[f64]) -> Estimate {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Estimate {
            mean,
            std_err: (var / n).sqrt(),
        }
    }
}

/// Estimate `⟨observable⟩` from noisy shots.
pub fn expectation(
    c: &Circuit,
    observable: &PauliString,
    nm: &NoiseModel,
    shots: u64,
    rng: &mut Rng,
) -> Result<Estimate> {
    let counts = sample_noisy(&observable.measurement_circuit(c)?, nm, shots, rng)?;
    Ok(estimate_from_counts(observable, &counts))
}

pub(crate) fn estimate_from_counts(observable: &PauliString, counts: &CountsDistribution) -> Estimate {
    let n = counts.shots() as f64;
    let (mut s1, mut s2) = (0.0, 0.0);
    for (i, c) in counts.indexed() {
        let v = observable.eigenvalue(i);
        s1 += v * c as f64;
        s2 += v * v * c as f64;
    }
    let mean = s1 / n;
    let var = if n > 1.0 { (s2 - n * mean * mean).max(0.0) / (n - 1.0) } else { 0.0 };
    Estimate {
        mean,
        std_err: (var / n).sqrt(),
    }
}
