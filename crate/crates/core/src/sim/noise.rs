//! The simulated device: stochastic Pauli noise, coherent drift and readout
//! confusion.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-qubit readout confusion: `m[true][reported]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Confusion(pub [[f64; 2]; 2]);

impl Confusion {
    pub const IDENTITY: Confusion = Confusion([[1.0, 0.0], [0.0, 1.0]]);

    /// Symmetric bit flip with probability `p`.
    pub fn flip(p: f64) -> Self {
        Confusion([[1.0 - p, p], [p, 1.0 - p]])
    }

    /// `P(1|0) = p01`, `P(0|1) = p10`.
    pub fn asymmetric(p01: f64, p10: f64) -> Self {
        Confusion([[1.0 - p01, p01], [p10, 1.0 - p10]])
    }

    /// Probability that a true `bit` is reported flipped.
    pub fn flip_probability(&self, bit: usize) -> f64 {
        self.0[bit][1 - bit]
    }

    /// Mean assignment error.
    pub fn error(&self) -> f64 {
        0.5 * (self.0[0][1] + self.0[1][0])
    }

    pub fn is_identity(&self) -> bool {
        self.0[0][1] == 0.0 && self.0[1][0] == 0.0
    }

    fn validate(&self, qubit: usize) -> Result<()> {
        for row in &self.0 {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidNoise(format!("readout entries of qubit {qubit} must lie in [0, 1]")));
            }
            if (row[0] + row[1] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidNoise(format!("readout row of qubit {qubit} does not sum to 1")));
            }
        }
        Ok(())
    }
}

/// Two-qubit depolarizing probability for one physical pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeError {
    pub a: usize,
    pub b: usize,
    pub p2: f64,
}

/// Gate durations in arbitrary time units. A layer lasts as long as its
/// slowest gate; qubits finishing early idle for the remainder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Durations {
    pub one_qubit: f64,
    pub two_qubit: f64,
}

impl Default for Durations {
    fn default() -> Self {
        Durations {
            one_qubit: 1.0,
            two_qubit: 1.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// Probability of a uniformly random non-identity Pauli after each
    /// single-qubit gate.
    #[serde(default)]
    pub p1: f64,
    /// Same for two-qubit gates (15 Paulis); per-pair overrides in `edges`.
    #[serde(default)]
    pub p2: f64,
    /// Coherent Z rotation (radians) per unit of idle time.
    #[serde(default)]
    pub idle_drift: f64,
    /// Z-flip probability per unit of idle time.
    #[serde(default)]
    pub idle_dephase: f64,
    /// Systematic Z over-rotation on every target of a single- or two-qubit
    /// gate. Sign-inverted gates carry the opposite error before the gate.
    #[serde(default)]
    pub gate_drift: f64,
    /// Readout confusion per qubit; qubits beyond the list read out perfectly.
    #[serde(default)]
    pub readout: Vec<Confusion>,
    #[serde(default)]
    pub edges: Vec<EdgeError>,
    #[serde(default)]
    pub durations: Durations,
}

pub const PRESETS: &[&str] = &["none", "kolkata-like"];

impl NoiseModel {
    pub fn none() -> Self {
        NoiseModel::default()
    }

    /// Gate and readout errors at the level of a 27-qubit superconducting
    /// device, on a 12-qubit fully connected model with fixed per-pair and
    /// per-qubit dispersion around the mean rates.
    pub fn kolkata_like() -> Self {
        const QUBITS: usize = 12;
        let mut rng = crate::rng::stream(0x006b_6f6c_6b61_7461);
        let spread = Normal::new(0.0, 0.45).expect("valid normal");
        let factors = |n: usize, rng: &mut crate::rng::Rng| {
            let raw: Vec<f64> = (0..n).map(|_| f64::exp(spread.sample(rng))).collect();
            let mean = raw.iter().sum::<f64>() / n as f64;
            raw.into_iter().map(|f| f / mean).collect::<Vec<_>>()
        };
        let pairs: Vec<(usize, usize)> = (0..QUBITS)
            .flat_map(|a| (a + 1..QUBITS).map(move |b| (a, b)))
            .collect();
        let edge_factors = factors(pairs.len(), &mut rng);
        let readout_factors = factors(QUBITS, &mut rng);
        let p2 = 6.8e-3;
        let readout = readout_factors
            .iter()
            .map(|f| {
                let e = 0.01 * f;
                let skew = rng.random_range(0.5..0.8);
                Confusion::asymmetric(e * skew, e * (2.0 - skew))
            })
            .collect();
        NoiseModel {
            p1: 1.8e-4,
            p2,
            idle_drift: 0.02,
            idle_dephase: 0.002,
            gate_drift: 0.0,
            readout,
            edges: pairs
                .iter()
                .zip(edge_factors)
                .map(|(&(a, b), f)| EdgeError { a, b, p2: (p2 * f).min(1.0) })
                .collect(),
            durations: Durations::default(),
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "none" | "ideal" => Ok(NoiseModel::none()),
            "kolkata-like" => Ok(NoiseModel::kolkata_like()),
            other => Err(Error::Unknown {
                what: "noise preset",
                name: other.to_string(),
            }),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let nm: NoiseModel = serde_json::from_str(text)?;
        nm.validate()?;
        Ok(nm)
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("p1", self.p1),
            ("p2", self.p2),
            ("idle_dephase", self.idle_dephase),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidNoise(format!("{name} = {p} is not a probability")));
            }
        }
        if !self.idle_drift.is_finite() || !self.gate_drift.is_finite() {
            return Err(Error::InvalidNoise("drift angles must be finite".into()));
        }
        for e in &self.edges {
            if !(0.0..=1.0).contains(&e.p2) || e.a == e.b {
                return Err(Error::InvalidNoise(format!("bad edge ({}, {})", e.a, e.b)));
            }
        }
        for (q, c) in self.readout.iter().enumerate() {
            c.validate(q)?;
        }
        let d = self.durations;
        if !(d.one_qubit >= 0.0 && d.two_qubit >= 0.0) {
            return Err(Error::InvalidNoise("durations must be non-negative".into()));
        }
        Ok(())
    }

    /// Physical qubits described by this model (0 for a uniform model).
    pub fn device_qubits(&self) -> usize {
        let from_edges = self.edges.iter().map(|e| e.a.max(e.b) + 1).max().unwrap_or(0);
        from_edges.max(self.readout.len())
    }

    pub fn p2_for(&self, a: usize, b: usize) -> f64 {
        self.edges
            .iter()
            .find(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a))
            .map_or(self.p2, |e| e.p2)
    }

    pub fn readout_for(&self, q: usize) -> Confusion {
        self.readout.get(q).copied().unwrap_or(Confusion::IDENTITY)
    }

    pub fn has_readout_error(&self) -> bool {
        self.readout.iter().any(|c| !c.is_identity())
    }

    /// The model seen by a circuit whose virtual qubit `v` runs on physical
    /// qubit `physical[v]`.
    pub fn restrict(&self, physical: &[usize]) -> NoiseModel {
        let index_of = |p: usize| physical.iter().position(|&q| q == p);
        let edges = self
            .edges
            .iter()
            .filter_map(|e| {
                Some(EdgeError {
                    a: index_of(e.a)?,
                    b: index_of(e.b)?,
                    p2: e.p2,
                })
            })
            .collect();
        NoiseModel {
            readout: physical.iter().map(|&p| self.readout_for(p)).collect(),
            edges,
            ..self.clone()
        }
    }

    /// Every error strength multiplied by `factor` (probabilities clamped).
    pub fn scaled(&self, factor: f64) -> NoiseModel {
        let clamp = |p: f64| (p * factor).clamp(0.0, 1.0);
        NoiseModel {
            p1: clamp(self.p1),
            p2: clamp(self.p2),
            idle_drift: self.idle_drift * factor,
            idle_dephase: clamp(self.idle_dephase),
            gate_drift: self.gate_drift * factor,
            readout: self
                .readout
                .iter()
                .map(|c| {
                    Confusion::asymmetric((c.0[0][1] * factor).min(0.5), (c.0[1][0] * factor).min(0.5))
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeError { p2: clamp(e.p2), ..*e })
                .collect(),
            durations: self.durations,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.p1 == 0.0
            && self.p2 == 0.0
            && self.idle_drift == 0.0
            && self.idle_dephase == 0.0
            && self.gate_drift == 0.0
            && self.edges.iter().all(|e| e.p2 == 0.0)
            && !self.has_readout_error()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolkata_like_matches_mean_rates() {
        let nm = NoiseModel::kolkata_like();
        nm.validate().unwrap();
        assert_eq!(nm.device_qubits(), 12);
        let mean_p2 = nm.edges.iter().map(|e| e.p2).sum::<f64>() / nm.edges.len() as f64;
        assert!((mean_p2 - 6.8e-3).abs() < 1e-9);
        let mean_ro = nm.readout.iter().map(Confusion::error).sum::<f64>() / 12.0;
        assert!((mean_ro - 0.01).abs() < 1e-9);
        assert_eq!(nm.p1, 1.8e-4);
        assert_eq!(NoiseModel::kolkata_like(), nm);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let nm = NoiseModel::kolkata_like();
        let text = serde_json::to_string(&nm).unwrap();
        assert_eq!(NoiseModel::from_json(&text).unwrap(), nm);
        assert!(NoiseModel::from_json(r#"{"p1": 1.5}"#).is_err());
        assert!(NoiseModel::from_json(r#"{"readout": [[[0.9, 0.2], [0.0, 1.0]]]}"#).is_err());
        assert!(NoiseModel::from_json(r#"{"bogus": 1}"#).is_err());
        let partial = NoiseModel::from_json(r#"{"p2": 0.01}"#).unwrap();
        assert_eq!(partial.p2, 0.01);
        assert_eq!(partial.durations, Durations::default());
    }

    #[test]
    fn restriction_reindexes_pairs_and_readout() {
        let nm = NoiseModel {
            p2: 0.5,
            readout: vec![Confusion::flip(0.1), Confusion::flip(0.2), Confusion::flip(0.3)],
            edges: vec![EdgeError { a: 1, b: 2, p2: 0.01 }],
            ..NoiseModel::none()
        };
        let r = nm.restrict(&[2, 1]);
        assert_eq!(r.readout, vec![Confusion::flip(0.3), Confusion::flip(0.2)]);
        assert_eq!(r.p2_for(0, 1), 0.01);
        assert_eq!(r.p2_for(1, 0), 0.01);
        assert_eq!(nm.restrict(&[0, 1]).p2_for(0, 1), 0.5);
        assert_eq!(nm.readout_for(7), Confusion::IDENTITY);
    }

    #[test]
    fn presets_resolve_by_name() {
        for name in PRESETS {
            NoiseModel::preset(name).unwrap();
        }
        assert!(NoiseModel::preset("nope").is_err());
        assert!(NoiseModel::none().is_noiseless());
    }
}
