use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Bitstring of basis index `index`; character `k` is qubit `k`.
pub fn bitstring(index: usize, width: usize) -> String {
    (0..width)
        .map(|k| if (index >> k) & 1 == 1 { '1' } else { '0' })
        .collect()
}

pub fn parse_bitstring(s: &str) -> Result<usize> {
    s.chars().enumerate().try_fold(0usize, |acc, (k, ch)| match ch {
        '0' => Ok(acc),
        '1' => Ok(acc | (1 << k)),
        _ => Err(invalid("bitstring", format!("`{s}` is not a bitstring"))),
    })
}

/// Measured bitstring histogram.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsDistribution {
    width: usize,
    shots: u64,
    counts: BTreeMap<String, u64>,
}

impl CountsDistribution {
    pub fn new(width: usize, counts: BTreeMap<String, u64>) -> Result<Self> {
        for key in counts.keys() {
            if key.len() != width {
                return Err(invalid("counts", format!("bitstring `{key}` is not {width} bits long")));
            }
            parse_bitstring(key)?;
        }
        let shots = counts.values().sum();
        Ok(CountsDistribution {
            width,
            shots,
            counts: counts.into_iter().filter(|(_, c)| *c > 0).collect(),
        })
    }

    /// Build from `(bitstring, count)` pairs.
    pub fn from_pairs<'a>(width: usize, pairs: impl IntoIterator<Item = (&'a str, u64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (k, c) in pairs {
            *map.entry(k.to_string()).or_insert(0) += c;
        }
        CountsDistribution::new(width, map)
    }

    pub(crate) fn from_indices(width: usize, hist: impl IntoIterator<Item = (usize, u64)>) -> Self {
        let mut counts = BTreeMap::new();
        let mut shots = 0;
        for (idx, c) in hist {
            if c > 0 {
                *counts.entry(bitstring(idx, width)).or_insert(0) += c;
                shots += c;
            }
        }
        CountsDistribution { width, shots, counts }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    pub fn get(&self, bits: &str) -> u64 {
        self.counts.get(bits).copied().unwrap_or(0)
    }

    /// `(basis index, count)` pairs.
    pub fn indexed(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts
            .iter()
            .map(|(k, c)| (parse_bitstring(k).expect("validated"), *c))
    }

    /// Dense empirical distribution over `2^width` outcomes.
    pub fn probabilities(&self) -> Result<Vec<f64>> {
        if self.shots == 0 {
            return Err(Error::EmptyDistribution);
        }
        let mut p = vec![0.0; 1 << self.width];
        for (i, c) in self.indexed() {
            p[i] = c as f64 / self.shots as f64;
        }
        Ok(p)
    }

    /// Counts restricted to `qubits`, in that order.
    pub fn marginal(&self, qubits: &[usize]) -> Result<CountsDistribution> {
        if let Some(&q) = qubits.iter().find(|&&q| q >= self.width) {
            return Err(Error::QubitOutOfRange { qubit: q, width: self.width });
        }
        let hist = self.indexed().map(|(i, c)| {
            let j = qubits
                .iter()
                .enumerate()
                .fold(0usize, |acc, (k, &q)| acc | (((i >> q) & 1) << k));
            (j, c)
        });
        Ok(CountsDistribution::from_indices(qubits.len(), hist))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bitstrings_are_qubit_ordered() {
        assert_eq!(bitstring(1, 3), "100");
        assert_eq!(bitstring(6, 3), "011");
        assert_eq!(parse_bitstring("011").unwrap(), 6);
        assert!(parse_bitstring("01a").is_err());
    }

    #[test]
    fn counts_invariants() {
        let c = CountsDistribution::from_pairs(2, [("00", 3), ("11", 1), ("01", 0)]).unwrap();
        assert_eq!(c.shots(), 4);
        assert_eq!(c.counts().len(), 2);
        assert!(CountsDistribution::from_pairs(2, [("000", 1)]).is_err());
        let p = c.probabilities().unwrap();
        assert_eq!(p, vec![0.75, 0.0, 0.0, 0.25]);
    }

    #[test]
    fn marginal_selects_qubits() {
        let c = CountsDistribution::from_pairs(3, [("100", 2), ("101", 3)]).unwrap();
        let m = c.marginal(&[2, 0]).unwrap();
        assert_eq!(m.get("01"), 2);
        assert_eq!(m.get("11"), 3);
        assert!(c.marginal(&[3]).is_err());
    }
}
