use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::sim::{Confusion, CountsDistribution, Executor, NoiseModel};

/// Apply the tensored inverse of the per-qubit confusion matrices to the
/// empirical distribution. Entries may be negative; the total is preserved.
///
/// `confusion[k]` belongs to bit `k` of the distribution.
///
/// ```
/// use qbench::opt::mitigate_measurement;
/// use qbench::sim::{Confusion, CountsDistribution};
///
/// let counts = CountsDistribution::from_pairs(1, [("0", 900), ("1", 100)]).unwrap();
/// let q = mitigate_measurement(&counts, &[Confusion::flip(0.1)]).unwrap();
/// assert!((q[0] - 1.0).abs() < 1e-12 && q[1].abs() < 1e-12);
/// ```
pub fn mitigate_measurement(counts: &CountsDistribution, confusion: &[Confusion]) -> Result<Vec<f64>> {
    let width = counts.width();
    if confusion.len() != width {
        return Err(Error::WidthMismatch {
            left: confusion.len(),
            right: width,
        });
    }
    let mut v = counts.probabilities()?;
    for (q, c) in confusion.iter().enumerate() {
        // observed = Cᵀ · true, so true = (Cᵀ)⁻¹ · observed.
        let [[a, b], [c0, d]] = c.0;
        let (t00, t01, t10, t11) = (a, c0, b, d);
        let det = t00 * t11 - t01 * t10;
        if det.abs() < 1e-12 {
            return Err(Error::SingularConfusion { qubit: q });
        }
        let inv = [[t11 / det, -t01 / det], [-t10 / det, t00 / det]];
        let bit = 1usize << q;
        for i in (0..v.len()).filter(|i| i & bit == 0) {
            let (x0, x1) = (v[i], v[i | bit]);
            v[i] = inv[0][0] * x0 + inv[0][1] * x1;
            v[i | bit] = inv[1][0] * x0 + inv[1][1] * x1;
        }
    }
    Ok(v)
}

/// Euclidean projection onto the probability simplex.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Estimate per-qubit confusion matrices from two circuits: all qubits in
/// `|0⟩`, and all qubits flipped to `|1⟩`.
pub fn calibrate(executor: &Executor, nm: &NoiseModel, width: usize, shots: u64, seed: u64) -> Result<Vec<Confusion>> {
    let zeros = Circuit::new(width);
    let mut ones = Circuit::new(width);
    ones.push((0..width).map(Gate::x).collect())?;
    let c0 = executor.run(&zeros, nm, shots, seed)?;
    let c1 = executor.run(&ones, nm, shots, seed.wrapping_add(1))?;
    let n = shots as f64;
    let ones_at = |counts: &CountsDistribution, q: usize| {
        counts
            .indexed()
            .filter(|(i, _)| (i >> q) & 1 == 1)
            .map(|(_, c)| c)
            .sum::<u64>() as f64
            / n
    };
    Ok((0..width)
        .map(|q| Confusion::asymmetric(ones_at(&c0, q), 1.0 - ones_at(&c1, q)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_confusion_is_a_no_op() {
        let counts = CountsDistribution::from_pairs(2, [("00", 3), ("01", 5), ("11", 2)]).unwrap();
        let q = mitigate_measurement(&counts, &[Confusion::IDENTITY; 2]).unwrap();
        assert_eq!(q, counts.probabilities().unwrap());
    }

    #[test]
    fn singular_is_rejected() {
        let counts = CountsDistribution::from_pairs(1, [("0", 1)]).unwrap();
        assert!(matches!(
            mitigate_measurement(&counts, &[Confusion::flip(0.5)]),
            Err(Error::SingularConfusion { qubit: 0 })
        ));
    }

    #[test]
    fn mass_is_preserved() {
        let counts = CountsDistribution::from_pairs(2, [("00", 70), ("10", 20), ("11", 10)]).unwrap();
        let conf = [Confusion::asymmetric(0.05, 0.1), Confusion::asymmetric(0.2, 0.03)];
        let q = mitigate_measurement(&counts, &conf).unwrap();
        assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn simplex_projection() {
        assert_eq!(project_to_simplex(&[0.5, 0.5]), vec![0.5, 0.5]);
        let p = project_to_simplex(&[1.1, -0.1]);
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1] == 0.0);
        let p = project_to_simplex(&[0.6, 0.6, -0.2]);
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12 && p[2] == 0.0);
    }

    #[test]
    fn calibration_recovers_readout() {
        let nm = NoiseModel {
            readout: vec![Confusion::asymmetric(0.02, 0.08), Confusion::flip(0.1)],
            ..NoiseModel::none()
        };
        let ex = Executor::new();
        let cal = calibrate(&ex, &nm, 2, 20_000, 5).unwrap();
        assert_eq!(ex.stats().circuits, 2);
        assert!((cal[0].0[0][1] - 0.02).abs() < 0.005);
        assert!((cal[0].0[1][0] - 0.08).abs() < 0.008);
        assert!((cal[1].0[1][0] - 0.1).abs() < 0.008);
    }
}
