use proptest::prelude::*;

use qbench::circuit::{compose, haar_su2, haar_su4, inverse, qv_model_circuit, Circuit, Gate, GateKind, Layer};
use qbench::linalg::{self, max_abs_diff, unitarity_error};
use qbench::rng::stream;
use qbench::sim::{
    deterministic_probabilities, sample_noisy, simulate_ideal, simulate_statevector, CountsDistribution, Executor,
    NoiseModel, Statevector,
};

fn random_circuit(m: usize, depth: usize, seed: u64) -> Circuit {
    let mut rng = stream(seed);
    let mut c = Circuit::new(m);
    for d in 0..depth {
        if d % 2 == 0 {
            c.push((0..m).map(|q| Gate::u1q(haar_su2(&mut rng), q).unwrap()).collect()).unwrap();
        } else {
            let start = d / 2 % 2;
            let gates = (start..m.saturating_sub(1))
                .step_by(2)
                .map(|a| if d % 4 == 1 { Gate::cx(a, a + 1).unwrap() } else { Gate::su4(haar_su4(&mut rng), a + 1, a).unwrap() })
                .collect();
            c.push(gates).unwrap();
        }
    }
    c
}

fn layers_disjoint(c: &Circuit) -> bool {
    c.layers().iter().all(|l| {
        let mut seen = vec![false; c.width()];
        l.gates().iter().filter(|g| g.kind != GateKind::Barrier).flat_map(|g| g.targets.clone()).all(|q| {
            let fresh = !seen[q];
            seen[q] = true;
            fresh
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn sampled_gates_are_unitary(seed in any::<u64>()) {
        let mut rng = stream(seed);
        prop_assert!(unitarity_error(&haar_su4(&mut rng)) < 1e-10);
        prop_assert!(unitarity_error(&haar_su2(&mut rng)) < 1e-10);
    }

    #[test]
    fn double_inverse_is_identity(m in 2usize..6, seed in any::<u64>()) {
        let c = qv_model_circuit(m, &mut stream(seed)).unwrap();
        let back = inverse(&inverse(&c).unwrap()).unwrap();
        prop_assert_eq!(back.depth(), c.depth());
        for (a, b) in c.layers().iter().zip(back.layers()) {
            prop_assert_eq!(a.gates().len(), b.gates().len());
            for (g, h) in a.gates().iter().zip(b.gates()) {
                prop_assert_eq!(&g.targets, &h.targets);
                prop_assert!(max_abs_diff(&g.matrix2().unwrap(), &h.matrix2().unwrap()) < 1e-12);
            }
        }
    }

    #[test]
    fn compose_and_inverse_keep_layers_disjoint(m in 2usize..7, depth in 1usize..8, seed in any::<u64>()) {
        let c = random_circuit(m, depth, seed);
        let inv = inverse(&c).unwrap();
        let mirrored = compose(&c, &inv, true).unwrap();
        prop_assert!(layers_disjoint(&inv) && layers_disjoint(&mirrored));
        prop_assert_eq!(mirrored.depth(), 2 * c.depth());
        let amp = simulate_statevector(&mirrored).unwrap().amplitudes()[0].norm();
        prop_assert!((amp - 1.0).abs() < 1e-8);
    }

    #[test]
    fn norm_is_conserved(m in 1usize..6, depth in 1usize..100, seed in any::<u64>()) {
        let c = random_circuit(m, depth, seed);
        prop_assert!((simulate_statevector(&c).unwrap().norm() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn sampling_is_reproducible(seed in any::<u64>(), shots in 1u64..500) {
        let c = qv_model_circuit(3, &mut stream(seed)).unwrap();
        let nm = NoiseModel::kolkata_like().restrict(&[0, 1, 2]);
        let a = sample_noisy(&c, &nm, shots, &mut stream(seed ^ 1)).unwrap();
        let b = sample_noisy(&c, &nm, shots, &mut stream(seed ^ 1)).unwrap();
        prop_assert_eq!(a.shots(), shots);
        prop_assert_eq!(a.counts().values().sum::<u64>(), shots);
        prop_assert!(a.counts().keys().all(|k| k.len() == 3));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn coherent_noise_keeps_distribution_normalized(seed in any::<u64>()) {
        let c = qv_model_circuit(4, &mut stream(seed)).unwrap();
        let nm = NoiseModel { idle_drift: 0.3, gate_drift: 0.1, ..NoiseModel::none() };
        let p = deterministic_probabilities(&c, &nm).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn haar_first_moments() {
    let mut rng = stream(2024);
    let n = 10_000;
    let (mut sq, mut tr) = (0.0, num_complex::Complex64::new(0.0, 0.0));
    for _ in 0..n {
        let t = linalg::trace(&haar_su4(&mut rng));
        sq += t.norm_sqr();
        tr += t;
    }
    assert!((sq / n as f64 - 1.0).abs() < 0.05);
    assert!((tr / n as f64).norm() < 0.05);
}

#[test]
fn noiseless_sampling_passes_chi_squared() {
    let c = qv_model_circuit(3, &mut stream(5)).unwrap();
    let p = simulate_ideal(&c).unwrap();
    let shots = 10_000;
    let counts = Executor::new().run(&c, &NoiseModel::none(), shots, 9).unwrap();
    let mut chi2 = 0.0;
    let mut dof = 0usize;
    for (i, &pi) in p.iter().enumerate() {
        let expected = pi * shots as f64;
        if expected > 5.0 {
            let observed = counts.indexed().find(|(j, _)| *j == i).map_or(0, |(_, c)| c) as f64;
            chi2 += (observed - expected).powi(2) / expected;
            dof += 1;
        }
    }
    // 99.9% quantile of chi-squared with 7 degrees of freedom is 24.3.
    assert!(dof <= 8 && chi2 < 24.3, "chi2 {chi2} over {dof} cells");
}

#[test]
fn depolarized_identity_matches_channel() {
    // X then X with p1 on each: P(1) = 2q(1-q) with q = 2p/3 per gate.
    let p = 0.06;
    let mut c = Circuit::new(1);
    c.push(vec![Gate::x(0)]).unwrap();
    c.push(vec![Gate::x(0)]).unwrap();
    let nm = NoiseModel { p1: p, ..NoiseModel::none() };
    let shots = 20_000;
    let counts = Executor::new().run(&c, &nm, shots, 3).unwrap();
    let q = 2.0 * p / 3.0;
    let want = 2.0 * q * (1.0 - q);
    let got = counts.get("1") as f64 / shots as f64;
    let sigma = (want * (1.0 - want) / shots as f64).sqrt();
    assert!((got - want).abs() < 3.0 * sigma, "{got} vs {want}");
}

#[test]
fn statevector_layers_reject_overlap() {
    assert!(Layer::new(vec![Gate::x(0), Gate::cx(0, 1).unwrap()]).is_err());
    assert!(Gate::cx(1, 1).is_err());
    let mut c = Circuit::new(2);
    assert!(c.push(vec![Gate::x(2)]).is_err());
    assert_eq!(Statevector::zero(3).probabilities()[0], 1.0);
    let counts = CountsDistribution::from_pairs(2, [("01", 3), ("10", 1)]).unwrap();
    assert_eq!(counts.shots(), 4);
    assert!(CountsDistribution::from_pairs(2, [("011", 3)]).is_err());
}
