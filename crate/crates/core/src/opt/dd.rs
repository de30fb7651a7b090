use crate::circuit::{Circuit, Gate, GateKind};
use crate::error::Result;

/// Fill idle time with X–X dynamical decoupling.
///
/// Only windows between two operations on a qubit count; leading idle time
/// acts on `|0⟩` and trailing idle time commutes with the final measurement.
/// A window of `L ≥ 2` layers gets two X pulses placed so the idle time
/// between them equals the idle time outside them; a single idle layer gets
/// an [`GateKind::Echo`], which puts both pulses inside that layer.
/// The logical action is unchanged.
pub fn insert_dd(c: &Circuit) -> Result<Circuit> {
    let mut out = c.clone();
    let active: Vec<usize> = (0..c.layers().len()).filter(|&i| !c.layers()[i].is_barrier()).collect();
    let mut additions: Vec<(usize, Gate)> = Vec::new();
    for q in 0..c.width() {
        let busy: Vec<bool> = active
            .iter()
            .map(|&i| {
                c.layers()[i]
                    .gates()
                    .iter()
                    .any(|g| g.kind != GateKind::Measure && g.targets.contains(&q))
            })
            .collect();
        let mut last_op: Option<usize> = None;
        for (k, &b) in busy.iter().enumerate() {
            if !b {
                continue;
            }
            if let Some(prev) = last_op {
                let window = &active[prev + 1..k];
                match window.len() {
                    0 => {}
                    1 => additions.push((window[0], Gate::echo(q))),
                    len => {
                        let free = len - 2;
                        let between = free / 2;
                        let before = between / 2;
                        additions.push((window[before], Gate::x(q)));
                        additions.push((window[before + 1 + between], Gate::x(q)));
                    }
                }
            }
            last_op = Some(k);
        }
    }
    let layers = out.layers_mut();
    for (i, g) in additions {
        layers[i].gates_mut().push(g);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::qv_model_circuit;
    use crate::linalg;
    use crate::rng::stream;
    use crate::sim::simulate_ideal;

    fn h(q: usize) -> Gate {
        Gate::u1q(linalg::hadamard(), q).unwrap()
    }

    #[test]
    fn busy_circuit_is_unchanged() {
        let mut c = Circuit::new(2);
        c.push(vec![h(0), h(1)]).unwrap();
        c.push(vec![Gate::cx(0, 1).unwrap()]).unwrap();
        assert_eq!(insert_dd(&c).unwrap(), c);
    }

    #[test]
    fn window_positions() {
        // Qubit 0 busy at layers 0 and 7: a 6-layer window 1..=6.
        let mut c = Circuit::new(2);
        c.push(vec![h(0)]).unwrap();
        for _ in 0..6 {
            c.push(vec![Gate::x(1)]).unwrap();
        }
        c.push(vec![h(0)]).unwrap();
        let dd = insert_dd(&c).unwrap();
        let pulses: Vec<usize> = dd
            .layers()
            .iter()
            .enumerate()
            .filter(|(_, l)| l.gates().iter().any(|g| g.kind == GateKind::X && g.targets == [0]))
            .map(|(i, _)| i)
            .collect();
        // free = 4: one layer, X, two layers, X, one layer.
        assert_eq!(pulses, vec![2, 5]);
    }

    #[test]
    fn single_idle_layer_gets_echo() {
        let mut c = Circuit::new(2);
        c.push(vec![h(0)]).unwrap();
        c.push(vec![Gate::x(1)]).unwrap();
        c.push(vec![h(0)]).unwrap();
        let dd = insert_dd(&c).unwrap();
        assert!(dd.layers()[1].gates().iter().any(|g| g.kind == GateKind::Echo));
    }

    #[test]
    fn leading_and_trailing_idle_untouched() {
        let mut c = Circuit::new(2);
        c.push(vec![h(1)]).unwrap();
        c.push(vec![h(1)]).unwrap();
        c.push(vec![h(0), h(1)]).unwrap();
        c.push(vec![h(1)]).unwrap();
        c.push(vec![h(1)]).unwrap();
        assert_eq!(insert_dd(&c).unwrap(), c);
    }

    #[test]
    fn noiseless_output_preserved() {
        for seed in 0..10 {
            let c = qv_model_circuit(5, &mut stream(seed)).unwrap();
            let mut sparse = Circuit::new(6);
            for l in c.layers() {
                sparse.push(l.gates().to_vec()).unwrap();
                sparse.push(vec![h(5)]).unwrap();
            }
            let before = simulate_ideal(&sparse).unwrap();
            let after = simulate_ideal(&insert_dd(&sparse).unwrap()).unwrap();
            let diff = before.iter().zip(&after).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(diff < 1e-9);
        }
    }
}
