use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;

use crate::circuit::Circuit;
use crate::error::{invalid, Error, Result};
use crate::rng;
use crate::sim::NoiseModel;

/// Physical connectivity with calibration data.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMap {
    qubits: usize,
    edges: BTreeMap<(usize, usize), f64>,
    readout: Vec<f64>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl CouplingMap {
    /// `edges` are `(a, b, two-qubit error)`; `readout[q]` is qubit `q`'s
    /// readout error. The graph must be connected.
    pub fn new(qubits: usize, edges: &[(usize, usize, f64)], readout: Vec<f64>) -> Result<Self> {
        if qubits == 0 {
            return Err(invalid("coupling map", "no qubits"));
        }
        if readout.len() != qubits {
            return Err(invalid("coupling map", "one readout error per qubit required"));
        }
        let mut map = BTreeMap::new();
        for &(a, b, e) in edges {
            if a == b || a >= qubits || b >= qubits {
                return Err(invalid("coupling map", format!("bad edge ({a}, {b})")));
            }
            if !(0.0..=1.0).contains(&e) {
                return Err(invalid("coupling map", format!("edge error {e} out of range")));
            }
            map.insert(key(a, b), e);
        }
        let cm = CouplingMap { qubits, edges: map, readout };
        if !cm.is_connected() {
            return Err(invalid("coupling map", "graph is not connected"));
        }
        Ok(cm)
    }

    /// A line `0 - 1 - … - (n-1)`; `errors[i]` belongs to edge `(i, i + 1)`.
    pub fn line(errors: &[f64], readout: Vec<f64>) -> Result<Self> {
        let edges: Vec<_> = errors.iter().enumerate().map(|(i, &e)| (i, i + 1, e)).collect();
        CouplingMap::new(errors.len() + 1, &edges, readout)
    }

    pub fn ring(n: usize, error: f64, readout: f64) -> Result<Self> {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, error)).collect();
        CouplingMap::new(n, &edges, vec![readout; n])
    }

    /// The map described by a device noise model, `None` for a model without
    /// per-qubit data. Pairs without an explicit edge are not connected.
    pub fn from_noise(nm: &NoiseModel) -> Result<Option<Self>> {
        let qubits = nm.device_qubits();
        if qubits == 0 || nm.edges.is_empty() {
            return Ok(None);
        }
        let edges: Vec<_> = nm.edges.iter().map(|e| (e.a, e.b, e.p2)).collect();
        let readout = (0..qubits).map(|q| nm.readout_for(q).error()).collect();
        CouplingMap::new(qubits, &edges, readout).map(Some)
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn edge_error(&self, a: usize, b: usize) -> Option<f64> {
        self.edges.get(&key(a, b)).copied()
    }

    pub fn readout_error(&self, q: usize) -> f64 {
        self.readout[q]
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.qubits];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(q) = stack.pop() {
            for &(a, b) in self.edges.keys() {
                let next = if a == q { b } else if b == q { a } else { continue };
                if !seen[next] {
                    seen[next] = true;
                    stack.push(next);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Π(1 − edge error) over the circuit's interaction edges times
/// Π(1 − readout error) over its qubits, `None` if an edge is missing.
pub fn layout_score(c: &Circuit, map: &CouplingMap, assignment: &[usize]) -> Option<f64> {
    let mut score: f64 = assignment.iter().map(|&p| 1.0 - map.readout_error(p)).product();
    for (u, v) in c.interaction_edges() {
        score *= 1.0 - map.edge_error(assignment[u], assignment[v])?;
    }
    Some(score)
}

/// Exhaustive search up to this many map qubits.
const EXHAUSTIVE_LIMIT: usize = 10;
const RESTARTS: usize = 64;

struct Search<'a> {
    map: &'a CouplingMap,
    /// For each virtual qubit, its interaction partners with smaller index.
    earlier: Vec<Vec<usize>>,
    best: Option<(f64, Vec<usize>)>,
}

impl Search<'_> {
    fn factor(&self, v: usize, p: usize, partial: &[usize]) -> Option<f64> {
        let mut f = 1.0 - self.map.readout_error(p);
        for &u in &self.earlier[v] {
            f *= 1.0 - self.map.edge_error(partial[u], p)?;
        }
        Some(f)
    }

    fn dfs(&mut self, partial: &mut Vec<usize>, used: &mut [bool], score: f64) {
        let v = partial.len();
        if v == self.earlier.len() {
            if self.best.as_ref().is_none_or(|(b, _)| score > *b) {
                self.best = Some((score, partial.clone()));
            }
            return;
        }
        for p in 0..self.map.qubits {
            if used[p] {
                continue;
            }
            let Some(f) = self.factor(v, p, partial) else { continue };
            let next = score * f;
            // Factors never exceed one, so a partial score is an upper bound.
            if self.best.as_ref().is_some_and(|(b, _)| next <= *b) {
                continue;
            }
            used[p] = true;
            partial.push(p);
            self.dfs(partial, used, next);
            partial.pop();
            used[p] = false;
        }
    }
}

/// Noise-aware placement of `c`'s qubits on `map`: maximises
/// [`layout_score`], ties broken towards the lexicographically smallest
/// assignment. Exhaustive on small maps, randomised-restart greedy on
/// larger ones.
pub fn select_layout(c: &Circuit, map: &CouplingMap) -> Result<Vec<usize>> {
    let m = c.width();
    if m > map.qubits() {
        return Err(Error::NoEmbedding);
    }
    let mut earlier = vec![Vec::new(); m];
    for (u, v) in c.interaction_edges() {
        let (lo, hi) = (u.min(v), u.max(v));
        earlier[hi].push(lo);
    }
    if map.qubits() < EXHAUSTIVE_LIMIT {
        let mut search = Search { map, earlier, best: None };
        search.dfs(&mut Vec::with_capacity(m), &mut vec![false; map.qubits()], 1.0);
        return search.best.map(|(_, a)| a).ok_or(Error::NoEmbedding);
    }
    greedy(c, map)
}

fn greedy(c: &Circuit, map: &CouplingMap) -> Result<Vec<usize>> {
    let m = c.width();
    let edges = c.interaction_edges();
    let mut adjacency: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); m];
    for &(u, v) in &edges {
        adjacency[u].insert(v);
        adjacency[v].insert(u);
    }
    let mut rng = rng::child(0, rng::LAYOUT, m as u64);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for restart in 0..RESTARTS {
        // Place qubits in breadth-first order so every qubit after the first
        // of its component has a placed neighbour.
        let mut starts: Vec<usize> = (0..m).collect();
        let mut candidates: Vec<usize> = (0..map.qubits()).collect();
        if restart > 0 {
            starts.shuffle(&mut rng);
            candidates.shuffle(&mut rng);
        }
        let mut order = Vec::with_capacity(m);
        let mut queued = vec![false; m];
        for &s in &starts {
            if queued[s] {
                continue;
            }
            queued[s] = true;
            let mut frontier = std::collections::VecDeque::from([s]);
            while let Some(v) = frontier.pop_front() {
                order.push(v);
                for &w in &adjacency[v] {
                    if !queued[w] {
                        queued[w] = true;
                        frontier.push_back(w);
                    }
                }
            }
        }
        // Restarts 1..=Q pin the first qubit to each physical qubit in turn.
        let pinned = (1..=map.qubits()).contains(&restart).then(|| restart - 1);
        let mut assignment = vec![usize::MAX; m];
        let mut used = vec![false; map.qubits()];
        let mut ok = true;
        for (k, &v) in order.iter().enumerate() {
            let mut pick: Option<(f64, usize)> = None;
            for &p in &candidates {
                if k == 0 && pinned.is_some_and(|q| q != p) {
                    continue;
                }
                if used[p] {
                    continue;
                }
                let mut f = 1.0 - map.readout_error(p);
                let mut feasible = true;
                for &w in &adjacency[v] {
                    if assignment[w] != usize::MAX {
                        match map.edge_error(assignment[w], p) {
                            Some(e) => f *= 1.0 - e,
                            None => feasible = false,
                        }
                    }
                }
                if feasible && pick.is_none_or(|(b, _)| f > b) {
                    pick = Some((f, p));
                }
            }
            match pick {
                Some((_, p)) => {
                    assignment[v] = p;
                    used[p] = true;
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let score = layout_score(c, map, &assignment).expect("feasible by construction");
        let better = match &best {
            None => true,
            Some((b, a)) => score > *b || (score == *b && assignment < *a),
        };
        if better {
            best = Some((score, assignment));
        }
    }
    best.map(|(_, a)| a).ok_or(Error::NoEmbedding)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Gate;

    fn pair_circuit() -> Circuit {
        let mut c = Circuit::new(2);
        c.push(vec![Gate::cx(0, 1).unwrap()]).unwrap();
        c
    }

    #[test]
    fn picks_the_better_edge() {
        let map = CouplingMap::line(&[0.01, 0.05], vec![0.0; 3]).unwrap();
        assert_eq!(select_layout(&pair_circuit(), &map).unwrap(), vec![0, 1]);
        let map = CouplingMap::line(&[0.05, 0.01], vec![0.0; 3]).unwrap();
        assert_eq!(select_layout(&pair_circuit(), &map).unwrap(), vec![1, 2]);
    }

    #[test]
    fn uniform_errors_give_lexicographic_first() {
        let map = CouplingMap::ring(5, 0.01, 0.02).unwrap();
        assert_eq!(select_layout(&pair_circuit(), &map).unwrap(), vec![0, 1]);
    }

    #[test]
    fn missing_embedding_is_an_error() {
        // A triangle of interactions cannot live on a line.
        let mut c = Circuit::new(3);
        c.push(vec![Gate::cx(0, 1).unwrap()]).unwrap();
        c.push(vec![Gate::cx(1, 2).unwrap()]).unwrap();
        c.push(vec![Gate::cx(0, 2).unwrap()]).unwrap();
        let map = CouplingMap::line(&[0.01, 0.01, 0.01], vec![0.0; 4]).unwrap();
        assert!(matches!(select_layout(&c, &map), Err(Error::NoEmbedding)));
    }

    #[test]
    fn rejects_disconnected_maps() {
        assert!(CouplingMap::new(4, &[(0, 1, 0.0), (2, 3, 0.0)], vec![0.0; 4]).is_err());
    }

    #[test]
    fn greedy_finds_good_layout_on_large_map() {
        let nm = NoiseModel::kolkata_like();
        let map = CouplingMap::from_noise(&nm).unwrap().unwrap();
        let c = pair_circuit();
        let chosen = select_layout(&c, &map).unwrap();
        let best_edge = nm
            .edges
            .iter()
            .map(|e| {
                (1.0 - e.p2) * (1.0 - map.readout_error(e.a)) * (1.0 - map.readout_error(e.b))
            })
            .fold(0.0, f64::max);
        let score = layout_score(&c, &map, &chosen).unwrap();
        assert!(score >= best_edge * 0.999, "{score} vs {best_edge}");
    }
}
