//! Layered gate-level circuits.
//!
//! A [`Circuit`] is a width plus an ordered list of [`Layer`]s; the gates in a
//! layer act on pairwise-disjoint qubits, so a layer is one time step. Barrier
//! layers are explicit markers that carry no time and prevent cross-boundary
//! simplification, and they are not counted by [`Circuit::depth`].

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat2, Mat4, C64};

/// Unitarity tolerance enforced when matrix gates are built.
pub const UNITARY_TOL: f64 = 1e-10;

pub type SlotId = u32;

#[derive(Clone, Debug, PartialEq)]
pub enum GateKind {
    U1q(Mat2),
    Su4(Mat4),
    Cx,
    X,
    /// Dynamical-decoupling X–X pair inside one idle layer (pulses at the
    /// quarter and three-quarter points). Logically the identity.
    Echo,
    Measure,
    Barrier,
    Param(SlotId),
}

impl GateKind {
    pub fn name(&self) -> &'static str {
        match self {
            GateKind::U1q(_) => "u1q",
            GateKind::Su4(_) => "su4",
            GateKind::Cx => "cx",
            GateKind::X => "x",
            GateKind::Echo => "echo",
            GateKind::Measure => "measure",
            GateKind::Barrier => "barrier",
            GateKind::Param(_) => "param",
        }
    }

    fn arity(&self) -> Option<usize> {
        match self {
            GateKind::Su4(_) | GateKind::Cx => Some(2),
            GateKind::Barrier => None,
            _ => Some(1),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    /// Set on gates realized as the sign-reversed pulse of a forward gate.
    /// Systematic gate phase errors of such a gate cancel those of its partner.
    pub sign_inverted: bool,
}

impl Gate {
    pub fn new(kind: GateKind, targets: Vec<usize>) -> Result<Self> {
        if let Some(expected) = kind.arity() {
            if targets.len() != expected {
                return Err(Error::Arity {
                    kind: kind.name(),
                    expected,
                    got: targets.len(),
                });
            }
        }
        if targets.len() == 2 && targets[0] == targets[1] {
            return Err(Error::OverlappingLayer { qubit: targets[0] });
        }
        let deviation = match &kind {
            GateKind::U1q(m) => linalg::unitarity_error(m),
            GateKind::Su4(m) => linalg::unitarity_error(m),
            _ => 0.0,
        };
        if deviation > UNITARY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Gate {
            kind,
            targets,
            sign_inverted: false,
        })
    }

    pub fn u1q(m: Mat2, q: usize) -> Result<Self> {
        Gate::new(GateKind::U1q(m), vec![q])
    }

    pub fn su4(m: Mat4, a: usize, b: usize) -> Result<Self> {
        Gate::new(GateKind::Su4(m), vec![a, b])
    }

    pub fn cx(control: usize, target: usize) -> Result<Self> {
        Gate::new(GateKind::Cx, vec![control, target])
    }

    pub fn x(q: usize) -> Self {
        Gate::new(GateKind::X, vec![q]).expect("arity 1")
    }

    pub fn echo(q: usize) -> Self {
        Gate::new(GateKind::Echo, vec![q]).expect("arity 1")
    }

    pub fn measure(q: usize) -> Self {
        Gate::new(GateKind::Measure, vec![q]).expect("arity 1")
    }

    pub fn param(slot: SlotId, q: usize) -> Self {
        Gate::new(GateKind::Param(slot), vec![q]).expect("arity 1")
    }

    pub fn barrier(width: usize) -> Self {
        Gate {
            kind: GateKind::Barrier,
            targets: (0..width).collect(),
            sign_inverted: false,
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(self.kind, GateKind::Su4(_) | GateKind::Cx)
    }

    /// The inverse gate. Matrix gates are conjugate-transposed, self-inverse
    /// gates are returned as-is; the sign-inverted flag toggles.
    pub fn inverse(&self) -> Result<Gate> {
        let kind = match &self.kind {
            GateKind::U1q(m) => GateKind::U1q(linalg::dagger(m)),
            GateKind::Su4(m) => GateKind::Su4(linalg::dagger(m)),
            GateKind::Measure => return Err(Error::MeasureInInverse),
            GateKind::Param(_) => {
                return Err(Error::InvalidArgument {
                    name: "circuit",
                    reason: "bind parameter slots before inverting".into(),
                })
            }
            other => other.clone(),
        };
        Ok(Gate {
            kind,
            targets: self.targets.clone(),
            sign_inverted: !self.sign_inverted,
        })
    }

    /// The unitary of a single-qubit gate, if it is one.
    pub fn matrix1(&self) -> Option<Mat2> {
        match &self.kind {
            GateKind::U1q(m) => Some(*m),
            GateKind::X => Some(linalg::pauli_x()),
            GateKind::Echo => Some(linalg::identity()),
            _ => None,
        }
    }

    /// The unitary of a two-qubit gate, if it is one.
    pub fn matrix2(&self) -> Option<Mat4> {
        match &self.kind {
            GateKind::Su4(m) => Some(*m),
            GateKind::Cx => Some(linalg::cx()),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Layer {
    gates: Vec<Gate>,
}

impl Layer {
    pub fn new(gates: Vec<Gate>) -> Result<Self> {
        let barrier = gates.iter().any(|g| g.kind == GateKind::Barrier);
        if barrier && gates.len() != 1 {
            return Err(Error::InvalidArgument {
                name: "layer",
                reason: "a barrier must be alone in its layer".into(),
            });
        }
        if !barrier {
            let mut seen = BTreeSet::new();
            for q in gates.iter().flat_map(|g| g.targets.iter()) {
                if !seen.insert(*q) {
                    return Err(Error::OverlappingLayer { qubit: *q });
                }
            }
        }
        Ok(Layer { gates })
    }

    pub fn barrier(width: usize) -> Self {
        Layer {
            gates: vec![Gate::barrier(width)],
        }
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn is_barrier(&self) -> bool {
        self.gates.iter().any(|g| g.kind == GateKind::Barrier)
    }

    /// Qubits touched by a gate in this layer.
    pub fn busy(&self) -> BTreeSet<usize> {
        self.gates
            .iter()
            .flat_map(|g| g.targets.iter().copied())
            .collect()
    }

    pub(crate) fn gates_mut(&mut self) -> &mut Vec<Gate> {
        &mut self.gates
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    width: usize,
    layers: Vec<Layer>,
}

impl Circuit {
    pub fn new(width: usize) -> Self {
        Circuit {
            width,
            layers: Vec::new(),
        }
    }

    pub fn from_layers(width: usize, layers: Vec<Layer>) -> Result<Self> {
        let mut c = Circuit::new(width);
        for l in layers {
            c.push_layer(l)?;
        }
        Ok(c)
    }

    pub fn push_layer(&mut self, layer: Layer) -> Result<()> {
        if !layer.is_barrier() {
            if let Some(q) = layer.busy().into_iter().find(|q| *q >= self.width) {
                return Err(Error::QubitOutOfRange {
                    qubit: q,
                    width: self.width,
                });
            }
        }
        let layer = if layer.is_barrier() {
            Layer::barrier(self.width)
        } else {
            layer
        };
        self.layers.push(layer);
        Ok(())
    }

    /// Append a layer built from `gates`.
    pub fn push(&mut self, gates: Vec<Gate>) -> Result<()> {
        self.push_layer(Layer::new(gates)?)
    }

    pub fn push_barrier(&mut self) {
        self.layers.push(Layer::barrier(self.width));
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut Vec<Layer> {
        &mut self.layers
    }

    /// Number of non-barrier layers.
    pub fn depth(&self) -> usize {
        self.layers.iter().filter(|l| !l.is_barrier()).count()
    }

    pub fn gates(&self) -> impl Iterator<Item = &Gate> {
        self.layers
            .iter()
            .filter(|l| !l.is_barrier())
            .flat_map(|l| l.gates.iter())
    }

    pub fn param_slots(&self) -> Vec<SlotId> {
        let slots: BTreeSet<SlotId> = self
            .gates()
            .filter_map(|g| match g.kind {
                GateKind::Param(s) => Some(s),
                _ => None,
            })
            .collect();
        slots.into_iter().collect()
    }

    pub fn two_qubit_count(&self) -> usize {
        self.gates().filter(|g| g.is_two_qubit()).count()
    }

    pub fn has_barrier(&self) -> bool {
        self.layers.iter().any(Layer::is_barrier)
    }

    /// Distinct unordered pairs of qubits that share a two-qubit gate.
    pub fn interaction_edges(&self) -> BTreeSet<(usize, usize)> {
        self.gates()
            .filter(|g| g.is_two_qubit())
            .map(|g| {
                let (a, b) = (g.targets[0], g.targets[1]);
                (a.min(b), a.max(b))
            })
            .collect()
    }

    /// Relabel qubit `q` as `perm[q]`.
    pub fn relabel(&self, perm: &PermutationSpec) -> Result<Circuit> {
        if perm.len() != self.width {
            return Err(Error::WidthMismatch {
                left: perm.len(),
                right: self.width,
            });
        }
        let mut out = self.clone();
        for layer in out.layers.iter_mut().filter(|l| !l.is_barrier()) {
            for g in layer.gates.iter_mut() {
                for t in g.targets.iter_mut() {
                    *t = perm.map(*t);
                }
            }
        }
        Ok(out)
    }
}

/// A bijection on `0..m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermutationSpec(Vec<usize>);

impl PermutationSpec {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::NotAPermutation { len: n });
            }
        }
        Ok(PermutationSpec(perm))
    }

    pub fn random<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Self {
        let mut perm: Vec<usize> = (0..m).collect();
        perm.shuffle(rng);
        PermutationSpec(perm)
    }

    pub fn map(&self, q: usize) -> usize {
        self.0[q]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// Haar-random two-qubit unitary.
pub fn haar_su4<R: Rng + ?Sized>(rng: &mut R) -> Mat4 {
    linalg::haar_unitary::<4, R>(rng)
}

/// Haar-random single-qubit unitary.
pub fn haar_su2<R: Rng + ?Sized>(rng: &mut R) -> Mat2 {
    linalg::haar_unitary::<2, R>(rng)
}

/// One QV model layer: a random permutation, then Haar SU(4) on the
/// consecutive pairs of the permuted qubits. Odd widths leave one qubit idle.
pub(crate) fn qv_layer<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Layer {
    let perm = PermutationSpec::random(m, rng);
    let gates = (0..m / 2)
        .map(|j| {
            Gate::su4(haar_su4(rng), perm.map(2 * j), perm.map(2 * j + 1))
                .expect("Haar sample is unitary")
        })
        .collect();
    Layer::new(gates).expect("permutation pairs are disjoint")
}

/// Square QV model circuit of width and depth `m`.
pub fn qv_model_circuit<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<Circuit> {
    if m < 2 {
        return Err(crate::error::invalid("width", "quantum volume needs m >= 2"));
    }
    let mut c = Circuit::new(m);
    for _ in 0..m {
        c.push_layer(qv_layer(m, rng))?;
    }
    Ok(c)
}

/// How the inverse of a circuit is realized physically.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InverseStyle {
    /// Sign-reversed pulses of the forward gates; systematic gate phase
    /// errors cancel against the forward half.
    #[default]
    SignFlipped,
    /// Fresh forward-style gates for the inverse matrices; systematic gate
    /// errors do not cancel.
    Native,
}

/// Reverse the layers and invert every gate (sign-flipped realization).
pub fn inverse(c: &Circuit) -> Result<Circuit> {
    inverse_with(c, InverseStyle::SignFlipped)
}

pub fn inverse_with(c: &Circuit, style: InverseStyle) -> Result<Circuit> {
    let mut layers = Vec::with_capacity(c.layers.len());
    for layer in c.layers.iter().rev() {
        if layer.is_barrier() {
            layers.push(layer.clone());
            continue;
        }
        let gates = layer
            .gates
            .iter()
            .map(|g| {
                let mut inv = g.inverse()?;
                if style == InverseStyle::Native {
                    inv.sign_inverted = g.sign_inverted;
                }
                Ok(inv)
            })
            .collect::<Result<Vec<_>>>()?;
        layers.push(Layer { gates });
    }
    Ok(Circuit {
        width: c.width,
        layers,
    })
}

/// Layers of `a`, an optional barrier, then layers of `b`.
pub fn compose(a: &Circuit, b: &Circuit, barrier: bool) -> Result<Circuit> {
    if a.width != b.width {
        return Err(Error::WidthMismatch {
            left: a.width,
            right: b.width,
        });
    }
    let mut out = a.clone();
    if barrier {
        out.push_barrier();
    }
    out.layers.extend(b.layers.iter().cloned());
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub theta: f64,
    pub phi: f64,
    pub lambda: f64,
}

impl EulerAngles {
    pub fn new(theta: f64, phi: f64, lambda: f64) -> Self {
        EulerAngles { theta, phi, lambda }
    }

    pub fn matrix(&self) -> Mat2 {
        linalg::euler(self.theta, self.phi, self.lambda)
    }
}

/// Replace every parameter slot by its concrete Euler rotation.
pub fn bind_params(c: &Circuit, values: &BTreeMap<SlotId, EulerAngles>) -> Result<Circuit> {
    let mut out = c.clone();
    for layer in out.layers.iter_mut() {
        for g in layer.gates.iter_mut() {
            if let GateKind::Param(slot) = g.kind {
                let angles = values.get(&slot).ok_or(Error::UnboundSlot { slot })?;
                g.kind = GateKind::U1q(angles.matrix());
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// JSON form: {width, layers: [[{kind, targets, matrix?|slot?, inverted?}]]}
// Matrices are flat row-major lists of [re, im] pairs.

#[derive(Serialize, Deserialize)]
struct GateDoc {
    kind: String,
    targets: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slot: Option<SlotId>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    inverted: bool,
}

#[derive(Serialize, Deserialize)]
struct CircuitDoc {
    width: usize,
    layers: Vec<Vec<GateDoc>>,
}

fn flatten<const N: usize>(m: &[[C64; N]; N]) -> Vec<[f64; 2]> {
    m.iter().flatten().map(|z| [z.re, z.im]).collect()
}

fn unflatten<const N: usize>(v: &[[f64; 2]]) -> Result<[[C64; N]; N]> {
    if v.len() != N * N {
        return Err(crate::error::invalid(
            "matrix",
            format!("expected {} entries, got {}", N * N, v.len()),
        ));
    }
    let mut m = [[linalg::ZERO; N]; N];
    for (k, [re, im]) in v.iter().enumerate() {
        m[k / N][k % N] = C64::new(*re, *im);
    }
    Ok(m)
}

impl From<&Gate> for GateDoc {
    fn from(g: &Gate) -> Self {
        let (matrix, slot) = match &g.kind {
            GateKind::U1q(m) => (Some(flatten(m)), None),
            GateKind::Su4(m) => (Some(flatten(m)), None),
            GateKind::Param(s) => (None, Some(*s)),
            _ => (None, None),
        };
        GateDoc {
            kind: g.kind.name().to_string(),
            targets: g.targets.clone(),
            matrix,
            slot,
            inverted: g.sign_inverted,
        }
    }
}

impl TryFrom<GateDoc> for Gate {
    type Error = Error;

    fn try_from(d: GateDoc) -> Result<Gate> {
        let need_matrix = || {
            d.matrix.as_deref().ok_or_else(|| {
                crate::error::invalid("matrix", format!("gate `{}` needs a matrix", d.kind))
            })
        };
        let kind = match d.kind.as_str() {
            "u1q" => GateKind::U1q(unflatten(need_matrix()?)?),
            "su4" => GateKind::Su4(unflatten(need_matrix()?)?),
            "cx" => GateKind::Cx,
            "x" => GateKind::X,
            "echo" => GateKind::Echo,
            "measure" => GateKind::Measure,
            "barrier" => GateKind::Barrier,
            "param" => GateKind::Param(
                d.slot
                    .ok_or_else(|| crate::error::invalid("slot", "param gate needs a slot"))?,
            ),
            other => {
                return Err(Error::Unknown {
                    what: "gate kind",
                    name: other.to_string(),
                })
            }
        };
        let mut g = if kind == GateKind::Barrier {
            Gate {
                kind,
                targets: d.targets,
                sign_inverted: false,
            }
        } else {
            Gate::new(kind, d.targets)?
        };
        g.sign_inverted = d.inverted;
        Ok(g)
    }
}

impl Serialize for Circuit {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CircuitDoc {
            width: self.width,
            layers: self
                .layers
                .iter()
                .map(|l| l.gates.iter().map(GateDoc::from).collect())
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Circuit {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = CircuitDoc::deserialize(d)?;
        let build = || -> Result<Circuit> {
            let mut c = Circuit::new(doc.width);
            for layer in doc.layers {
                let gates = layer
                    .into_iter()
                    .map(Gate::try_from)
                    .collect::<Result<Vec<_>>>()?;
                c.push(gates)?;
            }
            Ok(c)
        };
        build().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, trace, unitarity_error};
    use crate::rng::stream;
    use crate::sim::simulate_ideal;

    #[test]
    fn gate_construction_checks_arity_and_unitarity() {
        assert!(matches!(
            Gate::new(GateKind::Cx, vec![0]),
            Err(Error::Arity { expected: 2, .. })
        ));
        let mut bad = linalg::identity::<2>();
        bad[0][0] = C64::new(2.0, 0.0);
        assert!(matches!(Gate::u1q(bad, 0), Err(Error::NotUnitary { .. })));
        assert!(Gate::cx(1, 1).is_err());
    }

    #[test]
    fn layers_reject_overlap_and_out_of_range() {
        assert!(matches!(
            Layer::new(vec![Gate::x(0), Gate::cx(0, 1).unwrap()]),
            Err(Error::OverlappingLayer { qubit: 0 })
        ));
        let mut c = Circuit::new(2);
        assert!(matches!(
            c.push(vec![Gate::x(2)]),
            Err(Error::QubitOutOfRange { qubit: 2, width: 2 })
        ));
    }

    #[test]
    fn haar_su4_is_deterministic_and_unitary() {
        let a = haar_su4(&mut stream(5));
        let b = haar_su4(&mut stream(5));
        assert_eq!(a, b);
        assert!(unitarity_error(&a) < 1e-10);
    }

    #[test]
    fn haar_first_moments() {
        // ∫|tr U|² dU = 1 and ∫tr U dU = 0 over U(4).
        let mut rng = stream(2024);
        let n = 10_000;
        let (mut sq, mut tr) = (0.0, C64::new(0.0, 0.0));
        for _ in 0..n {
            let t = trace(&haar_su4(&mut rng));
            sq += t.norm_sqr();
            tr += t;
        }
        let mean_sq = sq / n as f64;
        let mean_tr = tr / n as f64;
        assert!((mean_sq - 1.0).abs() < 0.05, "mean |tr U|^2 = {mean_sq}");
        assert!(mean_tr.norm() < 0.05, "mean tr U = {mean_tr}");
    }

    #[test]
    fn qv_model_circuit_shapes() {
        let c = qv_model_circuit(4, &mut stream(1)).unwrap();
        assert_eq!(c.depth(), 4);
        assert!(c.layers().iter().all(|l| l.gates().len() == 2));
        let c = qv_model_circuit(3, &mut stream(1)).unwrap();
        assert_eq!(c.depth(), 3);
        assert!(c.layers().iter().all(|l| l.gates().len() == 1 && l.busy().len() == 2));
        let a = qv_model_circuit(2, &mut stream(9)).unwrap();
        let b = qv_model_circuit(2, &mut stream(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.depth(), 2);
        assert!(qv_model_circuit(1, &mut stream(0)).is_err());
    }

    #[test]
    fn inverse_of_cx_is_cx_and_su4_is_dagger() {
        let mut c = Circuit::new(2);
        c.push(vec![Gate::cx(0, 1).unwrap()]).unwrap();
        let inv = inverse_with(&c, InverseStyle::Native).unwrap();
        assert_eq!(inv, c);

        let m = haar_su4(&mut stream(3));
        let mut c = Circuit::new(2);
        c.push(vec![Gate::su4(m, 0, 1).unwrap()]).unwrap();
        let inv = inverse(&c).unwrap();
        match &inv.layers()[0].gates()[0].kind {
            GateKind::Su4(d) => assert!(max_abs_diff(d, &linalg::dagger(&m)) == 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn inverse_rejects_measure() {
        let mut c = Circuit::new(1);
        c.push(vec![Gate::measure(0)]).unwrap();
        assert!(matches!(inverse(&c), Err(Error::MeasureInInverse)));
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let c = qv_model_circuit(3, &mut stream(77)).unwrap();
        let mirror = compose(&c, &inverse(&c).unwrap(), true).unwrap();
        assert_eq!(mirror.depth(), 2 * c.depth());
        let p = simulate_ideal(&mirror).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn compose_counts_layers() {
        let mut a = Circuit::new(2);
        a.push(vec![Gate::x(0)]).unwrap();
        a.push(vec![Gate::x(1)]).unwrap();
        let mut b = Circuit::new(2);
        for _ in 0..3 {
            b.push(vec![Gate::cx(0, 1).unwrap()]).unwrap();
        }
        let ab = compose(&a, &b, true).unwrap();
        assert_eq!(ab.depth(), 5);
        assert!(ab.has_barrier());
        assert_eq!(compose(&a, &Circuit::new(2), false).unwrap(), a);
        assert!(matches!(
            compose(&a, &Circuit::new(3), false),
            Err(Error::WidthMismatch { .. })
        ));
    }

    #[test]
    fn bind_params_cases() {
        let mut c = Circuit::new(2);
        c.push(vec![Gate::param(0, 0), Gate::param(1, 1)]).unwrap();
        assert_eq!(c.param_slots(), vec![0, 1]);

        let zeros: BTreeMap<_, _> = [(0, EulerAngles::new(0.0, 0.0, 0.0)), (1, EulerAngles::new(0.0, 0.0, 0.0))].into();
        let bound = bind_params(&c, &zeros).unwrap();
        assert!(bound.param_slots().is_empty());
        for g in bound.gates() {
            assert!(max_abs_diff(&g.matrix1().unwrap(), &linalg::identity()) < 1e-15);
        }

        let pi = std::f64::consts::PI;
        let xs: BTreeMap<_, _> = [(0, EulerAngles::new(pi, 0.0, pi)), (1, EulerAngles::new(0.3, 0.1, 0.2))].into();
        let bound_x = bind_params(&c, &xs).unwrap();
        let first = bound_x.layers()[0].gates()[0].matrix1().unwrap();
        assert!(max_abs_diff(&first, &linalg::pauli_x()) < 1e-12);
        // The source circuit is untouched and can be rebound.
        assert_eq!(c.param_slots(), vec![0, 1]);
        assert_ne!(bound, bound_x);

        let partial: BTreeMap<_, _> = [(0, EulerAngles::new(0.0, 0.0, 0.0))].into();
        assert!(matches!(bind_params(&c, &partial), Err(Error::UnboundSlot { slot: 1 })));
    }

    #[test]
    fn permutation_must_be_bijective() {
        assert!(PermutationSpec::new(vec![0, 0, 1]).is_err());
        assert!(PermutationSpec::new(vec![0, 3, 1]).is_err());
        let p = PermutationSpec::new(vec![2, 0, 1]).unwrap();
        let mut c = Circuit::new(3);
        c.push(vec![Gate::x(0)]).unwrap();
        let r = c.relabel(&p).unwrap();
        assert_eq!(r.layers()[0].gates()[0].targets, vec![2]);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut rng = stream(4);
        let mut c = qv_model_circuit(3, &mut rng).unwrap();
        c.push_barrier();
        c.push(vec![Gate::param(7, 0), Gate::cx(1, 2).unwrap()]).unwrap();
        let c = compose(&c, &Circuit::new(3), true).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        let back: Circuit = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }
}
