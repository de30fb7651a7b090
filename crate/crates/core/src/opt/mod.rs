//! Compilation, suppression and mitigation techniques, their rule classes,
//! and the incurred-overhead ledger.
//!
//! A pipeline is written as a comma list, optionally with `key=value`
//! options after a colon:
//!
//! ```
//! use qbench::opt::{Pipeline, RuleClass};
//!
//! let p: Pipeline = "layout,dd,pec:gamma_cap=50".parse().unwrap();
//! let manifest = p.manifest();
//! assert!(manifest.contains(RuleClass::Rule2Mitigation));
//! assert!(!manifest.is_gaming());
//! assert_eq!(p.to_string(), "layout,dd,pec:gamma_cap=50");
//! ```

mod dd;
mod layout;
mod mitigation;
mod pec;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use dd::insert_dd;
pub use layout::{layout_score, select_layout, CouplingMap};
pub use mitigation::{calibrate, mitigate_measurement, project_to_simplex};
pub use pec::{pec_expectation, pec_gamma, PecConfig, PecEstimate};

use crate::circuit::Circuit;
use crate::error::{invalid, Error, Result};
use crate::report::Status;
use crate::sim::{ExecutionStats, NoiseModel};

/// Default frequency threshold of the output filter.
pub const DEFAULT_FILTER_THRESHOLD: f64 = 0.05;
/// Default cap on the PEC sampling overhead γ.
pub const DEFAULT_GAMMA_CAP: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RuleClass {
    /// Constant-time compilation or suppression; always allowed.
    #[serde(rename = "rule1-constant")]
    Rule1Constant,
    /// Mitigation; allowed only with its overhead disclosed.
    #[serde(rename = "rule2-mitigation")]
    Rule2Mitigation,
    /// Uses knowledge of the circuit output; never part of a benchmark.
    #[serde(rename = "rule3-forbidden")]
    Rule3Forbidden,
}

impl RuleClass {
    pub fn label(self) -> &'static str {
        match self {
            RuleClass::Rule1Constant => "rule1-constant",
            RuleClass::Rule2Mitigation => "rule2-mitigation",
            RuleClass::Rule3Forbidden => "rule3-forbidden",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Technique {
    /// Noise-aware qubit placement.
    Layout,
    /// X–X dynamic decoupling in idle windows.
    Dd,
    /// Tensored readout-error inversion.
    Mmit,
    /// Probabilistic error cancellation of the known Pauli channel.
    Pec { gamma_cap: f64 },
    /// Dropping low-frequency outcomes.
    Filter { threshold: f64 },
}

/// Overhead a technique declares up front; what it actually incurred in a
/// run goes to the [`OverheadLedger`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NominalOverhead {
    pub extra_circuits: u64,
    /// `None` when the multiplier is only known at run time.
    pub shots_multiplier: Option<f64>,
    pub classical: String,
}

impl Technique {
    pub fn name(&self) -> &'static str {
        match self {
            Technique::Layout => "layout",
            Technique::Dd => "dd",
            Technique::Mmit => "mmit",
            Technique::Pec { .. } => "pec",
            Technique::Filter { .. } => "filter",
        }
    }

    pub fn rule_class(&self) -> RuleClass {
        match self {
            Technique::Layout | Technique::Dd => RuleClass::Rule1Constant,
            Technique::Mmit | Technique::Pec { .. } => RuleClass::Rule2Mitigation,
            Technique::Filter { .. } => RuleClass::Rule3Forbidden,
        }
    }

    pub fn nominal_overhead(&self) -> NominalOverhead {
        let (extra_circuits, shots_multiplier, classical) = match self {
            Technique::Layout => (0, Some(1.0), "one placement search per circuit, independent of its output"),
            Technique::Dd => (0, Some(1.0), "linear scan over idle windows"),
            Technique::Mmit => (2, Some(1.0), "two calibration circuits and one tensored inverse per distribution"),
            Technique::Pec { .. } => (0, None, "shots multiplied by gamma squared of the cancelled channel"),
            Technique::Filter { .. } => (0, Some(1.0), "post-selection on observed frequencies"),
        };
        NominalOverhead {
            extra_circuits,
            shots_multiplier,
            classical: classical.to_string(),
        }
    }

    fn same_kind(&self, other: &Technique) -> bool {
        self.name() == other.name()
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Technique::Pec { gamma_cap } if *gamma_cap != DEFAULT_GAMMA_CAP => {
                write!(f, "pec:gamma_cap={gamma_cap}")
            }
            Technique::Filter { threshold } if *threshold != DEFAULT_FILTER_THRESHOLD => {
                write!(f, "filter:threshold={threshold}")
            }
            t => f.write_str(t.name()),
        }
    }
}

fn parse_options(item: &str, opts: &str, allowed: &str) -> Result<f64> {
    let (key, value) = opts
        .split_once('=')
        .ok_or_else(|| invalid("pipeline", format!("expected key=value after `{item}:`")))?;
    if key.trim() != allowed {
        return Err(invalid("pipeline", format!("unknown option `{key}` for `{item}`")));
    }
    value
        .trim()
        .parse::<f64>()
        .map_err(|_| invalid("pipeline", format!("`{value}` is not a number")))
}

impl FromStr for Technique {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, opts) = match s.split_once(':') {
            Some((h, o)) => (h.trim(), Some(o)),
            None => (s, None),
        };
        let technique = match head {
            "layout" => Technique::Layout,
            "dd" => Technique::Dd,
            "mmit" | "measurement-mitigation" => Technique::Mmit,
            "pec" => {
                let gamma_cap = match opts {
                    Some(o) => parse_options(head, o, "gamma_cap")?,
                    None => DEFAULT_GAMMA_CAP,
                };
                if gamma_cap.is_nan() || gamma_cap < 1.0 {
                    return Err(invalid("pipeline", "gamma_cap must be at least 1"));
                }
                return Ok(Technique::Pec { gamma_cap });
            }
            "filter" => {
                let threshold = match opts {
                    Some(o) => parse_options(head, o, "threshold")?,
                    None => DEFAULT_FILTER_THRESHOLD,
                };
                if !(0.0..=1.0).contains(&threshold) {
                    return Err(invalid("pipeline", "filter threshold must lie in [0, 1]"));
                }
                return Ok(Technique::Filter { threshold });
            }
            other => {
                return Err(Error::Unknown {
                    what: "technique",
                    name: other.to_string(),
                })
            }
        };
        if opts.is_some() {
            return Err(invalid("pipeline", format!("`{head}` takes no options")));
        }
        Ok(technique)
    }
}

/// Ordered list of techniques; each technique at most once.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pipeline(Vec<Technique>);

impl Pipeline {
    pub fn new(techniques: Vec<Technique>) -> Result<Self> {
        for (i, t) in techniques.iter().enumerate() {
            if techniques[..i].iter().any(|u| u.same_kind(t)) {
                return Err(invalid("pipeline", format!("`{}` listed twice", t.name())));
            }
        }
        Ok(Pipeline(techniques))
    }

    pub fn empty() -> Self {
        Pipeline(Vec::new())
    }

    pub fn techniques(&self) -> &[Technique] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn has(&self, name: &str) -> bool {
        self.0.iter().any(|t| t.name() == name)
    }

    pub fn filter_threshold(&self) -> Option<f64> {
        self.0.iter().find_map(|t| match t {
            Technique::Filter { threshold } => Some(*threshold),
            _ => None,
        })
    }

    pub fn gamma_cap(&self) -> Option<f64> {
        self.0.iter().find_map(|t| match t {
            Technique::Pec { gamma_cap } => Some(*gamma_cap),
            _ => None,
        })
    }

    pub fn manifest(&self) -> Manifest {
        classify_pipeline(&self.0)
    }

    /// Apply the circuit-level passes (layout, DD) for execution on `device`.
    pub fn prepare(&self, c: &Circuit, device: &NoiseModel) -> Result<Prepared> {
        let qubits = device.device_qubits();
        if qubits > 0 && c.width() > qubits {
            return Err(invalid(
                "width",
                format!("circuit needs {} qubits, the device has {qubits}", c.width()),
            ));
        }
        let physical = match CouplingMap::from_noise(device)? {
            Some(map) if self.has("layout") => select_layout(c, &map)?,
            _ => (0..c.width()).collect(),
        };
        let circuit = if self.has("dd") { insert_dd(c)? } else { c.clone() };
        Ok(Prepared {
            circuit,
            noise: device.restrict(&physical),
            physical,
        })
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("none");
        }
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "none" {
            return Ok(Pipeline::empty());
        }
        Pipeline::new(s.split(',').map(str::parse).collect::<Result<_>>()?)
    }
}

/// A circuit after layout and suppression, with the noise its virtual
/// qubits see.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub circuit: Circuit,
    pub noise: NoiseModel,
    /// `physical[v]` hosts virtual qubit `v`.
    pub physical: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub technique: String,
    pub spec: String,
    pub rule_class: RuleClass,
    pub nominal_overhead: NominalOverhead,
}

/// Disclosure of every technique in a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub techniques: Vec<ManifestEntry>,
    /// False once any rule-3 technique is present.
    pub benchmark_eligible: bool,
}

impl Manifest {
    pub fn contains(&self, class: RuleClass) -> bool {
        self.techniques.iter().any(|t| t.rule_class == class)
    }

    pub fn is_gaming(&self) -> bool {
        self.contains(RuleClass::Rule3Forbidden)
    }

    /// The report status: `default` unless gaming forces `gaming-demo`.
    pub fn status(&self, default: Status) -> Status {
        if self.is_gaming() {
            Status::GamingDemo
        } else {
            default
        }
    }
}

pub fn classify_pipeline(techniques: &[Technique]) -> Manifest {
    let entries: Vec<ManifestEntry> = techniques
        .iter()
        .map(|t| ManifestEntry {
            technique: t.name().to_string(),
            spec: t.to_string(),
            rule_class: t.rule_class(),
            nominal_overhead: t.nominal_overhead(),
        })
        .collect();
    let benchmark_eligible = entries.iter().all(|e| e.rule_class != RuleClass::Rule3Forbidden);
    Manifest {
        techniques: entries,
        benchmark_eligible,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Usage {
    pub circuits: u64,
    pub shots: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TechniqueUsage {
    pub technique: String,
    pub circuits: u64,
    pub shots: u64,
    /// Sampling-overhead multiplier actually incurred (PEC: γ²).
    pub shots_multiplier: f64,
}

/// Circuits and shots executed in a run, split by what caused them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OverheadLedger {
    pub base: Usage,
    pub techniques: Vec<TechniqueUsage>,
}

impl OverheadLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_base(&mut self, circuits: u64, shots: u64) {
        self.base.circuits += circuits;
        self.base.shots += shots;
    }

    fn entry(&mut self, technique: &str) -> &mut TechniqueUsage {
        if let Some(i) = self.techniques.iter().position(|t| t.technique == technique) {
            return &mut self.techniques[i];
        }
        self.techniques.push(TechniqueUsage {
            technique: technique.to_string(),
            circuits: 0,
            shots: 0,
            shots_multiplier: 1.0,
        });
        self.techniques.last_mut().expect("just pushed")
    }

    pub fn record(&mut self, technique: &str, circuits: u64, shots: u64) {
        let e = self.entry(technique);
        e.circuits += circuits;
        e.shots += shots;
    }

    /// Keep the largest multiplier seen for `technique`.
    pub fn note_multiplier(&mut self, technique: &str, multiplier: f64) {
        let e = self.entry(technique);
        e.shots_multiplier = e.shots_multiplier.max(multiplier);
    }

    pub fn multiplier(&self, technique: &str) -> Option<f64> {
        self.techniques
            .iter()
            .find(|t| t.technique == technique)
            .map(|t| t.shots_multiplier)
    }

    pub fn totals(&self) -> Usage {
        self.techniques.iter().fold(self.base.clone(), |acc, t| Usage {
            circuits: acc.circuits + t.circuits,
            shots: acc.shots + t.shots,
        })
    }

    /// Check the ledger against what the executor actually ran.
    pub fn reconcile(&self, executed: &ExecutionStats) -> Result<()> {
        let t = self.totals();
        if t.circuits != executed.circuits || t.shots != executed.shots {
            return Err(Error::InvalidReport(format!(
                "ledger records {} circuits / {} shots, executor ran {} / {}",
                t.circuits, t.shots, executed.circuits, executed.shots
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        for s in ["layout", "layout,dd,mmit", "pec:gamma_cap=50", "filter:threshold=0.1", "dd,filter"] {
            let p: Pipeline = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert_eq!("none".parse::<Pipeline>().unwrap(), Pipeline::empty());
        assert_eq!("".parse::<Pipeline>().unwrap(), Pipeline::empty());
    }

    #[test]
    fn parse_rejects_bad_items() {
        assert!("layout,layout".parse::<Pipeline>().is_err());
        assert!("zne".parse::<Pipeline>().is_err());
        assert!("dd:x=1".parse::<Pipeline>().is_err());
        assert!("pec:gamma=3".parse::<Pipeline>().is_err());
        assert!("filter:threshold=2".parse::<Pipeline>().is_err());
    }

    #[test]
    fn classification_examples() {
        let m = classify_pipeline(&[Technique::Layout, Technique::Dd]);
        assert!(m.benchmark_eligible);
        assert!(m.techniques.iter().all(|t| t.rule_class == RuleClass::Rule1Constant));

        let m = classify_pipeline(&[Technique::Layout, Technique::Dd, Technique::Mmit]);
        assert!(m.benchmark_eligible);
        assert!(m.contains(RuleClass::Rule2Mitigation));
        assert_eq!(m.status(Status::Diagnostic), Status::Diagnostic);

        let m = classify_pipeline(&[Technique::Filter { threshold: 0.1 }]);
        assert!(!m.benchmark_eligible);
        assert_eq!(m.status(Status::Benchmark), Status::GamingDemo);
    }

    #[test]
    fn ledger_totals() {
        let mut l = OverheadLedger::new();
        l.record_base(10, 1000);
        l.record("mmit", 2, 200);
        l.note_multiplier("pec", 4.0);
        l.note_multiplier("pec", 2.0);
        assert_eq!(l.totals(), Usage { circuits: 12, shots: 1200 });
        assert_eq!(l.multiplier("pec"), Some(4.0));
        assert!(l.reconcile(&ExecutionStats { circuits: 12, shots: 1200 }).is_ok());
        assert!(l.reconcile(&ExecutionStats { circuits: 11, shots: 1200 }).is_err());
    }
}
